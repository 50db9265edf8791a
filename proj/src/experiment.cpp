#include "dictid/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dictid {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<double> parse_list(const std::string& value, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: field '" + key + "' has a non-numeric entry '" + item + "'");
    }
  }
  return out;
}

double parse_number(const std::string& value, const std::string& key) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: field '" + key + "' is not a number: '" + value + "'");
  }
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

SparsityModel make_model(ModelKind kind, double sparsity, int K) {
  if (kind == ModelKind::SG) {
    const int s = static_cast<int>(std::lround(sparsity));
    if (std::abs(sparsity - s) > 1e-9) {
      throw std::invalid_argument("sparsity grid: SG entries must be integers");
    }
    SparsityModel m = SGModel{s};
    validate_model(m, K);
    return m;
  }
  SparsityModel m = BGModel{sparsity};
  validate_model(m, K);
  return m;
}

}  // namespace

std::string to_string(EmpiricalStatus s) {
  switch (s) {
    case EmpiricalStatus::Recovered: return "Recovered";
    case EmpiricalStatus::NotRecovered: return "NotRecovered";
    case EmpiricalStatus::Ambiguous: return "Ambiguous";
  }
  return "?";
}

void PhaseGridConfig::validate() const {
  if (K < 2) throw std::invalid_argument("config: K must be at least 2");
  if (mu_values.empty()) throw std::invalid_argument("config: mu_values must be nonempty");
  if (sparsity_values.empty()) throw std::invalid_argument("config: sparsity_values must be nonempty");
  if (N < 1) throw std::invalid_argument("config: N must be positive");
  if (batches < 1) throw std::invalid_argument("config: batches must be positive");
  if (!(error_threshold_low > 0.0 && error_threshold_low < error_threshold_high)) {
    throw std::invalid_argument("config: need 0 < error_threshold_low < error_threshold_high");
  }
  if (family == GramFamily::GramFile && gram_path.empty()) {
    throw std::invalid_argument("config: family gram_file requires gram_file=<path>");
  }
  descent.validate();
}

PhaseGridConfig parse_phase_config(std::istream& in) {
  PhaseGridConfig cfg;
  bool seen_K = false, seen_N = false, seen_batches = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "K") {
      cfg.K = static_cast<int>(parse_number(value, key));
      seen_K = true;
    } else if (key == "family") {
      if (value == "constant_mu") {
        cfg.family = GramFamily::ConstantMu;
      } else if (value == "minimal_mu") {
        cfg.family = GramFamily::MinimalMu;
      } else if (value == "gram_file") {
        cfg.family = GramFamily::GramFile;
      } else {
        throw std::invalid_argument("config: field 'family' must be constant_mu, minimal_mu or gram_file");
      }
    } else if (key == "gram_file") {
      cfg.gram_path = value;
    } else if (key == "mu_values") {
      cfg.mu_values = parse_list(value, key);
    } else if (key == "sparsity_values") {
      cfg.sparsity_values = parse_list(value, key);
    } else if (key == "model") {
      if (value == "sg") {
        cfg.model_kind = ModelKind::SG;
      } else if (value == "bg") {
        cfg.model_kind = ModelKind::BG;
      } else {
        throw std::invalid_argument("config: field 'model' must be sg or bg");
      }
    } else if (key == "N") {
      cfg.N = static_cast<int>(parse_number(value, key));
      seen_N = true;
    } else if (key == "batches") {
      cfg.batches = static_cast<int>(parse_number(value, key));
      seen_batches = true;
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_number(value, key));
    } else if (key == "error_threshold_low") {
      cfg.error_threshold_low = parse_number(value, key);
    } else if (key == "error_threshold_high") {
      cfg.error_threshold_high = parse_number(value, key);
    } else if (key == "margin_band") {
      cfg.margin_band = parse_number(value, key);
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(parse_number(value, key));
    } else if (key == "descent_max_iters") {
      cfg.descent.max_iters = static_cast<int>(parse_number(value, key));
    } else if (key == "descent_step0") {
      cfg.descent.step0 = parse_number(value, key);
    } else if (key == "descent_stop_tol") {
      cfg.descent.stop_tol = parse_number(value, key);
    } else if (key == "descent_singular_guard") {
      cfg.descent.singular_guard = parse_number(value, key);
    } else {
      throw std::invalid_argument("config: unknown field '" + key + "'");
    }
  }
  if (!seen_K) throw std::invalid_argument("config: missing required field 'K'");
  if (!seen_N) throw std::invalid_argument("config: missing required field 'N'");
  if (!seen_batches) throw std::invalid_argument("config: missing required field 'batches'");
  cfg.validate();
  return cfg;
}

PhaseGridConfig load_phase_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  return parse_phase_config(in);
}

GramMatrix read_gram(std::istream& in) {
  int K = 0;
  if (!(in >> K) || K < 1) throw std::invalid_argument("gram file: first token must be a positive K");
  Eigen::MatrixXd M(K, K);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      if (!(in >> M(i, j))) {
        throw std::invalid_argument("gram file: expected " + std::to_string(K * K) + " entries");
      }
    }
  }
  return GramMatrix(std::move(M));
}

GramMatrix read_gram_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("gram file: cannot open '" + path + "'");
  return read_gram(in);
}

void write_gram(std::ostream& out, const GramMatrix& M) {
  const int K = M.size();
  out << K << "\n";
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      out << format_number(M(i, j)) << (j + 1 < K ? " " : "\n");
    }
  }
}

GramMatrix family_gram(const PhaseGridConfig& cfg, double mu) {
  switch (cfg.family) {
    case GramFamily::ConstantMu: {
      Eigen::MatrixXd M = Eigen::MatrixXd::Constant(cfg.K, cfg.K, mu);
      M.diagonal().setConstant(1.0);
      return GramMatrix(std::move(M));
    }
    case GramFamily::MinimalMu:
      return minimal_mu_gram(cfg.K, mu);
    case GramFamily::GramFile:
      return read_gram_file(cfg.gram_path);
  }
  throw std::logic_error("family_gram: unreachable");
}

Verdict cell_verdict(const GramMatrix& M0, ModelKind kind, double sparsity) {
  const SparsityModel model = make_model(kind, sparsity, M0.size());
  const int m = M0.size() - 1;
  const bool exact_ok = kind == ModelKind::SG ? m <= limits::kMaxExactSubsetDim : m <= limits::kMaxExactBernoulliDim;
  return population_verdict(M0, model, exact_ok ? VerdictMethod::ExactDual : VerdictMethod::Bounds);
}

std::vector<PhaseCell> run_phase_grid(const PhaseGridConfig& cfg) {
  cfg.validate();
  const int n_mu = static_cast<int>(cfg.mu_values.size());
  const int n_sp = static_cast<int>(cfg.sparsity_values.size());
  const int n_cells = n_mu * n_sp;

  std::vector<PhaseCell> cells(n_cells);

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  const auto worker = [&]() {
    while (true) {
      const int c = next.fetch_add(1);
      if (c >= n_cells || failed.load()) return;
      try {
        const int mi = c / n_sp;
        const int si = c % n_sp;
        PhaseCell& cell = cells[c];
        cell.mu_index = mi;
        cell.sparsity_index = si;
        cell.sparsity = cfg.sparsity_values[si];

        const GramMatrix M0 = family_gram(cfg, cfg.mu_values[mi]);
        // For an external gram the grid has no mu axis; report its coherence.
        cell.mu = cfg.family == GramFamily::GramFile ? cumulative_coherence(M0, 1) : cfg.mu_values[mi];

        const Verdict verdict = cell_verdict(M0, cfg.model_kind, cell.sparsity);
        cell.theory_margin = verdict.margin;
        cell.theory_status = verdict.status;

        const Dictionary D0 = dictionary_from_gram(M0);
        const SparsityModel model = make_model(cfg.model_kind, cell.sparsity, cfg.K);

        cell.batch_errors.resize(cfg.batches);
        cell.batch_iterations.resize(cfg.batches);
        cell.batch_converged.resize(cfg.batches);
        for (int b = 0; b < cfg.batches; ++b) {
          const std::uint64_t seed = substream_seed(cfg.seed, mi, si, b);
          const SignalBatch batch = generate_signals(D0, model, cfg.N, seed);
          const DescentTrace trace = manifold_descent(D0, batch, cfg.descent, D0);
          cell.batch_errors[b] = trace.final_error;
          cell.batch_iterations[b] = trace.iterations;
          cell.batch_converged[b] = trace.converged;
        }

        std::vector<double> sorted = cell.batch_errors;
        std::sort(sorted.begin(), sorted.end());
        const int n = static_cast<int>(sorted.size());
        const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        if (median < cfg.error_threshold_low) {
          cell.empirical_status = EmpiricalStatus::Recovered;
        } else if (median > cfg.error_threshold_high) {
          cell.empirical_status = EmpiricalStatus::NotRecovered;
        } else {
          cell.empirical_status = EmpiricalStatus::Ambiguous;
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        failed.store(true);
        if (error_message.empty()) error_message = e.what();
      }
    }
  };

  int n_threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, n_cells);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  if (failed.load()) throw std::runtime_error("phase grid: " + error_message);
  return cells;
}

AgreementSummary summarize_agreement(const std::vector<PhaseCell>& cells, double margin_band) {
  AgreementSummary s;
  for (const PhaseCell& cell : cells) {
    if (std::abs(cell.theory_margin) <= margin_band) continue;
    ++s.cells_in_band;
    const bool match =
        (cell.theory_status == VerdictStatus::Identifiable && cell.empirical_status == EmpiricalStatus::Recovered) ||
        (cell.theory_status == VerdictStatus::NotIdentifiable &&
         cell.empirical_status == EmpiricalStatus::NotRecovered);
    if (match) ++s.cells_agreeing;
  }
  return s;
}

void write_phase_csv(std::ostream& out, const PhaseGridConfig& cfg, const std::vector<PhaseCell>& cells) {
  out << "mu,sparsity,batch,final_error,iterations,converged,theory_margin,theory_status\n";
  for (const PhaseCell& cell : cells) {
    for (size_t b = 0; b < cell.batch_errors.size(); ++b) {
      out << format_number(cell.mu) << ',' << format_number(cell.sparsity) << ',' << b << ','
          << format_number(cell.batch_errors[b]) << ',' << cell.batch_iterations[b] << ','
          << (cell.batch_converged[b] ? 1 : 0) << ',' << format_number(cell.theory_margin) << ','
          << to_string(cell.theory_status) << "\n";
    }
  }
  const AgreementSummary s = summarize_agreement(cells, cfg.margin_band);
  out << "# agreement_fraction," << format_number(s.fraction()) << ",cells_in_band," << s.cells_in_band
      << ",cells_agreeing," << s.cells_agreeing << "\n";
}

}  // namespace dictid
