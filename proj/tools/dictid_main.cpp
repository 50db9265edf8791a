// Command-line front end: identifiability verdicts, dual-norm bounds, phase
// boundaries, Monte Carlo phase diagrams, sample-size queries, and
// directional-derivative checks.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dictid/detail/rng.hpp"
#include "dictid/experiment.hpp"
#include "dictid/finite_sample.hpp"

namespace {

constexpr int kExitUsage = 64;

struct GramOptions {
  std::string gram_path;
  std::string family = "constant_mu";
  int K = 0;
  double mu = 0.0;

  dictid::GramMatrix resolve() const {
    if (!gram_path.empty()) return dictid::read_gram_file(gram_path);
    if (K < 2) throw std::invalid_argument("need --gram <file> or --family with --K and --mu");
    if (family == "constant_mu") {
      Eigen::MatrixXd M = Eigen::MatrixXd::Constant(K, K, mu);
      M.diagonal().setConstant(1.0);
      return dictid::GramMatrix(std::move(M));
    }
    if (family == "minimal_mu") return dictid::minimal_mu_gram(K, mu);
    throw std::invalid_argument("--family must be constant_mu or minimal_mu");
  }
};

void add_gram_options(CLI::App* cmd, GramOptions& opts) {
  cmd->add_option("--gram", opts.gram_path, "gram file: first line K, then K rows of K reals");
  cmd->add_option("--family", opts.family, "constant_mu | minimal_mu (with --K, --mu)");
  cmd->add_option("--K", opts.K, "dictionary size for --family");
  cmd->add_option("--mu", opts.mu, "collinearity parameter for --family");
}

dictid::SparsityModel parse_model(const std::string& text, int K) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("--model must be sg:<s> or bg:<p>");
  const std::string kind = text.substr(0, colon);
  const std::string value = text.substr(colon + 1);
  dictid::SparsityModel model;
  if (kind == "sg") {
    model = dictid::SGModel{std::stoi(value)};
  } else if (kind == "bg") {
    model = dictid::BGModel{std::stod(value)};
  } else {
    throw std::invalid_argument("--model must be sg:<s> or bg:<p>");
  }
  dictid::validate_model(model, K);
  return model;
}

dictid::GroupNormParam model_to_param(const dictid::SparsityModel& model) {
  if (const auto* sg = std::get_if<dictid::SGModel>(&model)) return dictid::SubsetParam{sg->s};
  return dictid::BernoulliParam{std::get<dictid::BGModel>(model).p};
}

dictid::VerdictMethod parse_method(const std::string& text) {
  if (text == "exact") return dictid::VerdictMethod::ExactDual;
  if (text == "bounds") return dictid::VerdictMethod::Bounds;
  throw std::invalid_argument("--method must be exact or bounds");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

Eigen::VectorXd read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("vector file: cannot open '" + path + "'");
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  if (values.empty()) throw std::invalid_argument("vector file: no numeric entries");
  Eigen::VectorXd z(values.size());
  for (size_t i = 0; i < values.size(); ++i) z(i) = values[i];
  return z;
}

int run_verdict(const GramOptions& gopt, const std::string& model_text, const std::string& method_text) {
  const dictid::GramMatrix M0 = gopt.resolve();
  const dictid::SparsityModel model = parse_model(model_text, M0.size());
  const dictid::Verdict v = dictid::population_verdict(M0, model, parse_method(method_text));
  std::cout << "condition: " << dictid::to_string(v.condition) << "\n"
            << "lhs: " << fmt(v.lhs) << "\n"
            << "rhs: " << fmt(v.rhs) << "\n"
            << "margin: " << fmt(v.margin) << "\n"
            << "status: " << dictid::to_string(v.status) << "\n";
  switch (v.status) {
    case dictid::VerdictStatus::Identifiable: return 0;
    case dictid::VerdictStatus::NotIdentifiable: return 1;
    case dictid::VerdictStatus::Indeterminate: return 2;
  }
  return 2;
}

int run_bounds(const std::string& vec_path, const GramOptions& gopt, int column, const std::string& model_text,
               double tol) {
  Eigen::VectorXd z;
  if (!vec_path.empty()) {
    z = read_vector_file(vec_path);
  } else {
    const dictid::GramMatrix M0 = gopt.resolve();
    if (column < 1 || column > M0.size()) {
      throw std::invalid_argument("--column must be a 1-based column index of the gram");
    }
    z = M0.column_without_diagonal(column - 1);
  }
  const int m = static_cast<int>(z.size());
  // The model parameter doubles as the norm parameter; K = m + 1 admits any
  // s up to m.
  const dictid::SparsityModel model = parse_model(model_text, m + 1);
  const dictid::GroupNormParam param = model_to_param(model);

  const dictid::DualBounds b = dictid::dual_norm_bounds(z, param);
  std::cout << "m: " << m << "\n"
            << "lower: " << fmt(b.lower) << "\n"
            << "upper: " << fmt(b.upper) << "\n";
  const bool subset = std::holds_alternative<dictid::SubsetParam>(param);
  const int cap = subset ? dictid::limits::kMaxExactSubsetDim : dictid::limits::kMaxExactBernoulliDim;
  if (m <= cap) {
    const dictid::DualCertificate cert = dictid::dual_norm_exact(z, param, tol);
    std::cout << "exact: " << fmt(cert.value) << "\n"
              << "gap: " << fmt(cert.gap) << "\n";
  } else {
    std::cout << "exact: unavailable (m above the exact-dual size cap; bounds only)\n";
  }
  return 0;
}

int run_boundary(int K, const std::string& family, const std::string& model_kind, const std::string& out_path,
                 const std::string& p_grid) {
  if (K < 2) throw std::invalid_argument("--K must be at least 2");
  const bool sg = model_kind == "sg";
  if (!sg && model_kind != "bg") throw std::invalid_argument("--model must be sg or bg");

  std::vector<double> sparsities;
  if (sg) {
    for (int s = 1; s <= K - 1; ++s) sparsities.push_back(s);
  } else {
    const std::vector<double> grid = [&]() {
      std::vector<double> g;
      std::stringstream ss(p_grid);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) g.push_back(std::stod(item));
      }
      return g;
    }();
    sparsities = grid;
  }

  std::ostringstream csv;
  csv << "sparsity,critical_mu\n";
  for (double sp : sparsities) {
    double mu;
    if (family == "constant_mu") {
      mu = sg ? dictid::phase_boundary_constant_mu_sg(K, static_cast<int>(sp))
              : dictid::phase_boundary_constant_mu_bg(K, sp);
    } else if (family == "minimal_mu") {
      mu = sg ? 1.0 - (sp - 1.0) / (K - 1) : 1.0 - sp;
    } else {
      throw std::invalid_argument("--family must be constant_mu or minimal_mu");
    }
    csv << fmt(sp) << ',' << fmt(mu) << "\n";
  }

  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    out << csv.str();
  }
  return 0;
}

int run_phase_diagram(const std::string& config_path, const std::string& out_path, int threads) {
  dictid::PhaseGridConfig cfg = dictid::load_phase_config(config_path);
  if (threads > 0) cfg.threads = threads;
  const std::vector<dictid::PhaseCell> cells = dictid::run_phase_grid(cfg);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  dictid::write_phase_csv(out, cfg, cells);
  const dictid::AgreementSummary s = dictid::summarize_agreement(cells, cfg.margin_band);
  std::cerr << "phase diagram: " << cells.size() << " cells, agreement " << fmt(s.fraction()) << " over "
            << s.cells_in_band << " in-band cells\n";
  return 0;
}

int run_samplesize(const GramOptions& gopt, const std::string& model_text, double eps, double target,
                   const std::string& method_text) {
  const dictid::GramMatrix M0 = gopt.resolve();
  const dictid::SparsityModel model = parse_model(model_text, M0.size());
  const std::int64_t N = dictid::required_samples(M0, model, eps, target, parse_method(method_text));
  std::cout << N << "\n";
  return 0;
}

int run_derivcheck(const GramOptions& gopt, const std::string& model_text, int samples, std::uint64_t seed) {
  const dictid::GramMatrix M0 = gopt.resolve();
  const int K = M0.size();
  const dictid::SparsityModel model = parse_model(model_text, K);
  const dictid::Verdict v = dictid::population_verdict(M0, model);
  std::cout << "status: " << dictid::to_string(v.status) << "\n"
            << "margin: " << fmt(v.margin) << "\n";

  dictid::detail::Rng rng(seed);
  double min_plus = std::numeric_limits<double>::infinity();
  double max_minus = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    Eigen::MatrixXd A(K, K);
    for (int r = 0; r < K; ++r) {
      for (int c = 0; c < K; ++c) A(r, c) = rng.normal();
    }
    A = dictid::project_gram_tangent(M0, A);
    if (A.cwiseAbs().maxCoeff() == 0.0) continue;
    min_plus = std::min(min_plus, dictid::directional_derivative(M0, model, A, dictid::DerivativeSide::Plus));
    max_minus = std::max(max_minus, dictid::directional_derivative(M0, model, A, dictid::DerivativeSide::Minus));
  }
  std::cout << "sampled_min_plus: " << fmt(min_plus) << "\n"
            << "sampled_max_minus: " << fmt(max_minus) << "\n";

  bool consistent = true;
  if (v.status == dictid::VerdictStatus::Identifiable) {
    consistent = min_plus > 0.0 && max_minus < 0.0;
  } else if (v.status == dictid::VerdictStatus::NotIdentifiable &&
             v.condition == dictid::VerdictCondition::ExactDual) {
    const Eigen::MatrixXd bad = dictid::violating_direction(M0, model);
    const double dminus = dictid::directional_derivative(M0, model, bad, dictid::DerivativeSide::Minus);
    std::cout << "witness_minus: " << fmt(dminus) << "\n";
    consistent = dminus > 0.0;
  }
  std::cout << "consistent: " << (consistent ? "yes" : "no") << "\n";
  return consistent ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local identifiability of l1-minimization dictionary learning"};
  app.require_subcommand(1);

  // verdict
  auto* verdict = app.add_subcommand("verdict", "population identifiability verdict for a gram matrix");
  GramOptions verdict_gram;
  add_gram_options(verdict, verdict_gram);
  std::string verdict_model, verdict_method = "exact";
  verdict->add_option("--model", verdict_model, "sg:<s> or bg:<p>")->required();
  verdict->add_option("--method", verdict_method, "exact | bounds");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "dual-norm sandwich bounds (and exact value when feasible)");
  GramOptions bounds_gram;
  add_gram_options(bounds, bounds_gram);
  std::string bounds_vec, bounds_model;
  int bounds_column = 0;
  double bounds_tol = 1e-6;
  bounds->add_option("--vec", bounds_vec, "whitespace-separated vector file");
  bounds->add_option("--column", bounds_column, "1-based gram column; uses the off-diagonal part");
  bounds->add_option("--model", bounds_model, "sg:<k> or bg:<p>")->required();
  bounds->add_option("--tol", bounds_tol, "certificate gap tolerance");

  // boundary
  auto* boundary = app.add_subcommand("boundary", "phase boundary CSV for a parametric gram family");
  int boundary_K = 0;
  std::string boundary_family = "constant_mu", boundary_model, boundary_out;
  std::string boundary_pgrid = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95";
  boundary->add_option("--K", boundary_K, "dictionary size")->required();
  boundary->add_option("--family", boundary_family, "constant_mu | minimal_mu");
  boundary->add_option("--model", boundary_model, "sg | bg")->required();
  boundary->add_option("--out", boundary_out, "output CSV path (stdout when omitted)");
  boundary->add_option("--p-grid", boundary_pgrid, "comma-separated p grid for bg");

  // phase-diagram
  auto* phase = app.add_subcommand("phase-diagram", "Monte Carlo recovery grid, written as CSV");
  std::string phase_config, phase_out;
  int phase_threads = 0;
  phase->add_option("--config", phase_config, "key=value config file")->required();
  phase->add_option("--out", phase_out, "output CSV path")->required();
  phase->add_option("--threads", phase_threads, "worker threads (default: hardware)");

  // samplesize
  auto* samplesize = app.add_subcommand("samplesize", "smallest N with certified identifiability probability");
  GramOptions samplesize_gram;
  add_gram_options(samplesize, samplesize_gram);
  std::string samplesize_model, samplesize_method = "exact";
  double samplesize_eps = 0.25, samplesize_target = 0.9;
  samplesize->add_option("--model", samplesize_model, "sg:<s> or bg:<p>")->required();
  samplesize->add_option("--eps", samplesize_eps, "margin slack in (0, 1/2]");
  samplesize->add_option("--target", samplesize_target, "target probability in (0,1)");
  samplesize->add_option("--method", samplesize_method, "exact | bounds");

  // derivcheck
  auto* deriv = app.add_subcommand("derivcheck", "one-sided derivative signs along sampled tangent directions");
  GramOptions deriv_gram;
  add_gram_options(deriv, deriv_gram);
  std::string deriv_model;
  int deriv_samples = 1000;
  std::uint64_t deriv_seed = 0;
  deriv->add_option("--model", deriv_model, "sg:<s> or bg:<p>")->required();
  deriv->add_option("--samples", deriv_samples, "number of sampled directions");
  deriv->add_option("--seed", deriv_seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (verdict->parsed()) return run_verdict(verdict_gram, verdict_model, verdict_method);
    if (bounds->parsed()) return run_bounds(bounds_vec, bounds_gram, bounds_column, bounds_model, bounds_tol);
    if (boundary->parsed())
      return run_boundary(boundary_K, boundary_family, boundary_model, boundary_out, boundary_pgrid);
    if (phase->parsed()) return run_phase_diagram(phase_config, phase_out, phase_threads);
    if (samplesize->parsed())
      return run_samplesize(samplesize_gram, samplesize_model, samplesize_eps, samplesize_target,
                            samplesize_method);
    if (deriv->parsed()) return run_derivcheck(deriv_gram, deriv_model, deriv_samples, deriv_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
