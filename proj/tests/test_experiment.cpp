#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "dictid/experiment.hpp"

using namespace dictid;

namespace {

std::string small_config_text() {
  return "K = 4\n"
         "family = constant_mu\n"
         "mu_values = 0.05, 0.6\n"
         "sparsity_values = 1, 3\n"
         "model = sg\n"
         "N = 150\n"
         "batches = 2\n"
         "seed = 42\n"
         "descent_max_iters = 150\n"
         "# a comment line\n";
}

std::string run_grid_to_csv(const PhaseGridConfig& cfg) {
  const std::vector<PhaseCell> cells = run_phase_grid(cfg);
  std::ostringstream out;
  write_phase_csv(out, cfg, cells);
  return out.str();
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

// Runs the installed CLI binary (path from DICTID_CLI) capturing stdout.
CliResult run_cli(const std::string& args) {
  const char* cli = std::getenv("DICTID_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "DICTID_CLI must point at the dictid binary");
  const std::string cmd = std::string(cli) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  std::array<char, 4096> buf;
  size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), got);
  const int status = pclose(pipe);
  r.exit_code = WEXITSTATUS(status);
  return r;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string("/tmp/dictid_test_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config parsing") {
  SUBCASE("round trip of a valid config") {
    std::istringstream in(small_config_text());
    const PhaseGridConfig cfg = parse_phase_config(in);
    CHECK(cfg.K == 4);
    CHECK(cfg.mu_values.size() == 2);
    CHECK(cfg.sparsity_values.size() == 2);
    CHECK(cfg.model_kind == ModelKind::SG);
    CHECK(cfg.N == 150);
    CHECK(cfg.batches == 2);
    CHECK(cfg.seed == 42);
    CHECK(cfg.descent.max_iters == 150);
    CHECK(cfg.error_threshold_low == 1e-2);
    CHECK(cfg.error_threshold_high == 1e-1);
  }
  SUBCASE("unknown keys are named") {
    std::istringstream in("K = 4\nN = 10\nbatches = 1\nwibble = 3\nmu_values = 0.1\nsparsity_values = 1\n");
    try {
      parse_phase_config(in);
      FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("wibble") != std::string::npos);
    }
  }
  SUBCASE("missing required fields are named") {
    std::istringstream in("family = constant_mu\nmu_values = 0.1\nsparsity_values = 1\nN = 10\nbatches = 1\n");
    try {
      parse_phase_config(in);
      FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("'K'") != std::string::npos);
    }
  }
  SUBCASE("threshold ordering is validated") {
    std::istringstream in(
        "K = 4\nmu_values = 0.1\nsparsity_values = 1\nN = 10\nbatches = 1\n"
        "error_threshold_low = 0.5\nerror_threshold_high = 0.1\n");
    CHECK_THROWS_AS(parse_phase_config(in), std::invalid_argument);
  }
}

TEST_CASE("gram file round trip") {
  const GramMatrix M = minimal_mu_gram(3, 0.4);
  std::ostringstream out;
  write_gram(out, M);
  std::istringstream in(out.str());
  const GramMatrix back = read_gram(in);
  CHECK((back.entries() - M.entries()).cwiseAbs().maxCoeff() == 0.0);

  std::istringstream bad("2 1.0 0.5 0.5");
  CHECK_THROWS_AS(read_gram(bad), std::invalid_argument);
}

TEST_CASE("phase grid rows, statuses and determinism") {
  std::istringstream in(small_config_text());
  PhaseGridConfig cfg = parse_phase_config(in);

  const std::vector<PhaseCell> cells = run_phase_grid(cfg);
  REQUIRE(cells.size() == 4);
  for (const PhaseCell& cell : cells) {
    CHECK(cell.batch_errors.size() == 2);
  }

  // Deep corners: s=1 with mu=0.05 identifiable, s=3 with mu=0.6 not
  // (sqrt(3)*0.6 > 1/3).
  CHECK(cells[0].theory_status == VerdictStatus::Identifiable);
  CHECK(cells[3].theory_status == VerdictStatus::NotIdentifiable);

  const std::string csv1 = run_grid_to_csv(cfg);
  const std::string csv2 = run_grid_to_csv(cfg);
  CHECK(csv1 == csv2);

  cfg.seed = 43;
  CHECK(run_grid_to_csv(cfg) != csv1);

  // Header and footer shape.
  CHECK(csv1.rfind("mu,sparsity,batch,final_error,iterations,converged,theory_margin,theory_status\n", 0) == 0);
  CHECK(csv1.find("# agreement_fraction,") != std::string::npos);

  // 4 cells x 2 batches + header + footer.
  const long rows = std::count(csv1.begin(), csv1.end(), '\n');
  CHECK(rows == 10);
}

TEST_CASE("single cell, single batch yields one data row") {
  std::istringstream in(
      "K = 3\nmu_values = 0.2\nsparsity_values = 0.3\nmodel = bg\nN = 100\nbatches = 1\nseed = 7\n"
      "descent_max_iters = 80\n");
  const PhaseGridConfig cfg = parse_phase_config(in);
  const std::string csv = run_grid_to_csv(cfg);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + row + footer
}

TEST_CASE("agreement summary counts only confident cells") {
  std::vector<PhaseCell> cells(3);
  cells[0].theory_margin = 0.2;
  cells[0].theory_status = VerdictStatus::Identifiable;
  cells[0].empirical_status = EmpiricalStatus::Recovered;
  cells[1].theory_margin = -0.2;
  cells[1].theory_status = VerdictStatus::NotIdentifiable;
  cells[1].empirical_status = EmpiricalStatus::Ambiguous;
  cells[2].theory_margin = 0.01;  // inside the band, ignored
  cells[2].theory_status = VerdictStatus::Identifiable;
  cells[2].empirical_status = EmpiricalStatus::NotRecovered;
  const AgreementSummary s = summarize_agreement(cells, 0.05);
  CHECK(s.cells_in_band == 2);
  CHECK(s.cells_agreeing == 1);
  CHECK(s.fraction() == doctest::Approx(0.5));
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("verdict exit codes") {
  const std::string id_gram = write_temp("id.gram", "3\n1 0 0\n0 1 0\n0 0 1\n");
  CHECK(run_cli("verdict --gram " + id_gram + " --model sg:2").exit_code == 0);

  const CliResult family = run_cli("verdict --family constant_mu --K 2 --mu 0.7 --model bg:0.2");
  CHECK(family.exit_code == 0);
  CHECK(family.output.find("status: Identifiable") != std::string::npos);

  CHECK(run_cli("verdict --family constant_mu --K 10 --mu 0.5 --model sg:8").exit_code == 1);
  // Parse failure: malformed gram file.
  const std::string bad = write_temp("bad.gram", "2\n1 0.5\n");
  CHECK(run_cli("verdict --gram " + bad + " --model sg:1").exit_code == 64);
  // Invariant failure: off-diagonal magnitude at 1.
  const std::string collinear = write_temp("collinear.gram", "2\n1 1\n1 1\n");
  CHECK(run_cli("verdict --gram " + collinear + " --model sg:1").exit_code == 64);
  // Missing required option.
  CHECK(run_cli("verdict --gram " + id_gram).exit_code == 64);
}

TEST_CASE("bounds output") {
  const std::string vecfile = write_temp("z.vec", "5 0 0 0\n");
  const CliResult r = run_cli("bounds --vec " + vecfile + " --model sg:2");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("lower: 5") != std::string::npos);
  CHECK(r.output.find("upper: 5") != std::string::npos);
  CHECK(r.output.find("exact: 5") != std::string::npos);

  // Column mode against a constant-mu family gram.
  const CliResult col = run_cli("bounds --family constant_mu --K 4 --mu 0.5 --column 2 --model sg:2");
  CHECK(col.exit_code == 0);
  CHECK(col.output.find("exact: 0.7071067811") != std::string::npos);  // sqrt(2) * 0.5

  // Above the cap: bounds only.
  std::ostringstream big;
  for (int i = 0; i < 20; ++i) big << (i + 1) << " ";
  const std::string bigfile = write_temp("big.vec", big.str());
  const CliResult capped = run_cli("bounds --vec " + bigfile + " --model sg:3");
  CHECK(capped.exit_code == 0);
  CHECK(capped.output.find("exact: unavailable") != std::string::npos);
}

TEST_CASE("boundary closed forms") {
  const CliResult bg2 = run_cli("boundary --K 2 --family constant_mu --model bg --p-grid 0.3,0.5");
  CHECK(bg2.exit_code == 0);
  CHECK(bg2.output.find("0.3,0.7") != std::string::npos);
  CHECK(bg2.output.find("0.5,0.5") != std::string::npos);

  const CliResult sg10 = run_cli("boundary --K 10 --family constant_mu --model sg");
  CHECK(sg10.exit_code == 0);
  CHECK(sg10.output.find("4,0.333333333333") != std::string::npos);

  // Larger K sits pointwise below smaller K for the BG family.
  const CliResult k20 = run_cli("boundary --K 20 --family constant_mu --model bg --p-grid 0.3");
  const auto parse_last = [](const std::string& out) {
    const auto comma = out.rfind(',');
    return std::stod(out.substr(comma + 1));
  };
  CHECK(parse_last(k20.output) < parse_last(run_cli("boundary --K 5 --family constant_mu --model bg --p-grid 0.3").output));
}

TEST_CASE("samplesize prints a number") {
  const CliResult r = run_cli("samplesize --family constant_mu --K 10 --mu 0.02 --model sg:2 --eps 0.25 --target 0.9");
  CHECK(r.exit_code == 0);
  CHECK(std::stoll(r.output) > 0);
}

TEST_CASE("derivcheck is consistent on an orthogonal gram") {
  const std::string id_gram = write_temp("id5.gram", "5\n1 0 0 0 0\n0 1 0 0 0\n0 0 1 0 0\n0 0 0 1 0\n0 0 0 0 1\n");
  const CliResult r = run_cli("derivcheck --gram " + id_gram + " --model sg:2 --samples 50 --seed 3");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("consistent: yes") != std::string::npos);
}

TEST_CASE("phase-diagram writes a deterministic CSV file") {
  const std::string cfg = write_temp("grid.cfg",
                                     "K = 3\n"
                                     "family = constant_mu\n"
                                     "mu_values = 0.1, 0.7\n"
                                     "sparsity_values = 1, 2\n"
                                     "model = sg\n"
                                     "N = 120\n"
                                     "batches = 2\n"
                                     "seed = 11\n"
                                     "descent_max_iters = 100\n");
  const std::string out1 = "/tmp/dictid_test_grid1.csv";
  const std::string out2 = "/tmp/dictid_test_grid2.csv";
  CHECK(run_cli("phase-diagram --config " + cfg + " --out " + out1).exit_code == 0);
  CHECK(run_cli("phase-diagram --config " + cfg + " --out " + out2 + " --threads 2").exit_code == 0);

  const auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = slurp(out1);
  CHECK(!a.empty());
  CHECK(a == slurp(out2));
  CHECK(a.find("mu,sparsity,batch,final_error") == 0);

  // Unknown config fields surface as a usage error.
  const std::string badcfg = write_temp("bad.cfg", "K = 3\nnonsense = 1\n");
  CHECK(run_cli("phase-diagram --config " + badcfg + " --out /tmp/dictid_test_unused.csv").exit_code == 64);
}

}  // TEST_SUITE
