#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dictid/identifiability.hpp"
#include "dictid/objective.hpp"

namespace dictid {

enum class GramFamily { ConstantMu, MinimalMu, GramFile };
enum class ModelKind { SG, BG };
enum class EmpiricalStatus { Recovered, NotRecovered, Ambiguous };

std::string to_string(EmpiricalStatus s);

/// One Monte Carlo phase-diagram run: collinearity grid x sparsity grid,
/// `batches` descent runs per cell starting from the reference dictionary.
struct PhaseGridConfig {
  int K = 0;
  GramFamily family = GramFamily::ConstantMu;
  std::string gram_path;                // used when family == GramFile
  std::vector<double> mu_values;
  std::vector<double> sparsity_values;  // integers for SG, probabilities for BG
  ModelKind model_kind = ModelKind::SG;
  int N = 0;
  int batches = 0;
  std::uint64_t seed = 0;
  DescentConfig descent;
  double error_threshold_low = 1e-2;
  double error_threshold_high = 1e-1;
  double margin_band = 0.05;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

/// Flat key=value config text; lists are comma separated, '#' starts a
/// comment. Unknown or malformed keys are reported by name.
PhaseGridConfig parse_phase_config(std::istream& in);
PhaseGridConfig load_phase_config(const std::string& path);

struct PhaseCell {
  int mu_index = 0;
  int sparsity_index = 0;
  double mu = 0.0;
  double sparsity = 0.0;
  std::vector<double> batch_errors;
  std::vector<int> batch_iterations;
  std::vector<bool> batch_converged;
  double theory_margin = 0.0;
  VerdictStatus theory_status = VerdictStatus::Indeterminate;
  EmpiricalStatus empirical_status = EmpiricalStatus::Ambiguous;
};

std::vector<PhaseCell> run_phase_grid(const PhaseGridConfig& cfg);

/// Verdict/empirical agreement over cells whose margin magnitude clears the
/// band; Ambiguous cells never count as agreeing.
struct AgreementSummary {
  int cells_in_band = 0;
  int cells_agreeing = 0;
  double fraction() const { return cells_in_band == 0 ? 1.0 : static_cast<double>(cells_agreeing) / cells_in_band; }
};

AgreementSummary summarize_agreement(const std::vector<PhaseCell>& cells, double margin_band);

/// CSV with header mu,sparsity,batch,final_error,iterations,converged,
/// theory_margin,theory_status; one row per batch, 12 significant digits,
/// and a '#'-prefixed agreement footer. Bit-identical under a fixed seed.
void write_phase_csv(std::ostream& out, const PhaseGridConfig& cfg, const std::vector<PhaseCell>& cells);

/// Plain-text gram file: first token K, then K*K row-major entries.
GramMatrix read_gram_file(const std::string& path);
GramMatrix read_gram(std::istream& in);
void write_gram(std::ostream& out, const GramMatrix& M);

/// Gram for one grid point of the configured family.
GramMatrix family_gram(const PhaseGridConfig& cfg, double mu);

/// Theory verdict for a grid cell; exact duals when the size caps allow,
/// sandwich bounds otherwise.
Verdict cell_verdict(const GramMatrix& M0, ModelKind kind, double sparsity);

}  // namespace dictid
