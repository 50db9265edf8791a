#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <variant>

#include "dictid/core.hpp"

namespace dictid {

/// Exactly s nonzero coefficients on a uniformly random support, standard
/// normal values.
struct SGModel {
  int s;
};

/// Each coefficient independently zero with probability 1-p, standard normal
/// otherwise.
struct BGModel {
  double p;
};

using SparsityModel = std::variant<SGModel, BGModel>;

void validate_model(const SparsityModel& model, int K);

/// True for SG(K) and BG(1), where no coefficient sparsity remains.
bool is_non_sparse(const SparsityModel& model, int K);

/// n x K coefficient matrix, one draw per row. Deterministic in seed.
Eigen::MatrixXd sample_coefficients(int K, const SparsityModel& model, int n, std::uint64_t seed);

/// Noiseless signals x_i = D0 alpha_i, rows of `signals`.
class SignalBatch {
 public:
  SignalBatch(const Dictionary& D0, const SparsityModel& model, int n, std::uint64_t seed);

  /// Wraps externally produced signals (rows) without generating anything.
  static SignalBatch adopt(Eigen::MatrixXd signals, const SparsityModel& model, std::uint64_t seed = 0);

  const Eigen::MatrixXd& signals() const { return signals_; }
  const SparsityModel& model() const { return model_; }
  std::uint64_t seed() const { return seed_; }
  int count() const { return static_cast<int>(signals_.rows()); }
  int dimension() const { return static_cast<int>(signals_.cols()); }

 private:
  SignalBatch() = default;

  Eigen::MatrixXd signals_;
  SparsityModel model_ = SGModel{1};
  std::uint64_t seed_ = 0;
};

SignalBatch generate_signals(const Dictionary& D0, const SparsityModel& model, int n, std::uint64_t seed);

/// Substream seed for grid coordinates; distinct tuples give independent
/// reproducible streams.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace dictid
