#include "dictid/sparse_models.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

#include "dictid/detail/rng.hpp"

namespace dictid {

void validate_model(const SparsityModel& model, int K) {
  if (const auto* sg = std::get_if<SGModel>(&model)) {
    if (sg->s < 1 || sg->s > K) throw std::invalid_argument("SG model: s must lie in [1, K]");
  } else {
    const double p = std::get<BGModel>(model).p;
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("BG model: p must lie in (0, 1]");
  }
}

bool is_non_sparse(const SparsityModel& model, int K) {
  if (const auto* sg = std::get_if<SGModel>(&model)) return sg->s == K;
  return std::get<BGModel>(model).p == 1.0;
}

Eigen::MatrixXd sample_coefficients(int K, const SparsityModel& model, int n, std::uint64_t seed) {
  if (K < 1) throw std::invalid_argument("sample_coefficients: K must be positive");
  if (n < 1) throw std::invalid_argument("sample_coefficients: n must be positive");
  validate_model(model, K);

  detail::Rng rng(seed);
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(n, K);

  if (const auto* sg = std::get_if<SGModel>(&model)) {
    std::vector<int> pool(K);
    for (int i = 0; i < n; ++i) {
      // Partial Fisher-Yates: the first s pool entries are a uniform subset.
      std::iota(pool.begin(), pool.end(), 0);
      for (int j = 0; j < sg->s; ++j) {
        const int pick = j + static_cast<int>(rng.uniform_below(K - j));
        std::swap(pool[j], pool[pick]);
        alpha(i, pool[j]) = rng.normal();
      }
    }
  } else {
    const double p = std::get<BGModel>(model).p;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < K; ++j) {
        if (rng.uniform01() < p) alpha(i, j) = rng.normal();
      }
    }
  }
  return alpha;
}

SignalBatch::SignalBatch(const Dictionary& D0, const SparsityModel& model, int n, std::uint64_t seed)
    : model_(model), seed_(seed) {
  validate_model(model, D0.size());
  const Eigen::MatrixXd alpha = sample_coefficients(D0.size(), model, n, seed);
  signals_ = alpha * D0.entries().transpose();
}

SignalBatch SignalBatch::adopt(Eigen::MatrixXd signals, const SparsityModel& model, std::uint64_t seed) {
  if (signals.rows() < 1 || signals.cols() < 1) {
    throw std::invalid_argument("SignalBatch::adopt: empty signal matrix");
  }
  SignalBatch batch;
  batch.signals_ = std::move(signals);
  batch.model_ = model;
  batch.seed_ = seed;
  return batch;
}

SignalBatch generate_signals(const Dictionary& D0, const SparsityModel& model, int n, std::uint64_t seed) {
  return SignalBatch(D0, model, n, seed);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return detail::derive_seed(seed, {a, b, c});
}

}  // namespace dictid
