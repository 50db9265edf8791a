#include "dictid/identifiability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dictid/detail/combinatorics.hpp"

namespace dictid {

namespace {

using detail::choose;
using detail::for_each_subset;
using detail::pbinom;

constexpr double kIndeterminateBand = 1e-9;
constexpr int kMaxDerivativeDim = 14;

double sg_threshold(int K, int s) { return 1.0 - static_cast<double>(s - 1) / (K - 1); }

std::vector<double> sorted_offdiag_magnitudes(const GramMatrix& M0, int j) {
  const int K = M0.size();
  std::vector<double> mags;
  mags.reserve(K - 1);
  for (int i = 0; i < K; ++i) {
    if (i != j) mags.push_back(std::abs(M0(i, j)));
  }
  std::sort(mags.begin(), mags.end(), std::greater<>());
  return mags;
}

}  // namespace

std::string to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Identifiable: return "Identifiable";
    case VerdictStatus::NotIdentifiable: return "NotIdentifiable";
    case VerdictStatus::Indeterminate: return "Indeterminate";
  }
  return "?";
}

std::string to_string(VerdictCondition c) {
  switch (c) {
    case VerdictCondition::ExactDual: return "ExactDual";
    case VerdictCondition::SufficientBound: return "SufficientBound";
    case VerdictCondition::NecessaryBound: return "NecessaryBound";
    case VerdictCondition::DegenerateNonSparse: return "DegenerateNonSparse";
  }
  return "?";
}

double cumulative_coherence(const GramMatrix& M0, int k) {
  const int K = M0.size();
  if (k < 1 || k > K - 1) throw std::invalid_argument("cumulative_coherence: k must lie in [1, K-1]");
  double out = 0.0;
  for (int j = 0; j < K; ++j) {
    const std::vector<double> mags = sorted_offdiag_magnitudes(M0, j);
    double sq = 0.0;
    for (int i = 0; i < k; ++i) sq += mags[i] * mags[i];
    out = std::max(out, std::sqrt(sq));
  }
  return out;
}

double lower_functional(const GramMatrix& M0, double a) {
  const int K = M0.size();
  if (!(a > 0.0 && a < static_cast<double>(K))) {
    throw std::invalid_argument("lower_functional: a must lie in (0, K)");
  }
  const int m = K - 1;
  const double a_clamped = std::min(a, static_cast<double>(m));
  double out = 0.0;
  for (int j = 0; j < K; ++j) {
    const std::vector<double> mags = sorted_offdiag_magnitudes(M0, j);
    double prefix = 0.0;
    for (int d = 1; d <= m; ++d) {
      prefix += mags[d - 1];
      const double denom = hb(m, d, a_clamped);
      if (denom > 0.0) out = std::max(out, prefix / denom);
    }
  }
  return out;
}

double max_column_dual(const GramMatrix& M0, const SparsityModel& model, double tol) {
  const int K = M0.size();
  validate_model(model, K);
  GroupNormParam param;
  if (const auto* sg = std::get_if<SGModel>(&model)) {
    param = SubsetParam{sg->s};
  } else {
    param = BernoulliParam{std::get<BGModel>(model).p};
  }
  double out = 0.0;
  for (int j = 0; j < K; ++j) {
    out = std::max(out, dual_norm_exact(M0.column_without_diagonal(j), param, tol).value);
  }
  return out;
}

Verdict population_verdict(const GramMatrix& M0, const SparsityModel& model, VerdictMethod method) {
  const int K = M0.size();
  if (K < 2) throw std::invalid_argument("population_verdict: K must be at least 2");
  validate_model(model, K);

  Verdict v;

  if (is_non_sparse(model, K)) {
    // Dense coefficients never admit local identifiability: a non-orthogonal
    // reference has a strict descent direction and an orthogonal one sits on
    // a flat of rotations. Margin reported in the order-(K-1) limit.
    double worst = 0.0;
    for (int j = 0; j < K; ++j) worst = std::max(worst, M0.column_without_diagonal(j).norm());
    v.status = VerdictStatus::NotIdentifiable;
    v.condition = VerdictCondition::DegenerateNonSparse;
    v.lhs = worst;
    v.rhs = 0.0;
    v.margin = -worst;
    return v;
  }

  const bool sg = std::holds_alternative<SGModel>(model);
  const double threshold = sg ? sg_threshold(K, std::get<SGModel>(model).s) : 1.0 - std::get<BGModel>(model).p;

  if (method == VerdictMethod::ExactDual) {
    GroupNormParam param;
    if (sg) {
      param = SubsetParam{std::get<SGModel>(model).s};
    } else {
      param = BernoulliParam{std::get<BGModel>(model).p};
    }
    double worst = 0.0;
    double worst_gap = 0.0;
    for (int j = 0; j < K; ++j) {
      const DualCertificate cert = dual_norm_exact(M0.column_without_diagonal(j), param, 1e-8);
      if (cert.value > worst) {
        worst = cert.value;
        worst_gap = cert.gap;
      }
    }
    v.condition = VerdictCondition::ExactDual;
    v.lhs = worst;
    v.rhs = threshold;
    v.margin = threshold - worst;
    // The equality boundary is unresolved; widen the band by the
    // certification gap so Indeterminate stays honest.
    if (std::abs(v.margin) <= kIndeterminateBand + worst_gap) {
      v.status = VerdictStatus::Indeterminate;
    } else {
      v.status = v.margin > 0.0 ? VerdictStatus::Identifiable : VerdictStatus::NotIdentifiable;
    }
    return v;
  }

  // Sandwich-bound method.
  int k_sufficient;
  double necessary_quantity;
  if (sg) {
    const int s = std::get<SGModel>(model).s;
    k_sufficient = s;
    necessary_quantity = static_cast<double>(s) / (K - 1) * lower_functional(M0, static_cast<double>(s));
  } else {
    const double p = std::get<BGModel>(model).p;
    k_sufficient = std::clamp(static_cast<int>(std::ceil(p * (K - 2) + 1.0)), 1, K - 1);
    necessary_quantity = p * lower_functional(M0, p * (K - 1));
  }
  const double sufficient_quantity = cumulative_coherence(M0, k_sufficient);

  if (sufficient_quantity < threshold) {
    v.status = VerdictStatus::Identifiable;
    v.condition = VerdictCondition::SufficientBound;
    v.lhs = sufficient_quantity;
  } else if (necessary_quantity > threshold) {
    v.status = VerdictStatus::NotIdentifiable;
    v.condition = VerdictCondition::NecessaryBound;
    v.lhs = necessary_quantity;
  } else {
    v.status = VerdictStatus::Indeterminate;
    v.condition = VerdictCondition::SufficientBound;
    v.lhs = sufficient_quantity;
  }
  v.rhs = threshold;
  v.margin = v.rhs - v.lhs;
  return v;
}

double phase_boundary_constant_mu_sg(int K, int s) {
  if (K < 2) throw std::invalid_argument("phase_boundary_constant_mu_sg: K must be at least 2");
  if (s < 1 || s > K - 1) throw std::invalid_argument("phase_boundary_constant_mu_sg: s must lie in [1, K-1]");
  return sg_threshold(K, s) / std::sqrt(static_cast<double>(s));
}

double phase_boundary_constant_mu_bg(int K, double p) {
  if (K < 2) throw std::invalid_argument("phase_boundary_constant_mu_bg: K must be at least 2");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("phase_boundary_constant_mu_bg: p must lie in (0,1)");
  double mix = 0.0;
  for (int k = 1; k <= K - 1; ++k) mix += pbinom(k, K - 1, p) * std::sqrt(static_cast<double>(k));
  return (1.0 - p) / (p * (K - 1)) * mix;
}

double phase_boundary_general(const std::function<GramMatrix(double)>& family, const SparsityModel& model,
                              double lo, double hi, VerdictMethod method, double tol) {
  if (!(hi > lo)) throw std::invalid_argument("phase_boundary_general: need lo < hi");
  const auto margin_at = [&](double t) { return population_verdict(family(t), model, method).margin; };
  double mlo = margin_at(lo);
  double mhi = margin_at(hi);
  if (mlo == 0.0) return lo;
  if (mhi == 0.0) return hi;
  if ((mlo > 0.0) == (mhi > 0.0)) {
    throw std::invalid_argument("phase_boundary_general: margin does not change sign over the bracket");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double mm = margin_at(mid);
    if (mm == 0.0) return mid;
    if ((mm > 0.0) == (mlo > 0.0)) {
      lo = mid;
      mlo = mm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Eigen::MatrixXd project_gram_tangent(const GramMatrix& M0, const Eigen::MatrixXd& A) {
  const int K = M0.size();
  if (A.rows() != K || A.cols() != K) throw std::invalid_argument("project_gram_tangent: shape mismatch");
  Eigen::MatrixXd out = A;
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd mk = M0.entries().col(k);
    out.col(k) -= (mk.dot(out.col(k)) / mk.squaredNorm()) * mk;
  }
  return out;
}

double directional_derivative(const GramMatrix& M0, const SparsityModel& model, const Eigen::MatrixXd& Adot,
                              DerivativeSide side) {
  const int K = M0.size();
  validate_model(model, K);
  if (Adot.rows() != K || Adot.cols() != K) {
    throw std::invalid_argument("directional_derivative: direction shape mismatch");
  }
  if (K > kMaxDerivativeDim) {
    throw std::domain_error("directional_derivative: K above the subset enumeration cap");
  }
  if (Adot.cwiseAbs().maxCoeff() == 0.0) {
    throw std::invalid_argument("directional_derivative: direction must be nonzero");
  }
  for (int k = 0; k < K; ++k) {
    if (std::abs(M0.entries().col(k).dot(Adot.col(k))) > 1e-8) {
      throw std::invalid_argument("directional_derivative: direction violates the tangent constraint");
    }
  }

  const double sgn = side == DerivativeSide::Plus ? 1.0 : -1.0;
  double total = 0.0;
  for (int j = 0; j < K; ++j) {
    double collinearity = 0.0;
    for (int i = 0; i < K; ++i) {
      if (i != j) collinearity += M0(i, j) * Adot(j, i);
    }

    // Row norms over subsets excluding j. Indices map to [K] \ {j}.
    std::vector<int> others;
    others.reserve(K - 1);
    for (int i = 0; i < K; ++i) {
      if (i != j) others.push_back(i);
    }

    double kink = 0.0;
    if (const auto* sg = std::get_if<SGModel>(&model)) {
      const int s = sg->s;
      if (s <= K - 1) {
        double sum = 0.0;
        for_each_subset(K - 1, s, [&](const std::vector<int>& idx) {
          double sq = 0.0;
          for (int t : idx) {
            const double v = Adot(j, others[t]);
            sq += v * v;
          }
          sum += std::sqrt(sq);
        });
        kink = sum / choose(K - 1, s - 1);
      }
    } else {
      const double p = std::get<BGModel>(model).p;
      if (p < 1.0) {
        // Size-(k+1) subsets weighted by p^k (1-p)^{K-1-k}.
        for (int k = 0; k <= K - 2; ++k) {
          double sum = 0.0;
          for_each_subset(K - 1, k + 1, [&](const std::vector<int>& idx) {
            double sq = 0.0;
            for (int t : idx) {
              const double v = Adot(j, others[t]);
              sq += v * v;
            }
            sum += std::sqrt(sq);
          });
          kink += std::pow(p, k) * std::pow(1.0 - p, K - 1 - k) * sum;
        }
      }
    }
    total += collinearity + sgn * kink;
  }
  return total;
}

Eigen::MatrixXd violating_direction(const GramMatrix& M0, const SparsityModel& model) {
  const int K = M0.size();
  validate_model(model, K);
  if (is_non_sparse(model, K)) {
    throw std::invalid_argument("violating_direction: non-sparse models have no dual witness form");
  }
  GroupNormParam param;
  if (const auto* sg = std::get_if<SGModel>(&model)) {
    param = SubsetParam{sg->s};
  } else {
    param = BernoulliParam{std::get<BGModel>(model).p};
  }

  int worst_j = 0;
  DualCertificate worst;
  worst.value = -1.0;
  for (int j = 0; j < K; ++j) {
    DualCertificate cert = dual_norm_exact(M0.column_without_diagonal(j), param, 1e-8);
    if (cert.value > worst.value) {
      worst = std::move(cert);
      worst_j = j;
    }
  }

  // Load the witness into row worst_j; the diagonal entries restore
  // tangency and do not enter the derivative.
  Eigen::VectorXd w = worst.primal_witness;
  const Eigen::VectorXd z = M0.column_without_diagonal(worst_j);
  if (z.dot(w) < 0.0) w = -w;

  Eigen::MatrixXd Adot = Eigen::MatrixXd::Zero(K, K);
  int t = 0;
  for (int i = 0; i < K; ++i) {
    if (i == worst_j) continue;
    Adot(worst_j, i) = w(t++);
  }
  for (int k = 0; k < K; ++k) {
    double dot = 0.0;
    for (int i = 0; i < K; ++i) {
      if (i != k) dot += M0(i, k) * Adot(i, k);
    }
    Adot(k, k) = -dot;
  }
  return Adot;
}

}  // namespace dictid
