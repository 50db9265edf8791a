#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace dictid {

/// Subset-average norm of order k on R^m:
///   |||w|||_k = sum_{|S|=k} ||w[S]||_2 / C(m-1, k-1),
/// the average l2 norm over all size-k coordinate subsets.
struct SubsetParam {
  int k;
};

/// Binomial mixture of the subset-average norms:
///   |||w|||_p = sum_{k=0}^{m-1} pbinom(k; m-1, p) |||w|||_{k+1}.
struct BernoulliParam {
  double p;
};

using GroupNormParam = std::variant<SubsetParam, BernoulliParam>;

double group_norm(const Eigen::VectorXd& w, const GroupNormParam& param);

/// |||w|||_k for every k in 1..m in one sweep.
std::vector<double> group_norm_all_orders(const Eigen::VectorXd& w);

/// E sqrt(L) where L counts ones when drawing k elements without replacement
/// from d ones and m-d zeros.
double hypergeom_sqrt_mean(int m, int d, int k);

/// Piecewise-linear interpolation of hypergeom_sqrt_mean in its draw-count
/// argument, extended to real a in [0, m] with value 0 at a = 0.
double hb(int m, int d, double a);

struct DualBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Sorted-prefix sandwich bounds on the dual norm |||z|||^*; cheap at any m.
DualBounds dual_norm_bounds(const Eigen::VectorXd& z, const GroupNormParam& param);

/// One group of the dual decomposition: the subset it covers and its vector.
struct DualGroup {
  std::vector<int> indices;
  Eigen::VectorXd y;
};

/// Certified two-sided evaluation of the dual norm.
///
/// primal_witness w satisfies |||w||| = 1 and z^T w >= value - gap;
/// dual_witness {y_S} satisfies the weighted scatter identity
/// sum_S gamma_S * scatter(y_S) = z with max_S ||y_S||_2 <= value + gap,
/// where gamma_S = 1/C(m-1,|S|-1) for the subset family and
/// gamma_S = p^{|S|-1} (1-p)^{m-|S|} for the Bernoulli family.
struct DualCertificate {
  double value = 0.0;
  Eigen::VectorXd primal_witness;
  std::vector<DualGroup> dual_witness;
  double gap = 0.0;

  /// Max-norm residual of the scatter identity; small by construction.
  double feasibility_residual(const Eigen::VectorXd& z, const GroupNormParam& param) const;
};

class DualSolveError : public std::runtime_error {
 public:
  DualSolveError(const std::string& what, double best_value_, double best_gap_)
      : std::runtime_error(what), best_value(best_value_), best_gap(best_gap_) {}
  double best_value;
  double best_gap;
};

/// Exact dual norm with a certified duality gap at most tol.
///
/// Enumerates the group structure, so m <= 16 for the subset family and
/// m <= 12 for the Bernoulli family; beyond that use dual_norm_bounds.
/// Closed-form cases (order 1, order m, 1-sparse z, constant-magnitude z)
/// return analytic certificates with zero gap; everything else is solved by
/// consensus splitting with per-group cone projections.
DualCertificate dual_norm_exact(const Eigen::VectorXd& z, const GroupNormParam& param, double tol = 1e-6);

/// Closed-form dual values where they exist: ||z||_inf at order 1, ||z||_2 at
/// order m, and the 1-sparse / constant-magnitude formulas. Empty otherwise.
std::optional<double> dual_norm_closed_form_edges(const Eigen::VectorXd& z, const GroupNormParam& param);

namespace limits {
inline constexpr int kMaxEnumerationDim = 22;     // direct norm evaluation
inline constexpr int kMaxExactSubsetDim = 16;     // exact dual, subset family
inline constexpr int kMaxExactBernoulliDim = 12;  // exact dual, Bernoulli family
inline constexpr int kDualIterationCap = 200000;
}  // namespace limits

}  // namespace dictid
