#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

#include "dictid/core.hpp"
#include "dictid/group_norms.hpp"
#include "dictid/sparse_models.hpp"

namespace dictid {

enum class VerdictStatus { Identifiable, NotIdentifiable, Indeterminate };
enum class VerdictCondition { ExactDual, SufficientBound, NecessaryBound, DegenerateNonSparse };
enum class VerdictMethod { ExactDual, Bounds };

std::string to_string(VerdictStatus s);
std::string to_string(VerdictCondition c);

/// Outcome of a local-identifiability test: the quantity compared (lhs),
/// the sparsity threshold (rhs), and which condition fired.
struct Verdict {
  VerdictStatus status = VerdictStatus::Indeterminate;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs; positive margins mean identifiable under ExactDual
  VerdictCondition condition = VerdictCondition::ExactDual;
};

/// Largest l2 norm over any k off-diagonal entries within one column of M;
/// at k = 1 this is the plain mutual coherence.
double cumulative_coherence(const GramMatrix& M0, int k);

/// max_j max_{S not containing j} ||M0[S,j]||_1 / hb(K-1, |S|, a), evaluated
/// by a sorted-prefix scan per column. Domain a in (0, K).
double lower_functional(const GramMatrix& M0, double a);

/// max_j of the dual group norm of M0's j-th off-diagonal column; the left
/// side of the exact identifiability condition. Requires K-1 within the
/// exact-dual size caps.
double max_column_dual(const GramMatrix& M0, const SparsityModel& model, double tol = 1e-8);

/// Local identifiability of any dictionary with collinearity M0 under the
/// coefficient model, exactly (dual norms) or via the sandwich bounds.
Verdict population_verdict(const GramMatrix& M0, const SparsityModel& model,
                           VerdictMethod method = VerdictMethod::ExactDual);

/// Critical collinearity for constant inner-product dictionaries, closed
/// form. SG: (1 - (s-1)/(K-1)) / sqrt(s). BG: see the binomial mixture.
double phase_boundary_constant_mu_sg(int K, int s);
double phase_boundary_constant_mu_bg(int K, double p);

/// Bisection on the verdict margin of a parametric gram family; the caller
/// guarantees the margin is monotone over [lo, hi] and changes sign there.
double phase_boundary_general(const std::function<GramMatrix(double)>& family, const SparsityModel& model,
                              double lo, double hi, VerdictMethod method = VerdictMethod::ExactDual,
                              double tol = 1e-6);

/// One-sided derivative of the population objective along the tangent
/// direction Adot at the reference dictionary, scaled by sqrt(pi/2) K/s for
/// SG and sqrt(pi/2)/p for BG. Positive on the + side and negative on the -
/// side for every direction exactly when the dictionary is identifiable.
/// Requires tangency M0[,k]^T Adot[,k] = 0 within 1e-8 and K <= 14.
enum class DerivativeSide { Plus, Minus };
double directional_derivative(const GramMatrix& M0, const SparsityModel& model, const Eigen::MatrixXd& Adot,
                              DerivativeSide side);

/// Projects columns of A onto the tangent space at the dictionary class of
/// M0 (per column k: subtract the M0[,k] component).
Eigen::MatrixXd project_gram_tangent(const GramMatrix& M0, const Eigen::MatrixXd& A);

/// Tangent direction along which the one-sided derivative condition fails,
/// built from the dual certificate of the worst column. Only meaningful when
/// the verdict is NotIdentifiable with a strict margin.
Eigen::MatrixXd violating_direction(const GramMatrix& M0, const SparsityModel& model);

}  // namespace dictid
