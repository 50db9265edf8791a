#pragma once

#include <Eigen/Core>
#include <vector>

#include "dictid/core.hpp"
#include "dictid/sparse_models.hpp"

namespace dictid {

/// Expected l1 sparse-coding cost of dictionary D against signals generated
/// from D0 under the model; closed form in H = D^{-1} D0.
double population_objective(const Dictionary& D, const Dictionary& D0, const SparsityModel& model);

/// (1/N) sum_i ||D^{-1} x_i||_1. For a complete dictionary the inner basis
/// pursuit solution is exactly D^{-1} x. The raw-matrix overload admits
/// off-manifold evaluation points (finite differences, line probes);
/// it requires full rank only.
double empirical_objective(const Eigen::MatrixXd& D, const SignalBatch& batch);
double empirical_objective(const Dictionary& D, const SignalBatch& batch);

/// Euclidean subgradient of the empirical objective,
///   G = -(1/N) sum_i W^T sgn(W x_i) (W x_i)^T,  W = D^{-1},
/// with the convention sgn(0) = 0.
Eigen::MatrixXd empirical_subgradient(const Eigen::MatrixXd& D, const SignalBatch& batch);

/// Per-column tangent projection on the unit-column manifold:
/// G'[,k] = G[,k] - (D[,k]^T G[,k]) D[,k].
Eigen::MatrixXd project_to_tangent(const Eigen::MatrixXd& D, const Eigen::MatrixXd& G);

struct DescentConfig {
  int max_iters = 5000;
  double step0 = 0.1;            // eta_t = step0 / sqrt(t)
  double stop_tol = 1e-8;        // relative objective change between iterates
  double singular_guard = 1e-8;  // abort when the smallest singular value dips below

  void validate() const;
};

struct DescentTrace {
  Eigen::MatrixXd final_D;               // best iterate by objective, unit columns
  double final_error = 0.0;              // dictionary distance of final_D to the reference
  std::vector<double> objective_history; // objective at every iterate, initial included
  int iterations = 0;
  bool converged = false;
  bool aborted_singular = false;

  Dictionary final_dictionary() const { return Dictionary(final_D); }
};

/// Projected subgradient descent on the oblique manifold with column
/// renormalization retraction and best-iterate tracking. final_error is the
/// sign-permutation-invariant distance of the best iterate to D0.
DescentTrace manifold_descent(const Dictionary& D_init, const SignalBatch& batch, const DescentConfig& cfg,
                              const Dictionary& D0);

}  // namespace dictid
