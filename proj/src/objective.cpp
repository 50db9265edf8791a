#include "dictid/objective.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dictid/group_norms.hpp"

namespace dictid {

namespace {

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& D) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
  if (!lu.isInvertible()) throw std::invalid_argument("objective: dictionary matrix is singular");
  return lu.inverse();
}

Eigen::MatrixXd signum(const Eigen::MatrixXd& U) {
  return U.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

}  // namespace

double population_objective(const Dictionary& D, const Dictionary& D0, const SparsityModel& model) {
  const int K = D.size();
  if (K != D0.size()) throw std::invalid_argument("population_objective: dimension mismatch");
  validate_model(model, K);

  const Eigen::MatrixXd H = checked_inverse(D.entries()) * D0.entries();
  const double c = std::sqrt(2.0 / std::numbers::pi);

  if (is_non_sparse(model, K)) {
    double sum = 0.0;
    for (int j = 0; j < K; ++j) sum += H.row(j).norm();
    return c * sum;
  }
  if (const auto* sg = std::get_if<SGModel>(&model)) {
    double sum = 0.0;
    for (int j = 0; j < K; ++j) sum += group_norm(H.row(j).transpose(), SubsetParam{sg->s});
    return c * static_cast<double>(sg->s) / K * sum;
  }
  const double p = std::get<BGModel>(model).p;
  double sum = 0.0;
  for (int j = 0; j < K; ++j) sum += group_norm(H.row(j).transpose(), BernoulliParam{p});
  return c * p * sum;
}

double empirical_objective(const Eigen::MatrixXd& D, const SignalBatch& batch) {
  if (D.rows() != batch.dimension() || D.cols() != batch.dimension()) {
    throw std::invalid_argument("empirical_objective: dimension mismatch");
  }
  const Eigen::MatrixXd W = checked_inverse(D);
  // Rows of `signals` are x_i^T, so (X W^T)(i,:) = (W x_i)^T.
  return (batch.signals() * W.transpose()).cwiseAbs().sum() / batch.count();
}

double empirical_objective(const Dictionary& D, const SignalBatch& batch) {
  return empirical_objective(D.entries(), batch);
}

Eigen::MatrixXd empirical_subgradient(const Eigen::MatrixXd& D, const SignalBatch& batch) {
  if (D.rows() != batch.dimension() || D.cols() != batch.dimension()) {
    throw std::invalid_argument("empirical_subgradient: dimension mismatch");
  }
  const Eigen::MatrixXd W = checked_inverse(D);
  const Eigen::MatrixXd U = W * batch.signals().transpose();  // K x N, columns W x_i
  return -(W.transpose() * signum(U) * U.transpose()) / batch.count();
}

Eigen::MatrixXd project_to_tangent(const Eigen::MatrixXd& D, const Eigen::MatrixXd& G) {
  Eigen::MatrixXd out = G;
  for (int k = 0; k < D.cols(); ++k) {
    out.col(k) -= D.col(k).dot(G.col(k)) * D.col(k);
  }
  return out;
}

void DescentConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("DescentConfig: max_iters must be positive");
  if (!(step0 >= 0.0)) throw std::invalid_argument("DescentConfig: step0 must be nonnegative");
  if (!(stop_tol > 0.0)) throw std::invalid_argument("DescentConfig: stop_tol must be positive");
  if (!(singular_guard > 0.0)) throw std::invalid_argument("DescentConfig: singular_guard must be positive");
}

DescentTrace manifold_descent(const Dictionary& D_init, const SignalBatch& batch, const DescentConfig& cfg,
                              const Dictionary& D0) {
  cfg.validate();
  const int K = D_init.size();
  if (K != batch.dimension() || K != D0.size()) {
    throw std::invalid_argument("manifold_descent: dimension mismatch");
  }

  const Eigen::MatrixXd Xt = batch.signals().transpose();  // K x N
  const int N = batch.count();

  DescentTrace trace;
  Eigen::MatrixXd D = D_init.entries();
  Eigen::MatrixXd best = D;
  double best_obj = std::numeric_limits<double>::infinity();

  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::MatrixXd W, U, G;

  for (int t = 0; ; ++t) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(D);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) < cfg.singular_guard) {
      trace.aborted_singular = true;
      break;
    }

    lu.compute(D);
    W = lu.inverse();
    U = W * Xt;
    const double obj = U.cwiseAbs().sum() / N;
    trace.objective_history.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best = D;
    }
    trace.iterations = t;

    if (t >= 1) {
      const double prev = trace.objective_history[t - 1];
      if (std::abs(obj - prev) < cfg.stop_tol * std::max(1.0, std::abs(prev))) {
        trace.converged = true;
        break;
      }
    }
    if (t >= cfg.max_iters) break;

    G = -(W.transpose() * signum(U) * U.transpose()) / N;
    G = project_to_tangent(D, G);
    const double eta = cfg.step0 / std::sqrt(static_cast<double>(t + 1));
    D -= eta * G;
    for (int k = 0; k < K; ++k) D.col(k) /= D.col(k).norm();
  }

  trace.final_D = best;
  trace.final_error = dictionary_distance(Dictionary(best), D0);
  return trace;
}

}  // namespace dictid
