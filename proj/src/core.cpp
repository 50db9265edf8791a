#include "dictid/core.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "dictid/detail/hungarian.hpp"

namespace dictid {

namespace {

constexpr double kUnitColumnTol = 1e-12;
constexpr double kRankRatioTol = 1e-10;
constexpr double kGramTol = 1e-10;

}  // namespace

Dictionary::Dictionary(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
    throw std::invalid_argument("Dictionary: expected a square K x K matrix with K >= 1");
  }
  for (int k = 0; k < entries_.cols(); ++k) {
    const double norm = entries_.col(k).norm();
    if (std::abs(norm - 1.0) > kUnitColumnTol) {
      throw std::invalid_argument("Dictionary: column " + std::to_string(k) +
                                  " is not unit norm (|norm-1| = " + std::to_string(std::abs(norm - 1.0)) + ")");
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(entries_);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= kRankRatioTol * sv(0)) {
    throw std::invalid_argument("Dictionary: rank deficient; atoms must be linearly independent");
  }
}

GramMatrix::GramMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  const int K = static_cast<int>(entries_.rows());
  if (entries_.cols() != K || K < 1) {
    throw std::invalid_argument("GramMatrix: expected a square K x K matrix with K >= 1");
  }
  if ((entries_ - entries_.transpose()).cwiseAbs().maxCoeff() > kGramTol) {
    throw std::invalid_argument("GramMatrix: not symmetric");
  }
  entries_ = ((entries_ + entries_.transpose()) / 2.0).eval();
  for (int i = 0; i < K; ++i) {
    if (std::abs(entries_(i, i) - 1.0) > kGramTol) {
      throw std::invalid_argument("GramMatrix: diagonal entry " + std::to_string(i) + " is not 1");
    }
    entries_(i, i) = 1.0;
    for (int j = 0; j < K; ++j) {
      if (i != j && std::abs(entries_(i, j)) >= 1.0) {
        throw std::invalid_argument("GramMatrix: off-diagonal magnitude at (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") reaches 1; atoms collinear");
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues()(0) < -kGramTol) {
    throw std::invalid_argument("GramMatrix: not positive semidefinite");
  }
}

GramMatrix GramMatrix::identity(int K) { return GramMatrix(Eigen::MatrixXd::Identity(K, K)); }

Eigen::VectorXd GramMatrix::column_without_diagonal(int j) const {
  const int K = size();
  if (j < 0 || j >= K) throw std::invalid_argument("GramMatrix: column index out of range");
  Eigen::VectorXd out(K - 1);
  int t = 0;
  for (int i = 0; i < K; ++i) {
    if (i != j) out(t++) = entries_(i, j);
  }
  return out;
}

void SignedPermutation::validate(int K) const {
  if (static_cast<int>(perm.size()) != K || static_cast<int>(signs.size()) != K) {
    throw std::invalid_argument("SignedPermutation: wrong length");
  }
  std::vector<char> seen(K, 0);
  for (int j = 0; j < K; ++j) {
    if (perm[j] < 0 || perm[j] >= K || seen[perm[j]]) {
      throw std::invalid_argument("SignedPermutation: perm is not a bijection");
    }
    seen[perm[j]] = 1;
    if (signs[j] != 1 && signs[j] != -1) {
      throw std::invalid_argument("SignedPermutation: signs must be +/-1");
    }
  }
}

GramMatrix gram(const Dictionary& D) {
  Eigen::MatrixXd M = D.entries().transpose() * D.entries();
  return GramMatrix(std::move(M));
}

Dictionary dictionary_from_gram(const GramMatrix& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M.entries());
  Eigen::VectorXd lambda = eig.eigenvalues();
  const int K = M.size();
  if (lambda(0) <= kRankRatioTol * lambda(K - 1)) {
    throw std::invalid_argument("dictionary_from_gram: gram is singular; no full-rank factor exists");
  }
  Eigen::MatrixXd D = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  for (int k = 0; k < K; ++k) D.col(k) /= D.col(k).norm();
  return Dictionary(std::move(D));
}

Dictionary constant_mu_dictionary(int K, double mu) {
  if (K < 1) throw std::invalid_argument("constant_mu_dictionary: K must be positive");
  if (K >= 2) {
    const double lo = -1.0 / (K - 1);
    if (!(mu > lo && mu < 1.0)) {
      throw std::invalid_argument("constant_mu_dictionary: mu must lie in (-1/(K-1), 1)");
    }
  }
  Eigen::MatrixXd M = Eigen::MatrixXd::Constant(K, K, mu);
  M.diagonal().setConstant(1.0);
  return dictionary_from_gram(GramMatrix(std::move(M)));
}

GramMatrix minimal_mu_gram(int K, double mu) {
  if (K < 2) throw std::invalid_argument("minimal_mu_gram: K must be at least 2");
  if (!(std::abs(mu) < 1.0)) throw std::invalid_argument("minimal_mu_gram: |mu| must be below 1");
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(K, K);
  M(0, 1) = mu;
  M(1, 0) = mu;
  return GramMatrix(std::move(M));
}

SignedPermutation align_dictionaries(const Dictionary& Da, const Dictionary& Db) {
  if (Da.size() != Db.size()) {
    throw std::invalid_argument("align_dictionaries: dimension mismatch");
  }
  const Eigen::MatrixXd corr = Da.entries().transpose() * Db.entries();
  // Assignment maximizing total |correlation| == minimizing its negation.
  const std::vector<int> match = detail::hungarian_min_assignment(-corr.cwiseAbs());
  SignedPermutation sp;
  sp.perm.resize(Da.size());
  sp.signs.resize(Da.size());
  for (int j = 0; j < Da.size(); ++j) {
    sp.perm[j] = match[j];
    sp.signs[j] = corr(j, match[j]) >= 0.0 ? 1 : -1;
  }
  return sp;
}

double dictionary_distance(const Dictionary& Da, const Dictionary& Db) {
  const SignedPermutation sp = align_dictionaries(Da, Db);
  double sq = 0.0;
  for (int j = 0; j < Da.size(); ++j) {
    sq += (Da.col(j) - sp.signs[j] * Db.col(sp.perm[j])).squaredNorm();
  }
  return std::sqrt(sq);
}

}  // namespace dictid
