#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace dictid {

/// A complete dictionary: K unit-norm columns spanning R^K.
///
/// Invariants checked at construction:
///  - every column has Euclidean norm 1 within 1e-12,
///  - full rank (smallest singular value > 1e-10 times the largest).
class Dictionary {
 public:
  explicit Dictionary(Eigen::MatrixXd entries);

  int size() const { return static_cast<int>(entries_.cols()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  const Eigen::VectorXd col(int k) const { return entries_.col(k); }

 private:
  Eigen::MatrixXd entries_;
};

/// Atom collinearity matrix M = D^T D of a dictionary with unit columns.
///
/// Invariants: symmetric, unit diagonal, off-diagonal magnitudes strictly
/// below 1, positive semidefinite within 1e-10.
class GramMatrix {
 public:
  explicit GramMatrix(Eigen::MatrixXd entries);

  static GramMatrix identity(int K);

  int size() const { return static_cast<int>(entries_.cols()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }

  /// Column j with its j-th entry removed, the vector entering every
  /// identifiability condition.
  Eigen::VectorXd column_without_diagonal(int j) const;

 private:
  Eigen::MatrixXd entries_;
};

/// Column permutation combined with per-column sign flips; the invariance
/// group of the l1 dictionary-learning objective.
struct SignedPermutation {
  std::vector<int> perm;      // column j of the image is sign[j] * source column perm[j]
  std::vector<int> signs;     // entries in {-1,+1}

  void validate(int K) const;
};

GramMatrix gram(const Dictionary& D);

/// Any unit-column factor D with D^T D = M, realized as the symmetric square
/// root of M. All identifiability conditions depend on M only, so the choice
/// of factor is immaterial.
Dictionary dictionary_from_gram(const GramMatrix& M);

/// Dictionary whose atoms all have pairwise inner product mu:
/// gram = mu * 11^T + (1 - mu) * I. Requires -1/(K-1) < mu < 1.
Dictionary constant_mu_dictionary(int K, double mu);

/// Gram with a single collinear atom pair: M[0,1] = M[1,0] = mu, all other
/// off-diagonal entries zero. Requires |mu| < 1.
GramMatrix minimal_mu_gram(int K, double mu);

/// Frobenius distance between dictionaries minimized over the
/// sign-permutation group, min_{P,L} ||Da - Db P L||_F. Solved exactly by
/// optimal assignment on column correlation magnitudes.
double dictionary_distance(const Dictionary& Da, const Dictionary& Db);

/// The optimal signed permutation realizing dictionary_distance.
SignedPermutation align_dictionaries(const Dictionary& Da, const Dictionary& Db);

}  // namespace dictid
