#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "dictid/identifiability.hpp"
#include "support/oracles.hpp"

using namespace dictid;

TEST_SUITE("identifiability") {

TEST_CASE("cumulative coherence") {
  const GramMatrix I = GramMatrix::identity(5);
  for (int k = 1; k <= 4; ++k) CHECK(cumulative_coherence(I, k) == 0.0);

  detail::Rng rng(3);
  const GramMatrix M = oracles::random_gram(6, 0.3, rng);
  double max_off = 0.0;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      if (i != j) max_off = std::max(max_off, std::abs(M(i, j)));
    }
  }
  CHECK(cumulative_coherence(M, 1) == doctest::Approx(max_off));

  // Nondecreasing in k.
  double prev = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const double v = cumulative_coherence(M, k);
    CHECK(v >= prev);
    prev = v;
  }

  // Constant-mu gram: top-k l2 norm is sqrt(k) mu.
  const GramMatrix C = gram(constant_mu_dictionary(8, 0.25));
  for (int k = 1; k <= 7; ++k) {
    CHECK(cumulative_coherence(C, k) == doctest::Approx(std::sqrt(static_cast<double>(k)) * 0.25).epsilon(1e-9));
  }
  CHECK_THROWS_AS(cumulative_coherence(M, 0), std::invalid_argument);
  CHECK_THROWS_AS(cumulative_coherence(M, 6), std::invalid_argument);
}

TEST_CASE("lower functional") {
  CHECK(lower_functional(GramMatrix::identity(5), 2.0) == 0.0);

  // Single collinear pair: the d = 1 prefix dominates and hb(K-1,1,a) = a/(K-1).
  for (int K : {4, 7}) {
    for (double a : {1.0, 2.0, 3.0}) {
      const GramMatrix M = minimal_mu_gram(K, 0.6);
      CHECK(lower_functional(M, a) == doctest::Approx(0.6 * (K - 1) / a).epsilon(1e-12));
    }
  }

  // Constant-mu: independent scan over prefix sizes.
  const GramMatrix C = gram(constant_mu_dictionary(10, 0.35));
  const double a = 3.0;
  double expect = 0.0;
  for (int d = 1; d <= 9; ++d) {
    expect = std::max(expect, d * 0.35 / hb(9, d, a));
  }
  CHECK(lower_functional(C, a) == doctest::Approx(expect).epsilon(1e-9));

  CHECK_THROWS_AS(lower_functional(C, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(lower_functional(C, 10.0), std::invalid_argument);
}

TEST_CASE("population verdict: orthogonal dictionaries") {
  const GramMatrix I = GramMatrix::identity(6);
  for (int s = 1; s <= 5; ++s) {
    const Verdict v = population_verdict(I, SGModel{s});
    CHECK(v.status == VerdictStatus::Identifiable);
    CHECK(v.lhs == doctest::Approx(0.0));
  }
  const Verdict vb = population_verdict(I, BGModel{0.9});
  CHECK(vb.status == VerdictStatus::Identifiable);
}

TEST_CASE("population verdict: the two-atom example") {
  const GramMatrix M = gram(constant_mu_dictionary(2, 0.7));
  const Verdict v = population_verdict(M, BGModel{0.2});
  CHECK(v.status == VerdictStatus::Identifiable);
  CHECK(v.lhs == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(v.rhs == doctest::Approx(0.8));
}

TEST_CASE("population verdict: non-sparse models never identify") {
  const GramMatrix M = gram(constant_mu_dictionary(5, 0.3));
  const Verdict v = population_verdict(M, SGModel{5});
  CHECK(v.status == VerdictStatus::NotIdentifiable);
  CHECK(v.condition == VerdictCondition::DegenerateNonSparse);
  const Verdict vb = population_verdict(M, BGModel{1.0});
  CHECK(vb.status == VerdictStatus::NotIdentifiable);
  CHECK(vb.condition == VerdictCondition::DegenerateNonSparse);
}

TEST_CASE("population verdict: 1-sparse always identifiable") {
  detail::Rng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    const GramMatrix M = oracles::random_gram(5, 0.5, rng);
    const Verdict v = population_verdict(M, SGModel{1});
    CHECK(v.status == VerdictStatus::Identifiable);
  }
}

TEST_CASE("population verdict: example with a failing condition") {
  // sqrt(8) * 0.5 = 2.83 > 1 - 7/9.
  const GramMatrix M = gram(constant_mu_dictionary(10, 0.5));
  const Verdict v = population_verdict(M, SGModel{8});
  CHECK(v.status == VerdictStatus::NotIdentifiable);
}

TEST_CASE("bounds method never contradicts the exact duals") {
  detail::Rng rng(11);
  int decisive = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const int K = 3 + static_cast<int>(rng.uniform_below(5));  // 3..7
    const GramMatrix M = oracles::random_gram(K, 0.15 + 0.5 * rng.uniform01(), rng);
    SparsityModel model;
    if (rep % 2 == 0) {
      model = SGModel{1 + static_cast<int>(rng.uniform_below(K - 1))};
    } else {
      model = BGModel{0.1 + 0.8 * rng.uniform01()};
    }
    const Verdict exact = population_verdict(M, model, VerdictMethod::ExactDual);
    const Verdict bounds = population_verdict(M, model, VerdictMethod::Bounds);
    if (bounds.status != VerdictStatus::Indeterminate) {
      ++decisive;
      CHECK(bounds.status == exact.status);
    }
  }
  CHECK(decisive > 0);
}

TEST_CASE("constant-mu phase boundaries: closed forms") {
  CHECK(phase_boundary_constant_mu_sg(10, 4) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(phase_boundary_constant_mu_sg(10, 1) == doctest::Approx(1.0));
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    CHECK(phase_boundary_constant_mu_bg(2, p) == doctest::Approx(1.0 - p).epsilon(1e-12));
  }
}

TEST_CASE("bisection boundary agrees with the closed forms") {
  SUBCASE("constant-mu family, SG") {
    const int K = 8;
    for (int s : {2, 3, 5}) {
      const auto family = [K](double mu) { return gram(constant_mu_dictionary(K, mu)); };
      const double mu_star = phase_boundary_general(family, SGModel{s}, 1e-6, 0.999);
      CHECK(mu_star == doctest::Approx(phase_boundary_constant_mu_sg(K, s)).epsilon(1e-5));
    }
  }
  SUBCASE("minimal family, SG") {
    const int K = 9;
    for (int s : {2, 4, 7}) {
      const auto family = [K](double mu) { return minimal_mu_gram(K, mu); };
      const double mu_star = phase_boundary_general(family, SGModel{s}, 1e-6, 0.999);
      CHECK(mu_star == doctest::Approx(1.0 - (s - 1.0) / (K - 1.0)).epsilon(1e-5));
    }
  }
  SUBCASE("minimal family, BG") {
    const int K = 7;
    for (double p : {0.25, 0.6}) {
      const auto family = [K](double mu) { return minimal_mu_gram(K, mu); };
      const double mu_star = phase_boundary_general(family, BGModel{p}, 1e-6, 0.999);
      CHECK(mu_star == doctest::Approx(1.0 - p).epsilon(1e-5));
    }
  }
  SUBCASE("no sign change is reported") {
    const auto family = [](double mu) { return gram(constant_mu_dictionary(6, mu)); };
    CHECK_THROWS_AS(phase_boundary_general(family, SGModel{2}, 1e-6, 1e-3), std::invalid_argument);
  }
}

TEST_CASE("max column dual grows with s") {
  detail::Rng rng(13);
  const GramMatrix M = oracles::random_gram(6, 0.4, rng);
  double prev = 0.0;
  for (int s = 1; s <= 5; ++s) {
    const double v = max_column_dual(M, SGModel{s});
    CHECK(v >= prev - 1e-8);
    prev = v;
  }
  CHECK(prev > max_column_dual(M, SGModel{1}) + 1e-6);
}

TEST_CASE("BG boundary sits below SG boundary at matched sparsity") {
  for (int K : {5, 10}) {
    for (int s = 1; s <= K - 1; ++s) {
      const double p = static_cast<double>(s) / K;
      CHECK(phase_boundary_constant_mu_bg(K, p) < phase_boundary_constant_mu_sg(K, s) + 1e-12);
    }
  }
}

TEST_CASE("conservative sqrt(K) coherence test implies the sufficient bound") {
  for (int K : {4, 8, 12, 16, 20}) {
    for (double p : {0.05, 0.1, 0.25, 0.5, 0.75, 0.9}) {
      for (double mu_frac : {0.1, 0.5, 0.9, 0.99}) {
        const double mu = mu_frac * (1.0 - p) / std::sqrt(static_cast<double>(K));
        if (mu >= 1.0 || mu <= 0.0) continue;
        // Premise of the conservative test.
        REQUIRE(std::sqrt(static_cast<double>(K)) * mu < 1.0 - p);
        const GramMatrix M = gram(constant_mu_dictionary(K, mu));
        const Verdict v = population_verdict(M, BGModel{p}, VerdictMethod::Bounds);
        CHECK(v.status == VerdictStatus::Identifiable);
        CHECK(v.condition == VerdictCondition::SufficientBound);
      }
    }
  }
}

TEST_CASE("directional derivatives") {
  SUBCASE("orthogonal gram: strictly positive on the + side") {
    const GramMatrix I = GramMatrix::identity(5);
    detail::Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::MatrixXd A(5, 5);
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) A(i, j) = rng.normal();
      }
      A = project_gram_tangent(I, A);
      CHECK(directional_derivative(I, SGModel{2}, A, DerivativeSide::Plus) > 0.0);
      CHECK(directional_derivative(I, BGModel{0.4}, A, DerivativeSide::Plus) > 0.0);
    }
  }
  SUBCASE("antisymmetry when the collinearity term vanishes") {
    const GramMatrix I = GramMatrix::identity(4);
    detail::Rng rng(19);
    Eigen::MatrixXd A(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) A(i, j) = rng.normal();
    }
    A = project_gram_tangent(I, A);
    const double plus = directional_derivative(I, SGModel{2}, A, DerivativeSide::Plus);
    const double minus = directional_derivative(I, SGModel{2}, A, DerivativeSide::Minus);
    CHECK(plus == doctest::Approx(-minus).epsilon(1e-12));
  }
  SUBCASE("signs agree with the verdict on sampled directions") {
    detail::Rng rng(23);
    int tested = 0;
    for (int rep = 0; rep < 12 && tested < 4; ++rep) {
      const int K = 4 + static_cast<int>(rng.uniform_below(3));
      const GramMatrix M = oracles::random_gram(K, 0.1 + 0.2 * rng.uniform01(), rng);
      const SparsityModel model = SGModel{1 + static_cast<int>(rng.uniform_below(K - 1))};
      const Verdict v = population_verdict(M, model);
      if (v.status != VerdictStatus::Identifiable || v.margin < 1e-3) continue;
      ++tested;
      for (int dir = 0; dir < 50; ++dir) {
        Eigen::MatrixXd A(K, K);
        for (int i = 0; i < K; ++i) {
          for (int j = 0; j < K; ++j) A(i, j) = rng.normal();
        }
        A = project_gram_tangent(M, A);
        CHECK(directional_derivative(M, model, A, DerivativeSide::Plus) > 0.0);
        CHECK(directional_derivative(M, model, A, DerivativeSide::Minus) < 0.0);
      }
    }
    CHECK(tested > 0);
  }
  SUBCASE("violating direction at a non-identifiable gram") {
    const GramMatrix M = gram(constant_mu_dictionary(6, 0.55));
    const SparsityModel model = SGModel{4};
    REQUIRE(population_verdict(M, model).status == VerdictStatus::NotIdentifiable);
    const Eigen::MatrixXd bad = violating_direction(M, model);
    CHECK(directional_derivative(M, model, bad, DerivativeSide::Minus) > 0.0);
  }
  SUBCASE("tangency violations are rejected") {
    const GramMatrix M = gram(constant_mu_dictionary(4, 0.3));
    Eigen::MatrixXd A = Eigen::MatrixXd::Ones(4, 4);
    CHECK_THROWS_AS(directional_derivative(M, SGModel{2}, A, DerivativeSide::Plus), std::invalid_argument);
    CHECK_THROWS_AS(
        directional_derivative(M, SGModel{2}, Eigen::MatrixXd::Zero(4, 4), DerivativeSide::Plus),
        std::invalid_argument);
  }
}

TEST_CASE("exact equality on the boundary reports Indeterminate") {
  // Constant-mu at the critical collinearity: the closed-form dual makes the
  // margin numerically zero, which must not be claimed as either side.
  const double mu_star = phase_boundary_constant_mu_sg(10, 4);
  const Verdict v = population_verdict(gram(constant_mu_dictionary(10, mu_star)), SGModel{4});
  CHECK(v.status == VerdictStatus::Indeterminate);
  CHECK(std::abs(v.margin) <= 1e-9);
}

TEST_CASE("exact-dual method enforces the size caps") {
  const GramMatrix M = gram(constant_mu_dictionary(20, 0.05));
  CHECK_THROWS_AS(max_column_dual(M, BGModel{0.2}), std::domain_error);
  // The verdict with bounds still works at this size.
  const Verdict v = population_verdict(M, BGModel{0.2}, VerdictMethod::Bounds);
  CHECK(v.status == VerdictStatus::Identifiable);
}

}  // TEST_SUITE
