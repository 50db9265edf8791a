#pragma once

#include <cstdint>

#include "dictid/identifiability.hpp"

namespace dictid {

/// Failure-probability terms of the finite-sample identifiability bounds.
/// Raw formula values: they can exceed 1 (or overflow to infinity) for small
/// N, in which case the resulting probability bound is vacuous.
double p1(double eps, double N, double mu, double K);
double p2(double eps, double N, double p, double K);
double p3(double eps, double N, double p, int K);

enum class MarginSide { SufficientHolds, NecessaryHolds, NeitherMarginMet };

std::string to_string(MarginSide s);

/// Finite-sample identifiability statement at sample size N and slack eps:
/// which sqrt(pi/2)*eps margin the population quantity clears, and a lower
/// bound on the probability that the verdict holds for L_N.
struct FiniteSampleReport {
  Verdict verdict;                 // population verdict for reference
  double epsilon = 0.0;
  std::int64_t N = 0;
  MarginSide side = MarginSide::NeitherMarginMet;
  double prob_lower_bound = 0.0;   // clamped to [0, 1]; 0 when vacuous
  bool bound_vacuous = false;      // raw bound was <= 0
};

FiniteSampleReport finite_sample_report(const GramMatrix& M0, const SparsityModel& model, double eps,
                                        std::int64_t N, VerdictMethod method = VerdictMethod::ExactDual);

/// Smallest N whose sufficient-side probability bound reaches target_prob,
/// by doubling then bisection. Requires the sufficient margin to hold at the
/// population level.
std::int64_t required_samples(const GramMatrix& M0, const SparsityModel& model, double eps, double target_prob,
                              VerdictMethod method = VerdictMethod::ExactDual);

}  // namespace dictid
