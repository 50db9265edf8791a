#include "dictid/finite_sample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dictid {

namespace {

void validate_common(double eps, double N) {
  if (!(eps > 0.0 && eps <= 0.5)) throw std::invalid_argument("finite sample: eps must lie in (0, 1/2]");
  if (!(N >= 1.0)) throw std::invalid_argument("finite sample: N must be at least 1");
}

// exp with graceful saturation; the p3 prefactor can push the log far
// past the double range for small N.
double exp_clamped(double logv) {
  if (logv > 700.0) return std::numeric_limits<double>::infinity();
  return std::exp(logv);
}

struct MarginQuantities {
  double sufficient_lhs;  // compared against threshold - sqrt(pi/2) eps
  double necessary_lhs;   // compared against threshold + sqrt(pi/2) eps
  double threshold;
};

MarginQuantities margin_quantities(const GramMatrix& M0, const SparsityModel& model, VerdictMethod method) {
  const int K = M0.size();
  MarginQuantities q;
  const bool sg = std::holds_alternative<SGModel>(model);
  q.threshold = sg ? 1.0 - static_cast<double>(std::get<SGModel>(model).s - 1) / (K - 1)
                   : 1.0 - std::get<BGModel>(model).p;
  if (method == VerdictMethod::ExactDual) {
    const double dual = max_column_dual(M0, model);
    q.sufficient_lhs = dual;
    q.necessary_lhs = dual;
    return q;
  }
  if (sg) {
    const int s = std::get<SGModel>(model).s;
    q.sufficient_lhs = cumulative_coherence(M0, s);
    q.necessary_lhs = static_cast<double>(s) / (K - 1) * lower_functional(M0, static_cast<double>(s));
  } else {
    const double p = std::get<BGModel>(model).p;
    const int k = std::clamp(static_cast<int>(std::ceil(p * (K - 1) + 1.0)), 1, K - 1);
    q.sufficient_lhs = cumulative_coherence(M0, k);
    q.necessary_lhs = p * lower_functional(M0, p * (K - 1));
  }
  return q;
}

// Sum of the three failure terms with the model's effective dimensions.
double failure_terms(const GramMatrix& M0, const SparsityModel& model, double eps, double N) {
  const int K = M0.size();
  const double mu1 = cumulative_coherence(M0, 1);
  if (const auto* sg = std::get_if<SGModel>(&model)) {
    const double frac = static_cast<double>(sg->s) / K;
    return p1(eps, N, mu1, K) + p2(eps, N, frac, K) + p3(eps, N, frac, K);
  }
  const double p = std::get<BGModel>(model).p;
  const double Kp = K + 2.0 / p;
  return p1(eps, N, mu1, Kp) + p2(eps, N, p, Kp) + p3(eps, N, p, K);
}

}  // namespace

double p1(double eps, double N, double mu, double K) {
  validate_common(eps, N);
  if (mu < 0.0) throw std::invalid_argument("p1: mu must be nonnegative");
  if (K < 2.0) throw std::invalid_argument("p1: K must be at least 2");
  if (mu == 0.0) return 0.0;  // orthogonal columns: the term vanishes in the limit
  return 2.0 * exp_clamped(-N * eps * eps / (108.0 * K * mu));
}

double p2(double eps, double N, double p, double K) {
  validate_common(eps, N);
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p2: p must lie in (0, 1]");
  if (K < 2.0) throw std::invalid_argument("p2: K must be at least 2");
  const double denom = 18.0 * p * p * K + 9.0 * std::sqrt(2.0 * p * K);
  return 2.0 * exp_clamped(-p * N * eps * eps / denom);
}

double p3(double eps, double N, double p, int K) {
  validate_common(eps, N);
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p3: p must lie in (0, 1]");
  if (K < 2) throw std::invalid_argument("p3: K must be at least 2");
  const double logv = std::log(3.0) + K * std::log1p(24.0 / (eps * p)) - p * N * eps * eps / 360.0;
  return exp_clamped(logv);
}

std::string to_string(MarginSide s) {
  switch (s) {
    case MarginSide::SufficientHolds: return "SufficientHolds";
    case MarginSide::NecessaryHolds: return "NecessaryHolds";
    case MarginSide::NeitherMarginMet: return "NeitherMarginMet";
  }
  return "?";
}

FiniteSampleReport finite_sample_report(const GramMatrix& M0, const SparsityModel& model, double eps,
                                        std::int64_t N, VerdictMethod method) {
  const int K = M0.size();
  if (K < 2) throw std::invalid_argument("finite_sample_report: K must be at least 2");
  validate_model(model, K);
  validate_common(eps, static_cast<double>(N));
  if (is_non_sparse(model, K)) {
    throw std::invalid_argument("finite_sample_report: finite-sample bounds require s < K and p < 1");
  }

  FiniteSampleReport rep;
  rep.verdict = population_verdict(M0, model, method);
  rep.epsilon = eps;
  rep.N = N;

  const MarginQuantities q = margin_quantities(M0, model, method);
  const double slack = std::sqrt(std::numbers::pi / 2.0) * eps;

  double multiplier = 0.0;
  if (q.sufficient_lhs <= q.threshold - slack) {
    rep.side = MarginSide::SufficientHolds;
    multiplier = static_cast<double>(K) * K;
  } else if (q.necessary_lhs >= q.threshold + slack) {
    rep.side = MarginSide::NecessaryHolds;
    multiplier = static_cast<double>(K);
  } else {
    rep.side = MarginSide::NeitherMarginMet;
    return rep;
  }

  const double raw = 1.0 - multiplier * failure_terms(M0, model, eps, static_cast<double>(N));
  rep.bound_vacuous = !(raw > 0.0);
  rep.prob_lower_bound = std::clamp(raw, 0.0, 1.0);
  if (std::isnan(raw)) {
    rep.bound_vacuous = true;
    rep.prob_lower_bound = 0.0;
  }
  return rep;
}

std::int64_t required_samples(const GramMatrix& M0, const SparsityModel& model, double eps, double target_prob,
                              VerdictMethod method) {
  if (!(target_prob > 0.0 && target_prob < 1.0)) {
    throw std::invalid_argument("required_samples: target probability must lie in (0,1)");
  }
  const MarginQuantities q = margin_quantities(M0, model, method);
  const double slack = std::sqrt(std::numbers::pi / 2.0) * eps;
  if (!(q.sufficient_lhs <= q.threshold - slack)) {
    throw std::invalid_argument("required_samples: the sufficient margin does not hold at the population level");
  }

  const int K = M0.size();
  const double mult = static_cast<double>(K) * K;
  const auto prob_at = [&](double N) {
    return 1.0 - mult * failure_terms(M0, model, eps, N);
  };

  std::int64_t hi = 1;
  constexpr std::int64_t kCap = std::int64_t{1} << 60;
  while (prob_at(static_cast<double>(hi)) < target_prob) {
    if (hi >= kCap) throw std::runtime_error("required_samples: target probability unreachable");
    hi *= 2;
  }
  std::int64_t lo = hi / 2;  // prob(lo) < target or lo == 0
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (prob_at(static_cast<double>(mid)) >= target_prob) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace dictid
