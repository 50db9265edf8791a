#include "dictid/group_norms.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "dictid/detail/combinatorics.hpp"

namespace dictid {

namespace {

using detail::choose;
using detail::for_each_subset;
using detail::log_choose;
using detail::pbinom;

void validate_param(int m, const GroupNormParam& param) {
  if (m < 1) throw std::invalid_argument("group norm: dimension must be at least 1");
  if (const auto* s = std::get_if<SubsetParam>(&param)) {
    if (s->k < 1 || s->k > m) throw std::invalid_argument("group norm: order k out of [1, m]");
  } else {
    const double p = std::get<BernoulliParam>(param).p;
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("group norm: p must lie strictly inside (0,1)");
  }
}

// sum_{|S|=k} ||w[S]||_2 for every k, via a Gray-code sweep over all subsets
// with an incrementally maintained sum of squares.
std::vector<double> subset_norm_sums(const Eigen::VectorXd& w) {
  const int m = static_cast<int>(w.size());
  std::vector<double> sums(m + 1, 0.0);
  const std::uint64_t total = std::uint64_t{1} << m;
  double sumsq = 0.0;
  for (std::uint64_t i = 1; i < total; ++i) {
    const int bit = std::countr_zero(i);
    const std::uint64_t gray = i ^ (i >> 1);
    const double v2 = w(bit) * w(bit);
    if (gray & (std::uint64_t{1} << bit)) {
      sumsq += v2;
    } else {
      sumsq -= v2;
    }
    sums[std::popcount(gray)] += std::sqrt(std::max(0.0, sumsq));
  }
  return sums;
}

}  // namespace

std::vector<double> group_norm_all_orders(const Eigen::VectorXd& w) {
  const int m = static_cast<int>(w.size());
  if (m < 1) throw std::invalid_argument("group_norm_all_orders: empty vector");
  if (m > limits::kMaxEnumerationDim) {
    throw std::domain_error("group_norm_all_orders: dimension exceeds the subset enumeration cap");
  }
  const std::vector<double> sums = subset_norm_sums(w);
  std::vector<double> norms(m + 1, 0.0);
  for (int k = 1; k <= m; ++k) norms[k] = sums[k] / choose(m - 1, k - 1);
  return norms;
}

double group_norm(const Eigen::VectorXd& w, const GroupNormParam& param) {
  const int m = static_cast<int>(w.size());
  validate_param(m, param);
  if (m > limits::kMaxEnumerationDim) {
    throw std::domain_error("group_norm: dimension exceeds the subset enumeration cap");
  }
  if (const auto* s = std::get_if<SubsetParam>(&param)) {
    double sum = 0.0;
    for_each_subset(m, s->k, [&](const std::vector<int>& idx) {
      double sq = 0.0;
      for (int i : idx) sq += w(i) * w(i);
      sum += std::sqrt(sq);
    });
    return sum / choose(m - 1, s->k - 1);
  }
  const double p = std::get<BernoulliParam>(param).p;
  const std::vector<double> norms = group_norm_all_orders(w);
  double out = 0.0;
  for (int k = 0; k <= m - 1; ++k) out += pbinom(k, m - 1, p) * norms[k + 1];
  return out;
}

double hypergeom_sqrt_mean(int m, int d, int k) {
  if (m < 1 || d < 0 || d > m || k < 0 || k > m) {
    throw std::invalid_argument("hypergeom_sqrt_mean: need 0 <= d <= m and 0 <= k <= m");
  }
  if (d == 0 || k == 0) return 0.0;
  if (d == m) return std::sqrt(static_cast<double>(k));
  if (d == 1) return static_cast<double>(k) / m;
  if (k == 1) return static_cast<double>(d) / m;
  const int lo = std::max(1, k + d - m);
  const int hi = std::min(k, d);
  double out = 0.0;
  for (int l = lo; l <= hi; ++l) {
    const double lp = log_choose(d, l) + log_choose(m - d, k - l) - log_choose(m, k);
    out += std::exp(lp) * std::sqrt(static_cast<double>(l));
  }
  return out;
}

double hb(int m, int d, double a) {
  if (m < 1 || d < 0 || d > m) throw std::invalid_argument("hb: need 0 <= d <= m");
  if (!(a >= 0.0 && a <= static_cast<double>(m))) throw std::invalid_argument("hb: need 0 <= a <= m");
  if (a == 0.0) return 0.0;
  int k = static_cast<int>(std::ceil(a));
  k = std::clamp(k, 1, m);
  const double left = hypergeom_sqrt_mean(m, d, k - 1);
  const double right = hypergeom_sqrt_mean(m, d, k);
  return left + (right - left) * (a - (k - 1));
}

DualBounds dual_norm_bounds(const Eigen::VectorXd& z, const GroupNormParam& param) {
  const int m = static_cast<int>(z.size());
  validate_param(m, param);

  std::vector<double> abs(m);
  for (int i = 0; i < m; ++i) abs[i] = std::abs(z(i));
  std::sort(abs.begin(), abs.end(), std::greater<>());

  const bool is_subset = std::holds_alternative<SubsetParam>(param);
  const double a = is_subset ? static_cast<double>(std::get<SubsetParam>(param).k)
                             : std::get<BernoulliParam>(param).p * m;
  const double scale = is_subset ? static_cast<double>(std::get<SubsetParam>(param).k) / m
                                 : std::get<BernoulliParam>(param).p;

  // Prefix sets of the sorted magnitudes are optimal because the denominator
  // depends on |T| only.
  DualBounds out;
  double prefix = 0.0;
  for (int d = 1; d <= m; ++d) {
    prefix += abs[d - 1];
    const double denom = hb(m, d, a);
    if (denom > 0.0) out.lower = std::max(out.lower, scale * prefix / denom);
  }

  int top = is_subset ? std::get<SubsetParam>(param).k
                      : static_cast<int>(std::ceil(std::get<BernoulliParam>(param).p * (m - 1) + 1.0));
  top = std::clamp(top, 1, m);
  double sq = 0.0;
  for (int i = 0; i < top; ++i) sq += abs[i] * abs[i];
  out.upper = std::sqrt(sq);

  // lower <= upper holds exactly in real arithmetic; trim last-ulp noise
  // from the equality cases.
  out.lower = std::min(out.lower, out.upper);
  return out;
}

namespace {

// Flattened group structure of the dual program: subsets, scatter weights
// gamma_S, and per-coordinate group multiplicities.
struct GroupSystem {
  int m = 0;
  std::vector<int> offsets;  // G+1 entries into `indices`
  std::vector<int> indices;
  std::vector<double> gamma;
  std::vector<double> inv_count;  // 1 / #{S : S contains i}

  int groups() const { return static_cast<int>(gamma.size()); }
  int group_size(int g) const { return offsets[g + 1] - offsets[g]; }
};

GroupSystem build_system(int m, const GroupNormParam& param) {
  GroupSystem sys;
  sys.m = m;
  sys.offsets.push_back(0);
  if (const auto* s = std::get_if<SubsetParam>(&param)) {
    const double g = 1.0 / choose(m - 1, s->k - 1);
    for_each_subset(m, s->k, [&](const std::vector<int>& idx) {
      sys.indices.insert(sys.indices.end(), idx.begin(), idx.end());
      sys.offsets.push_back(static_cast<int>(sys.indices.size()));
      sys.gamma.push_back(g);
    });
    sys.inv_count.assign(m, 1.0 / choose(m - 1, s->k - 1));
  } else {
    const double p = std::get<BernoulliParam>(param).p;
    const std::uint64_t total = std::uint64_t{1} << m;
    for (std::uint64_t mask = 1; mask < total; ++mask) {
      const int size = std::popcount(mask);
      for (int i = 0; i < m; ++i) {
        if (mask & (std::uint64_t{1} << i)) sys.indices.push_back(i);
      }
      sys.offsets.push_back(static_cast<int>(sys.indices.size()));
      sys.gamma.push_back(std::pow(p, size - 1) * std::pow(1.0 - p, m - size));
    }
    sys.inv_count.assign(m, 1.0 / static_cast<double>(std::uint64_t{1} << (m - 1)));
  }
  return sys;
}

// sum_S gamma_S ||w[S]||_2 under the system's weights.
double system_norm(const GroupSystem& sys, const Eigen::VectorXd& w) {
  double out = 0.0;
  for (int g = 0; g < sys.groups(); ++g) {
    double sq = 0.0;
    for (int q = sys.offsets[g]; q < sys.offsets[g + 1]; ++q) {
      const double v = w(sys.indices[q]);
      sq += v * v;
    }
    out += sys.gamma[g] * std::sqrt(sq);
  }
  return out;
}

std::vector<DualGroup> witness_from_flat(const GroupSystem& sys, const std::vector<double>& v,
                                         bool divide_by_gamma) {
  std::vector<DualGroup> out(sys.groups());
  for (int g = 0; g < sys.groups(); ++g) {
    const int n = sys.group_size(g);
    out[g].indices.assign(sys.indices.begin() + sys.offsets[g], sys.indices.begin() + sys.offsets[g + 1]);
    out[g].y.resize(n);
    const double scale = divide_by_gamma ? 1.0 / sys.gamma[g] : 1.0;
    for (int q = 0; q < n; ++q) out[g].y(q) = scale * v[sys.offsets[g] + q];
  }
  return out;
}

// Analytic certificates for the closed-form cases; tight (zero gap).
// Detection is exact so the constructed witnesses hold to round-off.
std::optional<DualCertificate> closed_form_certificate(const Eigen::VectorXd& z, const GroupNormParam& param,
                                                       const GroupSystem& sys) {
  const int m = static_cast<int>(z.size());
  int nonzeros = 0;
  int top = 0;
  bool constant_magnitude = true;
  for (int i = 0; i < m; ++i) {
    if (z(i) != 0.0) ++nonzeros;
    if (std::abs(z(i)) > std::abs(z(top))) top = i;
    if (std::abs(z(i)) != std::abs(z(0))) constant_magnitude = false;
  }

  DualCertificate cert;
  cert.gap = 0.0;
  cert.primal_witness = Eigen::VectorXd::Zero(m);

  const auto* sp = std::get_if<SubsetParam>(&param);

  const auto passthrough_witness = [&]() {
    // y_S = z[S] is scatter-feasible for every family because the gamma
    // weights of the groups covering each coordinate sum to one.
    std::vector<double> flat(sys.indices.size());
    for (size_t q = 0; q < sys.indices.size(); ++q) flat[q] = z(sys.indices[q]);
    return witness_from_flat(sys, flat, false);
  };

  if (nonzeros <= 1) {
    cert.value = std::abs(z(top));
    cert.primal_witness(top) = z(top) >= 0.0 ? 1.0 : -1.0;
    cert.dual_witness = passthrough_witness();
    return cert;
  }

  if (sp && sp->k == m) {
    // Single group: the dual norm is the l2 norm.
    cert.value = z.norm();
    cert.primal_witness = z / cert.value;
    cert.dual_witness = passthrough_witness();
    return cert;
  }

  if (sp && sp->k == 1) {
    // Singleton groups force y_{i} = z_i; the dual norm is the sup norm.
    cert.value = std::abs(z(top));
    cert.primal_witness(top) = z(top) >= 0.0 ? 1.0 : -1.0;
    cert.dual_witness = passthrough_witness();
    return cert;
  }

  if (constant_magnitude && z(0) != 0.0) {
    const double mag = std::abs(z(0));
    if (sp) {
      cert.value = std::sqrt(static_cast<double>(sp->k)) * mag;
      const double coef = std::sqrt(static_cast<double>(sp->k)) / m;
      for (int i = 0; i < m; ++i) cert.primal_witness(i) = (z(i) >= 0.0 ? 1.0 : -1.0) * coef;
      cert.dual_witness = passthrough_witness();
      return cert;
    }
    const double p = std::get<BernoulliParam>(param).p;
    double mix = 0.0;  // sum_k pbinom(k; m, p) sqrt(k)
    for (int k = 1; k <= m; ++k) mix += pbinom(k, m, p) * std::sqrt(static_cast<double>(k));
    cert.value = m * p * mag / mix;
    const double wcoef = p / mix;
    for (int i = 0; i < m; ++i) cert.primal_witness(i) = (z(i) >= 0.0 ? 1.0 : -1.0) * wcoef;
    // Group vectors of constant norm equal to the dual value.
    std::vector<double> flat(sys.indices.size());
    for (int g = 0; g < sys.groups(); ++g) {
      const double coef = m * p * mag / (mix * std::sqrt(static_cast<double>(sys.group_size(g))));
      for (int q = sys.offsets[g]; q < sys.offsets[g + 1]; ++q) {
        flat[q] = (z(sys.indices[q]) >= 0.0 ? 1.0 : -1.0) * coef;
      }
    }
    cert.dual_witness = witness_from_flat(sys, flat, false);
    return cert;
  }

  return std::nullopt;
}

// Projection of (a, {b_g}) onto {(tau, w) : ||w_g||_2 <= gamma_g tau}.
// The profile in tau is convex with piecewise-linear increasing derivative;
// the minimizer comes from a breakpoint scan over beta_g / gamma_g.
double project_cone_tau(const GroupSystem& sys, double a, const std::vector<double>& beta,
                        std::vector<std::pair<double, int>>& scratch) {
  scratch.clear();
  double suf_c2 = 0.0, suf_cb = 0.0;
  for (int g = 0; g < sys.groups(); ++g) {
    if (beta[g] > 0.0) {
      scratch.emplace_back(beta[g] / sys.gamma[g], g);
      suf_c2 += sys.gamma[g] * sys.gamma[g];
      suf_cb += sys.gamma[g] * beta[g];
    }
  }
  std::sort(scratch.begin(), scratch.end());
  double lo = 0.0;
  for (size_t i = 0; i <= scratch.size(); ++i) {
    const double hi = i < scratch.size() ? scratch[i].first : std::numeric_limits<double>::infinity();
    const double tau = std::max(0.0, (a + suf_cb) / (1.0 + suf_c2));
    if (tau >= lo && tau <= hi) return tau;
    if (i < scratch.size()) {
      const int g = scratch[i].second;
      suf_c2 -= sys.gamma[g] * sys.gamma[g];
      suf_cb -= sys.gamma[g] * beta[g];
      lo = scratch[i].first;
    }
  }
  return std::max(0.0, a);
}

// Consensus splitting on the epigraph form of
//   minimize max_g ||v_g|| / gamma_g  subject to  sum_g scatter(v_g) = z.
// The affine block projects per coordinate, the cone block has the
// closed-form projection above. Any scatter-feasible v yields an upper
// certificate; the consensus multiplier, normalized to unit group norm,
// yields a lower certificate.
DualCertificate solve_dual_admm(const Eigen::VectorXd& z, const GroupNormParam& param, const GroupSystem& sys,
                                double tol) {
  const int m = sys.m;
  const int nnz = static_cast<int>(sys.indices.size());
  const int G = sys.groups();
  const DualBounds bounds = dual_norm_bounds(z, param);

  // Feasible start: split each coordinate evenly across its covering groups.
  std::vector<double> v(nnz), w(nnz), u(nnz, 0.0);
  for (int q = 0; q < nnz; ++q) v[q] = z(sys.indices[q]) * sys.inv_count[sys.indices[q]];
  w = v;

  const double value_scale = std::max(bounds.upper, 1e-12);
  double t = value_scale, tau = value_scale, ut = 0.0;
  double rho = 1.0 / value_scale;

  const auto upper_of = [&](const std::vector<double>& vv) {
    double out = 0.0;
    for (int g = 0; g < G; ++g) {
      double sq = 0.0;
      for (int q = sys.offsets[g]; q < sys.offsets[g + 1]; ++q) sq += vv[q] * vv[q];
      out = std::max(out, std::sqrt(sq) / sys.gamma[g]);
    }
    return out;
  };

  std::vector<double> best_v = v;
  double best_upper = upper_of(v);

  // Seed the lower certificate with the best prefix sign vector; the solver
  // only ever improves on it.
  double best_lower = 0.0;
  Eigen::VectorXd best_witness = Eigen::VectorXd::Zero(m);
  {
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(z(a)) > std::abs(z(b)); });
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(m);
    for (int d = 1; d <= m; ++d) {
      dir(order[d - 1]) = z(order[d - 1]) >= 0.0 ? 1.0 : -1.0;
      const double nn = system_norm(sys, dir);
      const double val = std::abs(z.dot(dir)) / nn;
      if (val > best_lower) {
        best_lower = val;
        best_witness = dir / nn;
      }
    }
  }

  const double res_tol = (tol / 10.0) * std::max(1.0, z.cwiseAbs().maxCoeff());
  const double relax = 1.6;

  std::vector<double> beta(G), coord(m), b_hat(nnz), w_prev(nnz);
  std::vector<std::pair<double, int>> scratch;
  Eigen::VectorXd witness(m);

  bool certified = false;
  for (int iter = 1; iter <= limits::kDualIterationCap && !certified; ++iter) {
    // Objective block: gradient step in t, coordinatewise mean shift onto the
    // scatter constraint in v.
    t = tau - ut - 1.0 / rho;
    std::fill(coord.begin(), coord.end(), 0.0);
    for (int q = 0; q < nnz; ++q) {
      v[q] = w[q] - u[q];
      coord[sys.indices[q]] += v[q];
    }
    for (int i = 0; i < m; ++i) coord[i] = (z(i) - coord[i]) * sys.inv_count[i];
    for (int q = 0; q < nnz; ++q) v[q] += coord[sys.indices[q]];

    // Cone block on the over-relaxed point.
    const double t_hat = relax * t + (1.0 - relax) * tau;
    const double a_hat = t_hat + ut;
    for (int q = 0; q < nnz; ++q) b_hat[q] = relax * v[q] + (1.0 - relax) * w[q] + u[q];
    for (int g = 0; g < G; ++g) {
      double sq = 0.0;
      for (int q = sys.offsets[g]; q < sys.offsets[g + 1]; ++q) sq += b_hat[q] * b_hat[q];
      beta[g] = std::sqrt(sq);
    }
    w_prev = w;
    const double tau_prev = tau;
    tau = project_cone_tau(sys, a_hat, beta, scratch);
    for (int g = 0; g < G; ++g) {
      const double cap = sys.gamma[g] * tau;
      const double scale = (beta[g] > cap && beta[g] > 0.0) ? cap / beta[g] : 1.0;
      for (int q = sys.offsets[g]; q < sys.offsets[g + 1]; ++q) w[q] = b_hat[q] * scale;
    }

    ut += t_hat - tau;
    double pri_sq = (t - tau) * (t - tau);
    double dua_sq = (tau - tau_prev) * (tau - tau_prev);
    for (int q = 0; q < nnz; ++q) {
      u[q] = b_hat[q] - w[q];
      const double pr = v[q] - w[q];
      pri_sq += pr * pr;
      const double dr = w[q] - w_prev[q];
      dua_sq += dr * dr;
    }
    const double pri = std::sqrt(pri_sq);
    const double dua = rho * std::sqrt(dua_sq);

    if (iter % 10 == 0 || (pri < res_tol && dua < res_tol)) {
      const double upper = upper_of(v);
      if (upper < best_upper) {
        best_upper = upper;
        best_v = v;
      }
      witness.setZero();
      for (int q = 0; q < nnz; ++q) witness(sys.indices[q]) += u[q];
      for (int i = 0; i < m; ++i) witness(i) *= -rho * sys.inv_count[i];
      const double wn = system_norm(sys, witness);
      if (wn > 0.0) {
        const double val = std::abs(z.dot(witness)) / wn;
        if (val > best_lower) {
          best_lower = val;
          best_witness = (z.dot(witness) >= 0.0 ? 1.0 : -1.0) * witness / wn;
        }
      }
      certified = best_upper - best_lower <= tol && pri < res_tol && dua < res_tol;
    }

    if (iter % 100 == 0 && !certified) {
      // Residual balancing; scaled duals shrink when rho grows.
      if (pri > 10.0 * dua) {
        rho *= 2.0;
        ut /= 2.0;
        for (double& x : u) x /= 2.0;
      } else if (dua > 10.0 * pri) {
        rho /= 2.0;
        ut *= 2.0;
        for (double& x : u) x *= 2.0;
      }
    }
  }

  const double gap = best_upper - best_lower;
  if (!certified && !(gap <= tol)) {
    throw DualSolveError("dual_norm_exact: consensus solver failed to certify the requested gap",
                         0.5 * (best_lower + best_upper), gap);
  }

  DualCertificate cert;
  cert.gap = gap;
  cert.value = std::clamp(0.5 * (best_lower + best_upper), std::max(best_lower, bounds.lower),
                          std::min(best_upper, bounds.upper));
  cert.primal_witness = best_witness;
  const double wn = system_norm(sys, cert.primal_witness);
  if (wn > 0.0) cert.primal_witness /= wn;
  cert.dual_witness = witness_from_flat(sys, best_v, true);
  return cert;
}

}  // namespace

double DualCertificate::feasibility_residual(const Eigen::VectorXd& z, const GroupNormParam& param) const {
  const int m = static_cast<int>(z.size());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
  for (const DualGroup& grp : dual_witness) {
    const int size = static_cast<int>(grp.indices.size());
    double gamma;
    if (const auto* s = std::get_if<SubsetParam>(&param)) {
      gamma = 1.0 / choose(m - 1, s->k - 1);
    } else {
      const double p = std::get<BernoulliParam>(param).p;
      gamma = std::pow(p, size - 1) * std::pow(1.0 - p, m - size);
    }
    for (int q = 0; q < size; ++q) acc(grp.indices[q]) += gamma * grp.y(q);
  }
  return (acc - z).cwiseAbs().maxCoeff();
}

DualCertificate dual_norm_exact(const Eigen::VectorXd& z, const GroupNormParam& param, double tol) {
  const int m = static_cast<int>(z.size());
  validate_param(m, param);
  if (!(tol > 0.0)) throw std::invalid_argument("dual_norm_exact: tol must be positive");
  if (std::holds_alternative<SubsetParam>(param) && m > limits::kMaxExactSubsetDim) {
    throw std::domain_error("dual_norm_exact: dimension above the subset cap; use dual_norm_bounds");
  }
  if (std::holds_alternative<BernoulliParam>(param) && m > limits::kMaxExactBernoulliDim) {
    throw std::domain_error("dual_norm_exact: dimension above the Bernoulli cap; use dual_norm_bounds");
  }

  const GroupSystem sys = build_system(m, param);
  if (auto cert = closed_form_certificate(z, param, sys)) return *cert;
  return solve_dual_admm(z, param, sys, tol);
}

std::optional<double> dual_norm_closed_form_edges(const Eigen::VectorXd& z, const GroupNormParam& param) {
  const int m = static_cast<int>(z.size());
  validate_param(m, param);

  int nonzeros = 0;
  bool constant_magnitude = true;
  for (int i = 0; i < m; ++i) {
    if (z(i) != 0.0) ++nonzeros;
    if (std::abs(z(i)) != std::abs(z(0))) constant_magnitude = false;
  }
  const double sup = z.cwiseAbs().maxCoeff();

  if (const auto* s = std::get_if<SubsetParam>(&param)) {
    if (s->k == 1) return sup;
    if (s->k == m) return z.norm();
    if (nonzeros <= 1) return sup;
    if (constant_magnitude) return std::sqrt(static_cast<double>(s->k)) * sup;
    return std::nullopt;
  }
  if (nonzeros <= 1) return sup;
  if (constant_magnitude) {
    const double p = std::get<BernoulliParam>(param).p;
    double mix = 0.0;
    for (int k = 1; k <= m; ++k) mix += pbinom(k, m, p) * std::sqrt(static_cast<double>(k));
    return m * p * sup / mix;
  }
  return std::nullopt;
}

}  // namespace dictid
