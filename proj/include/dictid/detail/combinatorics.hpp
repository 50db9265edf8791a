#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dictid::detail {

// log(n!) with a small cache; n is assumed modest (norm orders, grid sizes).
inline double log_factorial(int n) {
  static thread_local std::vector<double> cache{0.0, 0.0};
  if (n < 0) throw std::invalid_argument("log_factorial: negative argument");
  while (static_cast<int>(cache.size()) <= n) {
    cache.push_back(cache.back() + std::log(static_cast<double>(cache.size())));
  }
  return cache[n];
}

inline double log_choose(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// Exact for the sizes used here (subset enumeration is capped well below the
// point where C(n,k) loses integer precision in a double).
inline double choose(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

// Binomial probability mass, evaluated in log space so that large n does not
// underflow the binomial coefficient times the power terms.
inline double pbinom(int k, int n, double p) {
  if (k < 0 || k > n) return 0.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  const double lg = log_choose(n, k) + k * std::log(p) + (n - k) * std::log1p(-p);
  return std::exp(lg);
}

// Visits every size-k subset of {0,...,m-1} in lexicographic order.
// Callback receives the index array.
template <typename F>
void for_each_subset(int m, int k, F&& f) {
  if (k < 0 || k > m) return;
  if (k == 0) return;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace dictid::detail
