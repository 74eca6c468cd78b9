#pragma once

// Small statistical toolkit: compensated sums, order statistics,
// Kolmogorov-Smirnov tests and delete-one jackknife bookkeeping.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "sde_remle/error.hpp"

namespace sde_remle {

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  CompensatedSum& add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
    return *this;
  }
  CompensatedSum& operator+=(double x) noexcept { return add(x); }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Two-sided 95% standard-normal quantile.
inline constexpr double kZ975 = 1.959963984540054;

/// Linear-interpolation sample quantile (R type 7). Sorts a copy.
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) {
  return quantile(std::move(values), 0.5);
}

/// Complementary Kolmogorov distribution Q(lambda) = P(K > lambda).
inline double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Small-lambda series for the CDF converges fast here.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int j = 1; j <= 20; ++j) {
      const double odd = 2.0 * j - 1.0;
      cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    q += sign * term;
    if (term < 1e-300) break;
    sign = -sign;
  }
  return std::clamp(2.0 * q, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS test against N(0, 1) with Stephens' small-sample scaling.
inline KsResult ks_standard_normal(std::span<const double> sample) {
  if (sample.empty()) throw InvalidArgument("KS test of an empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f,
                  f - static_cast<double>(i) / n});
  }
  const double root = std::sqrt(n);
  return {d, kolmogorov_q((root + 0.12 + 0.11 / root) * d)};
}

inline KsResult ks_two_sample(std::span<const double> a,
                              std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("KS test of an empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx -
                             static_cast<double>(j) / ny));
  }
  const double ne = std::sqrt(nx * ny / (nx + ny));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

/// A statistic together with its delete-one replicates. Linear combinations
/// of jackknifed statistics over the same replicates are jackknifed by the
/// same combination of their delete-one values.
struct Jackknifed {
  double full = 0.0;
  std::vector<double> loo;

  double se() const {
    const std::size_t r = loo.size();
    if (r < 2) return 0.0;
    CompensatedSum s;
    for (double v : loo) s += v;
    const double mean = s.value() / static_cast<double>(r);
    CompensatedSum ss;
    for (double v : loo) ss += (v - mean) * (v - mean);
    return std::sqrt(ss.value() * (static_cast<double>(r) - 1.0) /
                     static_cast<double>(r));
  }

  friend Jackknifed operator-(const Jackknifed& a, const Jackknifed& b) {
    if (a.loo.size() != b.loo.size())
      throw std::logic_error("jackknife replicate counts differ");
    Jackknifed out{a.full - b.full, a.loo};
    for (std::size_t i = 0; i < out.loo.size(); ++i) out.loo[i] -= b.loo[i];
    return out;
  }
};

/// Sample mean with delete-one means.
inline Jackknifed jackknife_mean(std::span<const double> x) {
  const std::size_t r = x.size();
  if (r < 2) throw InvalidArgument("jackknife needs at least two replicates");
  CompensatedSum s;
  for (double v : x) s += v;
  const double total = s.value();
  Jackknifed out{total / static_cast<double>(r), std::vector<double>(r)};
  for (std::size_t i = 0; i < r; ++i)
    out.loo[i] = (total - x[i]) / static_cast<double>(r - 1);
  return out;
}

}  // namespace sde_remle
