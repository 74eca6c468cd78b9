#pragma once

// Model vocabulary for dX = phi * b(X) dt + sigma(X) dW with phi ~ N(mu, omega2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sde_remle/error.hpp"

namespace sde_remle {

/// Drift factor b and diffusion coefficient sigma, plus the growth constants
/// they are known to satisfy:
///   b^2(x) <= K (1 + x^2),  sigma^2(x) <= K (1 + x^2),
///   b^2(x) / sigma^2(x) <= K (1 + |x|^tau).
struct ModelSpec {
  std::string name;
  std::function<double(double)> drift;
  std::function<double(double)> diffusion;
  double tau = 1.0;
  double growth_constant = 1.0;
};

struct Theta {
  double mu = 0.0;
  double omega2 = 0.0;

  friend bool operator==(const Theta&, const Theta&) = default;
};

/// Compact rectangle [mu_lo, mu_hi] x [omega2_lo, omega2_hi].
struct ParamSpace {
  double mu_lo = -10.0;
  double mu_hi = 10.0;
  double omega2_lo = 0.0;
  double omega2_hi = 10.0;

  void validate() const {
    if (!(std::isfinite(mu_lo) && std::isfinite(mu_hi) && mu_lo < mu_hi))
      throw InvalidArgument("parameter space needs finite mu_lo < mu_hi");
    if (!(std::isfinite(omega2_lo) && std::isfinite(omega2_hi) &&
          0.0 <= omega2_lo && omega2_lo < omega2_hi))
      throw InvalidArgument(
          "parameter space needs finite 0 <= omega2_lo < omega2_hi");
  }

  bool contains(const Theta& t) const noexcept {
    return mu_lo <= t.mu && t.mu <= mu_hi && omega2_lo <= t.omega2 &&
           t.omega2 <= omega2_hi;
  }

  bool interior(const Theta& t) const noexcept {
    return mu_lo < t.mu && t.mu < mu_hi && omega2_lo < t.omega2 &&
           t.omega2 < omega2_hi;
  }

  Theta project(Theta t) const noexcept {
    return {std::clamp(t.mu, mu_lo, mu_hi),
            std::clamp(t.omega2, omega2_lo, omega2_hi)};
  }
};

inline bool validate_theta(const Theta& theta, const ParamSpace& space) {
  return space.contains(theta);
}

inline void require_variance(const Theta& theta) {
  if (!(theta.omega2 >= 0.0) || !std::isfinite(theta.omega2) ||
      !std::isfinite(theta.mu))
    throw InvalidArgument("theta needs finite mu and omega2 >= 0");
}

struct RandomEffect {
  double phi = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Starting point and horizon of one subject.
struct Subject {
  double x0 = 0.0;
  double T = 1.0;
};

/// Experimental design: per-subject (x0, T), the Euler step and the seed.
/// `x_range` and `T_range` are the compact sets the design is declared to
/// live in.
struct Design {
  std::vector<Subject> subjects;
  double dt = 0.01;
  std::uint64_t seed = 0;
  Interval x_range;
  Interval T_range;

  static Design iid(std::size_t n, double x0, double T, double dt,
                    std::uint64_t seed) {
    Design d;
    d.subjects.assign(n, Subject{x0, T});
    d.dt = dt;
    d.seed = seed;
    d.x_range = {x0, x0};
    d.T_range = {T, T};
    return d;
  }

  /// Subject i (1-based) starts at x_inf + a/i and runs to T_inf + b/i.
  static Design converging(std::size_t n, double x_inf, double T_inf, double a,
                           double b, double dt, std::uint64_t seed) {
    Design d;
    d.subjects.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
      const double inv = 1.0 / static_cast<double>(i);
      d.subjects.push_back({x_inf + a * inv, T_inf + b * inv});
    }
    d.dt = dt;
    d.seed = seed;
    d.x_range = {std::min(x_inf, x_inf + a), std::max(x_inf, x_inf + a)};
    d.T_range = {std::min(T_inf, T_inf + b), std::max(T_inf, T_inf + b)};
    return d;
  }

  void validate() const {
    if (subjects.empty()) throw InvalidArgument("design has no subjects");
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw InvalidArgument("design step dt must be positive");
    double min_T = std::numeric_limits<double>::infinity();
    for (const auto& s : subjects) {
      if (!(s.T > 0.0) || !std::isfinite(s.T) || !std::isfinite(s.x0))
        throw InvalidArgument("design subjects need finite x0 and T > 0");
      if (!T_range.contains(s.T) || !x_range.contains(s.x0))
        throw InvalidArgument("design subject outside its declared compact set");
      min_T = std::min(min_T, s.T);
    }
    if (dt > min_T / 10.0)
      throw InvalidArgument("design step dt must be at most min T / 10");
  }
};

inline ModelSpec builtin_model(std::string_view name) {
  if (name == "unit")
    return {"unit", [](double) { return 1.0; }, [](double) { return 1.0; },
            1.0, 1.0};
  if (name == "linear-drift")
    return {"linear-drift", [](double x) { return x; },
            [](double) { return 1.0; }, 2.0, 1.0};
  if (name == "bounded-ratio")
    return {"bounded-ratio", [](double x) { return x; },
            [](double x) { return std::sqrt(1.0 + x * x); }, 1.0, 1.0};
  throw NotFound("unknown model '" + std::string(name) +
                 "' (expected unit, linear-drift or bounded-ratio)");
}

inline std::vector<std::string> builtin_model_names() {
  return {"unit", "linear-drift", "bounded-ratio"};
}

}  // namespace sde_remle
