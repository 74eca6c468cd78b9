#pragma once

// Sufficient statistics of one path:
//   U = int b/sigma^2 dX,   V = int b^2/sigma^2 ds,
// discretized with left-endpoint (Ito) sums on the path's own grid.

#include <cmath>
#include <cstdint>
#include <string>

#include "sde_remle/error.hpp"
#include "sde_remle/model.hpp"
#include "sde_remle/path_simulator.hpp"
#include "sde_remle/statistics.hpp"

namespace sde_remle {

inline constexpr double kSigma2Floor = 1e-12;

struct SuffStats {
  double u = 0.0;
  double v = 0.0;
  std::uint64_t subject_index = 0;
};

/// U = U1 * phi + U2 with U1 = int b^2/sigma^2 ds and U2 = int b/sigma dW.
/// U2 is the residual u - phi * u1, so the identity holds by construction.
struct SuffStatsDecomposition {
  double u1 = 0.0;
  double u2 = 0.0;
  double phi = 0.0;
};

namespace detail {

inline double checked_sigma2(const ModelSpec& model, double x, std::size_t k) {
  const double s = model.diffusion(x);
  const double s2 = s * s;
  if (!(s2 >= kSigma2Floor) || !std::isfinite(s2))
    throw DegenerateDiffusion("sigma^2 = " + std::to_string(s2) +
                              " below floor at grid point " + std::to_string(k));
  return s2;
}

}  // namespace detail

/// Statistics over grid points [first, last] of the path.
inline SuffStats compute_suff_stats(const Path& path, const ModelSpec& model,
                                    std::size_t first, std::size_t last) {
  if (path.times.size() != path.values.size() || path.times.size() < 2)
    throw InvalidArgument("path needs matching times/values of length >= 2");
  if (first > last || last >= path.times.size())
    throw InvalidArgument("grid range out of bounds");
  CompensatedSum u, v;
  for (std::size_t k = first; k < last; ++k) {
    const double x = path.values[k];
    const double b = model.drift(x);
    const double s2 = detail::checked_sigma2(model, x, k);
    const double step = path.times[k + 1] - path.times[k];
    u += b / s2 * (path.values[k + 1] - x);
    v += b * b / s2 * step;
  }
  return {u.value(), v.value(), path.subject_index};
}

inline SuffStats compute_suff_stats(const Path& path, const ModelSpec& model) {
  return compute_suff_stats(path, model, 0, path.times.size() - 1);
}

inline SuffStatsDecomposition decompose(const Path& path, const ModelSpec& model,
                                        const SuffStats& stats) {
  if (!path.phi)
    throw MissingPhi("path for subject " + std::to_string(path.subject_index) +
                     " has no known random effect (ingested data?)");
  CompensatedSum u1;
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    const double x = path.values[k];
    const double b = model.drift(x);
    u1 += b * b / detail::checked_sigma2(model, x, k) *
          (path.times[k + 1] - path.times[k]);
  }
  const double phi = *path.phi;
  return {u1.value(), stats.u - phi * u1.value(), phi};
}

}  // namespace sde_remle
