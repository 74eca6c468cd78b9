#pragma once

// Euler-Maruyama simulation of dX_i = phi_i b(X_i) dt + sigma(X_i) dW_i.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sde_remle/error.hpp"
#include "sde_remle/model.hpp"
#include "sde_remle/parallel.hpp"
#include "sde_remle/rng.hpp"

namespace sde_remle {

/// One discretized trajectory. `phi` is only known for simulated paths.
struct Path {
  std::vector<double> times;
  std::vector<double> values;
  double x0 = 0.0;
  std::optional<double> phi;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t subject_index = 0;
  std::uint64_t replicate_id = 0;

  double horizon() const { return times.back(); }
  std::size_t steps() const { return times.size() - 1; }
};

/// Uniform grid 0, dt, 2dt, ..., T. When T is not a multiple of dt (up to a
/// relative 1e-9) the last step is the shorter remainder.
inline std::vector<double> time_grid(double T, double dt) {
  if (!(T > 0.0) || !std::isfinite(T))
    throw InvalidArgument("horizon T must be positive and finite");
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw InvalidArgument("step dt must be positive and finite");
  const double ratio = T / dt;
  const double nearest = std::round(ratio);
  std::size_t steps;
  if (std::abs(ratio - nearest) <= 1e-9 * ratio && nearest >= 1.0)
    steps = static_cast<std::size_t>(nearest);
  else
    steps = static_cast<std::size_t>(std::ceil(ratio));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) times[k] = static_cast<double>(k) * dt;
  times[steps] = T;
  return times;
}

/// phi_i = mu + omega * Z_i, where Z_i is the first random-effect normal of
/// stream (seed, stream_id + i, replicate_id). Subject i of an ensemble thus
/// owns its draw no matter how many subjects are drawn.
inline std::vector<RandomEffect> draw_random_effects(const Theta& theta0,
                                                     std::size_t n,
                                                     const RngStream& rng) {
  require_variance(theta0);
  const double omega = std::sqrt(theta0.omega2);
  std::vector<RandomEffect> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream subject = rng;
    subject.stream_id = rng.stream_id + i;
    out[i].phi = theta0.omega2 == 0.0
                     ? theta0.mu
                     : theta0.mu + omega * subject.normal(Lane::random_effect, 0);
  }
  return out;
}

/// Euler-Maruyama driven by an arbitrary noise source: `noise(k)` must return
/// the standard normal Z_k of step k. Used directly by tests that need
/// forced or shared increments.
template <class Noise>
Path euler_maruyama_with(const ModelSpec& model, double phi, double x0,
                         double T, double dt, Noise&& noise,
                         std::uint64_t subject_index = 0) {
  Path path;
  path.times = time_grid(T, dt);
  path.values.resize(path.times.size());
  path.values[0] = x0;
  path.x0 = x0;
  path.phi = phi;
  path.dt = dt;
  path.subject_index = subject_index;

  double x = x0;
  for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
    const double step = path.times[k + 1] - path.times[k];
    const double s = model.diffusion(x);
    if (!(s > 0.0))
      throw DegenerateDiffusion("diffusion coefficient " + std::to_string(s) +
                                " <= 0 at step " + std::to_string(k) +
                                " (subject " + std::to_string(subject_index) +
                                ")");
    x = x + phi * model.drift(x) * step + s * std::sqrt(step) * noise(k);
    if (!std::isfinite(x)) throw SimulationDiverged(k, subject_index);
    path.values[k + 1] = x;
  }
  return path;
}

inline Path euler_maruyama(const ModelSpec& model, double phi, double x0,
                           double T, double dt, const RngStream& rng) {
  NormalSequence z(rng, Lane::brownian);
  Path path = euler_maruyama_with(
      model, phi, x0, T, dt, [&z](std::size_t) { return z.next(); },
      rng.stream_id);
  path.seed = rng.seed;
  path.replicate_id = rng.replicate_id;
  return path;
}

/// One path per design subject; subject i uses stream (design.seed, i,
/// replicate_id) for both its random effect and its Brownian increments.
inline std::vector<Path> simulate_ensemble(const ModelSpec& model,
                                           const Theta& theta0,
                                           const Design& design,
                                           std::uint64_t replicate_id,
                                           unsigned threads = 1) {
  design.validate();
  const RngStream base{design.seed, 0, replicate_id};
  const auto effects =
      draw_random_effects(theta0, design.subjects.size(), base);
  std::vector<Path> paths(design.subjects.size());
  parallel_for(paths.size(), threads, [&](std::size_t i) {
    const RngStream rng{design.seed, i, replicate_id};
    const auto& s = design.subjects[i];
    paths[i] = euler_maruyama(model, effects[i].phi, s.x0, s.T, design.dt, rng);
  });
  return paths;
}

}  // namespace sde_remle
