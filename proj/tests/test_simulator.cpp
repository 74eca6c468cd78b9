#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "sde_remle/path_simulator.hpp"
#include "sde_remle/rng.hpp"
#include "sde_remle/statistics.hpp"
#include "sde_remle/suff_stats.hpp"

using namespace sde_remle;

// Known-answer vectors for Philox4x32-10 published with Random123.
TEST(Philox, KnownAnswers) {
  using P = Philox4x32;
  EXPECT_EQ(P::block({0, 0, 0, 0}, {0, 0}),
            (P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(P::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                     {0xffffffffu, 0xffffffffu}),
            (P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(P::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                     {0xa4093822u, 0x299f31d0u}),
            (P::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStream, SameTripleSameNumbers) {
  const RngStream a{42, 7, 3}, b{42, 7, 3};
  for (std::uint64_t i = 0; i < 100; ++i)
    EXPECT_EQ(a.normal(Lane::brownian, i), b.normal(Lane::brownian, i));
}

TEST(RngStream, SequentialReaderMatchesRandomAccess) {
  const RngStream s{1, 2, 3};
  NormalSequence seq(s, Lane::brownian);
  for (std::uint64_t i = 0; i < 51; ++i) EXPECT_EQ(seq.next(), s.normal(Lane::brownian, i));
}

TEST(RngStream, DistinctTriplesAndLanesDiffer) {
  std::set<double> firsts;
  for (std::uint64_t seed = 0; seed < 4; ++seed)
    for (std::uint64_t stream = 0; stream < 4; ++stream)
      for (std::uint64_t rep = 0; rep < 4; ++rep) {
        const RngStream s{seed, stream, rep};
        firsts.insert(s.normal(Lane::brownian, 0));
        firsts.insert(s.normal(Lane::random_effect, 0));
      }
  EXPECT_EQ(firsts.size(), 128u);
}

TEST(RngStream, NormalsLookStandard) {
  const RngStream s{9, 0, 0};
  std::vector<double> z(20000);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = s.normal(Lane::brownian, i);
  EXPECT_GT(ks_standard_normal(z).p_value, 0.01);
}

TEST(TimeGrid, ExactMultiple) {
  const auto t = time_grid(1.0, 0.1);
  ASSERT_EQ(t.size(), 11u);
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_EQ(t.back(), 1.0);
}

TEST(TimeGrid, ShortLastStep) {
  const auto t = time_grid(1.05, 0.1);
  ASSERT_EQ(t.size(), 12u);
  EXPECT_DOUBLE_EQ(t[10], 1.0);
  EXPECT_EQ(t.back(), 1.05);
  EXPECT_NEAR(t[11] - t[10], 0.05, 1e-12);
}

TEST(RandomEffects, ZeroVarianceIsConstant) {
  const auto fx = draw_random_effects({1.7, 0.0}, 50, {3, 0, 0});
  for (const auto& e : fx) EXPECT_EQ(e.phi, 1.7);
}

TEST(RandomEffects, MomentsMatchLaw) {
  const auto fx = draw_random_effects({0.0, 1.0}, 100000, {123, 0, 0});
  CompensatedSum s, ss;
  for (const auto& e : fx) s += e.phi;
  const double mean = s.value() / fx.size();
  for (const auto& e : fx) ss += (e.phi - mean) * (e.phi - mean);
  const double var = ss.value() / (fx.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_GE(var, 0.97);
  EXPECT_LE(var, 1.03);
}

TEST(RandomEffects, Deterministic) {
  const auto a = draw_random_effects({0.3, 2.0}, 10, {5, 0, 9});
  const auto b = draw_random_effects({0.3, 2.0}, 10, {5, 0, 9});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].phi, b[i].phi);
}

TEST(EulerMaruyama, ZeroNoiseUnitModel) {
  const auto m = builtin_model("unit");
  const auto p = euler_maruyama_with(m, 0.7, 2.0, 1.0, 0.1, [](std::size_t) { return 0.0; });
  EXPECT_NEAR(p.values.back(), 2.0 + 0.7, 1e-14);
}

TEST(EulerMaruyama, ZeroNoiseSolvesEulerOde) {
  const auto m = builtin_model("linear-drift");
  const auto p = euler_maruyama_with(m, -0.4, 1.5, 2.0, 0.05, [](std::size_t) { return 0.0; });
  double x = 1.5;
  for (std::size_t k = 0; k + 1 < p.times.size(); ++k) {
    x = x + (-0.4) * x * (p.times[k + 1] - p.times[k]);
    EXPECT_EQ(p.values[k + 1], x);
  }
}

TEST(EulerMaruyama, SingleStep) {
  const auto m = builtin_model("unit");
  const RngStream rng{77, 0, 0};
  const auto p = euler_maruyama(m, 0.5, 1.0, 2.0, 2.0, rng);
  ASSERT_EQ(p.values.size(), 2u);
  EXPECT_DOUBLE_EQ(p.values[1], 1.0 + 0.5 * 2.0 + std::sqrt(2.0) * rng.normal(Lane::brownian, 0));
}

TEST(EulerMaruyama, PathInvariants) {
  const auto p = euler_maruyama(builtin_model("bounded-ratio"), 1.0, 0.3, 1.0, 0.01, {1, 0, 0});
  EXPECT_EQ(p.times.front(), 0.0);
  EXPECT_EQ(p.values.front(), 0.3);
  EXPECT_EQ(p.times.size(), p.values.size());
  EXPECT_EQ(p.phi, 1.0);
}

TEST(EulerMaruyama, DivergenceIsReported) {
  ModelSpec wild{"wild", [](double x) { return x * x * x; }, [](double) { return 1.0; }, 6.0, 1.0};
  try {
    euler_maruyama_with(wild, 1.0, 100.0, 1.0, 0.1, [](std::size_t) { return 0.0; }, 4);
    FAIL() << "expected SimulationDiverged";
  } catch (const SimulationDiverged& e) {
    EXPECT_EQ(e.subject(), 4u);
    EXPECT_LT(e.step(), 10u);
  }
}

TEST(EulerMaruyama, NonPositiveDiffusionIsReported) {
  ModelSpec flat{"flat", [](double) { return 1.0; }, [](double x) { return x; }, 1.0, 1.0};
  EXPECT_THROW(euler_maruyama_with(flat, 1.0, -1.0, 1.0, 0.1, [](std::size_t) { return 0.0; }),
               DegenerateDiffusion);
}

// Additive noise: Euler-Maruyama converges with strong order 1, so halving
// the step roughly halves the pathwise error.
TEST(EulerMaruyama, LinearDriftRefinement) {
  const auto m = builtin_model("linear-drift");
  const std::size_t M = 64, R = 100;
  CompensatedSum e1, e2;
  for (std::size_t r = 0; r < R; ++r) {
    const RngStream rng{2024, r, 0};
    std::vector<double> z(4 * M);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = rng.normal(Lane::brownian, k);
    auto fine = euler_maruyama_with(m, 1.0, 1.0, 1.0, 1.0 / (4 * M),
                                    [&](std::size_t k) { return z[k]; });
    auto mid = euler_maruyama_with(m, 1.0, 1.0, 1.0, 1.0 / (2 * M), [&](std::size_t k) {
      return (z[2 * k] + z[2 * k + 1]) / std::sqrt(2.0);
    });
    auto coarse = euler_maruyama_with(m, 1.0, 1.0, 1.0, 1.0 / M, [&](std::size_t k) {
      return (z[4 * k] + z[4 * k + 1] + z[4 * k + 2] + z[4 * k + 3]) / 2.0;
    });
    const double d1 = coarse.values.back() - mid.values.back();
    const double d2 = mid.values.back() - fine.values.back();
    e1 += d1 * d1;
    e2 += d2 * d2;
  }
  const double ratio = std::sqrt(e1.value() / e2.value());
  EXPECT_GE(ratio, 1.6);
  EXPECT_LE(ratio, 2.5);
}

TEST(SimulateEnsemble, DeterministicAcrossRunsAndThreads) {
  const auto m = builtin_model("bounded-ratio");
  const auto design = Design::iid(3, 0.5, 1.0, 0.01, 99);
  const auto a = simulate_ensemble(m, {1.0, 0.5}, design, 4, 1);
  const auto b = simulate_ensemble(m, {1.0, 0.5}, design, 4, 1);
  const auto c = simulate_ensemble(m, {1.0, 0.5}, design, 4, 8);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].values, b[i].values);
    EXPECT_EQ(a[i].values, c[i].values);
    EXPECT_EQ(a[i].phi, c[i].phi);
    EXPECT_EQ(a[i].subject_index, i);
  }
}

TEST(SimulateEnsemble, SubjectDoesNotDependOnEnsembleSize) {
  const auto m = builtin_model("linear-drift");
  const auto small = simulate_ensemble(m, {1.0, 0.5}, Design::iid(2, 1.0, 1.0, 0.01, 8), 0);
  const auto big = simulate_ensemble(m, {1.0, 0.5}, Design::iid(6, 1.0, 1.0, 0.01, 8), 0);
  EXPECT_EQ(small[1].values, big[1].values);
}

TEST(SimulateEnsemble, IidSubjectsExchangeable) {
  const auto m = builtin_model("linear-drift");
  const auto design = Design::iid(5, 1.0, 1.0, 0.02, 31);
  std::vector<double> first, last;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    const auto paths = simulate_ensemble(m, {1.0, 0.5}, design, r);
    first.push_back(compute_suff_stats(paths.front(), m).u);
    last.push_back(compute_suff_stats(paths.back(), m).u);
  }
  EXPECT_GT(ks_two_sample(first, last).p_value, 0.01);
}

TEST(SimulateEnsemble, UnitEndpointVariance) {
  const auto m = builtin_model("unit");
  const double T = 1.5;
  const auto design = Design::iid(1, 0.0, T, 0.05, 17);
  std::vector<double> ends;
  for (std::uint64_t r = 0; r < 10000; ++r)
    ends.push_back(simulate_ensemble(m, {0.0, 0.0}, design, r).front().values.back());
  CompensatedSum s, ss;
  for (double x : ends) s += x;
  const double mean = s.value() / ends.size();
  for (double x : ends) ss += (x - mean) * (x - mean);
  const double var = ss.value() / (ends.size() - 1);
  EXPECT_GE(var, 0.95 * T);
  EXPECT_LE(var, 1.05 * T);
}

TEST(SimulateEnsemble, UnitIncrementsAreGaussian) {
  const auto m = builtin_model("unit");
  const double phi = 0.8, dt = 0.02;
  std::vector<double> z;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = euler_maruyama(m, phi, 0.0, 1.0, dt, {4, s, 0});
    for (std::size_t k = 0; k + 1 < p.values.size(); ++k)
      z.push_back((p.values[k + 1] - p.values[k] - phi * dt) / std::sqrt(dt));
  }
  const auto mean = jackknife_mean(z);
  EXPECT_LT(std::abs(mean.full), 4.0 * mean.se());
  std::vector<double> sq;
  for (double x : z) sq.push_back(x * x);
  const auto var = jackknife_mean(sq);
  EXPECT_LT(std::abs(var.full - 1.0), 4.0 * var.se());
}

// Euler's weak bias in E[X^4] is O(dt) with a large constant for the
// bounded-ratio model (about 25% at dt = 1/50), so the coarse grid is 1/200.
TEST(SimulateEnsemble, FourthMomentStableUnderRefinement) {
  for (const auto& name : builtin_model_names()) {
    const auto m = builtin_model(name);
    const std::size_t M = 200, R = 4000;
    std::vector<double> coarse(11, 0.0), fine(11, 0.0);
    for (std::uint64_t r = 0; r < R; ++r) {
      const RngStream rng{6, r, 0};
      std::vector<double> z(4 * M);
      for (std::size_t k = 0; k < z.size(); ++k) z[k] = rng.normal(Lane::brownian, k);
      const auto f = euler_maruyama_with(m, 1.0, 0.5, 1.0, 1.0 / (4 * M),
                                         [&](std::size_t k) { return z[k]; });
      const auto c = euler_maruyama_with(m, 1.0, 0.5, 1.0, 1.0 / M, [&](std::size_t k) {
        return (z[4 * k] + z[4 * k + 1] + z[4 * k + 2] + z[4 * k + 3]) / 2.0;
      });
      for (std::size_t j = 0; j <= 10; ++j) {
        coarse[j] += std::pow(c.values[j * M / 10], 4) / R;
        fine[j] += std::pow(f.values[j * 4 * M / 10], 4) / R;
      }
    }
    const double sup_c = *std::max_element(coarse.begin(), coarse.end());
    const double sup_f = *std::max_element(fine.begin(), fine.end());
    EXPECT_TRUE(std::isfinite(sup_c) && std::isfinite(sup_f)) << name;
    EXPECT_NEAR(sup_c / sup_f, 1.0, 0.15) << name;
  }
}
