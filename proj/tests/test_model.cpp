#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sde_remle/model.hpp"

using namespace sde_remle;

TEST(BuiltinModel, Unit) {
  const auto m = builtin_model("unit");
  EXPECT_EQ(m.drift(3.7), 1.0);
  EXPECT_EQ(m.diffusion(3.7), 1.0);
  EXPECT_EQ(m.tau, 1.0);
}

TEST(BuiltinModel, LinearDrift) {
  const auto m = builtin_model("linear-drift");
  EXPECT_EQ(m.drift(2.0), 2.0);
  EXPECT_EQ(m.diffusion(2.0), 1.0);
  EXPECT_EQ(m.tau, 2.0);
}

TEST(BuiltinModel, BoundedRatioBelowOne) {
  const auto m = builtin_model("bounded-ratio");
  for (double x : {-1e6, -3.0, -0.5, 0.0, 0.1, 2.0, 1e6}) {
    const double b = m.drift(x), s = m.diffusion(x);
    EXPECT_LT(b * b / (s * s), 1.0) << x;
  }
}

TEST(BuiltinModel, UnknownNameThrows) {
  EXPECT_THROW(builtin_model("cubic"), NotFound);
}

TEST(BuiltinModel, GrowthBoundsHold) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> wide(-1e6, 1e6), narrow(-10.0, 10.0);
  for (const auto& name : builtin_model_names()) {
    const auto m = builtin_model(name);
    const double K = m.growth_constant;
    for (int i = 0; i < 20000; ++i) {
      const double x = (i % 2) ? wide(gen) : narrow(gen);
      const double b = m.drift(x), s = m.diffusion(x);
      const double slack = 1.0 + 1e-12;
      ASSERT_LE(b * b, K * (1.0 + x * x) * slack) << name << " x=" << x;
      ASSERT_LE(s * s, K * (1.0 + x * x) * slack) << name << " x=" << x;
      ASSERT_LE(b * b / (s * s), K * (1.0 + std::pow(std::abs(x), m.tau)) * slack)
          << name << " x=" << x;
      ASSERT_GT(s, 0.0);
    }
  }
}

TEST(ValidateTheta, Examples) {
  const ParamSpace box{-1.0, 1.0, 0.0, 1.0};
  EXPECT_TRUE(validate_theta({0.0, 0.0}, box));
  EXPECT_FALSE(validate_theta({2.0, 0.5}, box));
  EXPECT_TRUE(validate_theta({1.0, 1.0}, box));
}

TEST(ValidateTheta, MonotoneInRectangle) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0), w(0.0, 3.0), grow(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    ParamSpace small{-1.0 + u(gen) / 3.0, 1.0 + u(gen) / 3.0, w(gen) / 3.0, 1.5 + w(gen)};
    ParamSpace big{small.mu_lo - grow(gen), small.mu_hi + grow(gen),
                   std::max(0.0, small.omega2_lo - grow(gen)), small.omega2_hi + grow(gen)};
    const Theta t{u(gen), w(gen)};
    if (validate_theta(t, small)) {
      EXPECT_TRUE(validate_theta(t, big));
    }
  }
}

TEST(ParamSpace, RejectsBadRectangles) {
  EXPECT_THROW((ParamSpace{1.0, 1.0, 0.0, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((ParamSpace{0.0, 1.0, -0.1, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((ParamSpace{0.0, 1.0, 1.0, 0.5}.validate()), InvalidArgument);
  EXPECT_NO_THROW((ParamSpace{0.0, 1.0, 0.0, 1.0}.validate()));
}

TEST(Design, StepMustBeSmallRelativeToHorizon) {
  EXPECT_THROW(Design::iid(3, 0.0, 1.0, 0.2, 1).validate(), InvalidArgument);
  EXPECT_NO_THROW(Design::iid(3, 0.0, 1.0, 0.1, 1).validate());
}

TEST(Design, ConvergingStaysInDeclaredBox) {
  const auto d = Design::converging(50, 0.0, 1.0, 1.0, 1.0, 0.01, 3);
  ASSERT_EQ(d.subjects.size(), 50u);
  EXPECT_DOUBLE_EQ(d.subjects[0].x0, 1.0);
  EXPECT_DOUBLE_EQ(d.subjects[0].T, 2.0);
  EXPECT_DOUBLE_EQ(d.subjects[3].T, 1.25);
  EXPECT_NO_THROW(d.validate());
}

TEST(Design, EmptyIsInvalid) {
  EXPECT_THROW(Design::iid(0, 0.0, 1.0, 0.01, 1).validate(), InvalidArgument);
}
