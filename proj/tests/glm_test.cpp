#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "lcwr/error.hpp"
#include "lcwr/glm.hpp"

namespace lcwr {
namespace {

// 30-digit values from mpmath.
constexpr double kLogisticOne = 0.731058578630004879251159241822;
constexpr double kTanhOne = 0.761594155955764888119458282605;

TEST(Logistic, SymmetryPoint) { EXPECT_EQ(logistic(0.0), 0.5); }

TEST(Logistic, AgainstHighPrecision) {
  EXPECT_NEAR(logistic(1.0), kLogisticOne, 1e-15);
  EXPECT_NEAR(logistic(1.0), 0.73106, 1e-5);
}

TEST(Logistic, Antisymmetric) {
  for (double u : {1e-9, 0.3, 2.0, 17.5, 40.0, 700.0}) {
    EXPECT_NEAR(logistic(u) + logistic(-u), 1.0, 1e-15) << u;
  }
}

TEST(Logistic, Saturates) {
  EXPECT_EQ(logistic(1e4), 1.0);
  EXPECT_EQ(logistic(-1e4), 0.0);
  EXPECT_FALSE(std::isnan(logistic(-std::numeric_limits<double>::max())));
}

TEST(LogLogistic, StableInTails) {
  EXPECT_NEAR(log_logistic(0.0), -std::log(2.0), 1e-15);
  EXPECT_NEAR(log_logistic(-800.0), -800.0, 1e-9);
  EXPECT_NEAR(log_logistic(800.0), 0.0, 1e-300);
  EXPECT_NEAR(log_logistic(1.0), std::log(kLogisticOne), 1e-15);
}

TEST(Preference, RejectsOutOfRange) {
  EXPECT_THROW(Preference(-0.01), InvalidArgument);
  EXPECT_THROW(Preference(1.01), InvalidArgument);
  EXPECT_THROW(Preference(std::nan("")), InvalidArgument);
  EXPECT_EQ(Preference(0.0).value(), 0.0);
  EXPECT_EQ(Preference(1.0).value(), 1.0);
}

TEST(LengthPair, RejectsNonPositive) {
  EXPECT_THROW(LengthPair(0, 5), InvalidArgument);
  EXPECT_THROW(LengthPair(5, -1), InvalidArgument);
  EXPECT_EQ(LengthPair(7, 3).difference(), 4);
  EXPECT_EQ(LengthPair(7, 3).swapped(), LengthPair(3, 7));
}

TEST(NormalizeLengthDiff, EqualLengthsGiveZero) {
  for (double sigma : {0.5, 1.0, 300.0}) EXPECT_EQ(normalize_length_diff(LengthPair(640, 640), sigma), 0.0);
}

TEST(NormalizeLengthDiff, OneSigmaIsTanhOne) {
  EXPECT_NEAR(normalize_length_diff(LengthPair(1300, 1000), 300.0), kTanhOne, 1e-15);
  EXPECT_NEAR(normalize_length_diff(LengthPair(1300, 1000), 300.0), 0.76159, 1e-5);
}

TEST(NormalizeLengthDiff, OddInSwap) {
  const LengthPair p(1834, 1022);
  EXPECT_EQ(normalize_length_diff(p.swapped(), 411.0), -normalize_length_diff(p, 411.0));
}

TEST(NormalizeLengthDiff, RejectsBadSigma) {
  EXPECT_THROW(normalize_length_diff(LengthPair(2, 1), 0.0), InvalidArgument);
  EXPECT_THROW(normalize_length_diff(LengthPair(2, 1), -3.0), InvalidArgument);
  EXPECT_THROW(normalize_length_diff(LengthPair(2, 1), std::numeric_limits<double>::infinity()), InvalidArgument);
}

TEST(NormalizeLengthDiff, StaysBelowOne) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> len(1, 20000);
  std::uniform_real_distribution<double> sigma(1.0, 5000.0);
  for (int i = 0; i < 2000; ++i) {
    EXPECT_LE(std::abs(normalize_length_diff(LengthPair(len(rng), len(rng)), sigma(rng))), 1.0);
  }
}

TEST(LengthScale, DegenerateFeatureIsZero) {
  const auto s = LengthScale::degenerate_scale();
  EXPECT_EQ(s.sigma, 1.0);
  EXPECT_EQ(s.feature(LengthPair(900, 100)), 0.0);
  EXPECT_THROW(LengthScale::from_sigma(0.0), InvalidArgument);
}

TEST(PredictPreference, ZeroParamsIsHalf) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> g(-5.0, 5.0);
  std::uniform_int_distribution<std::int64_t> len(1, 5000);
  for (int i = 0; i < 500; ++i) {
    EXPECT_EQ(predict_preference(GlmParameters{}, g(rng), LengthPair(len(rng), len(rng)), 250.0), 0.5);
  }
}

TEST(PredictPreference, ThetaOnly) {
  EXPECT_NEAR(predict_preference({1.0, 0.0, 0.0}, 0.7, LengthPair(10, 2000), 100.0), 0.73106, 1e-5);
}

TEST(PredictPreference, RoleSwapComplements) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> p(-2.0, 2.0);
  std::uniform_int_distribution<std::int64_t> len(1, 5000);
  for (int i = 0; i < 1000; ++i) {
    const GlmParameters a{p(rng), p(rng), p(rng)};
    const GlmParameters swapped{-a.theta, a.phi, -a.psi};
    const double g = p(rng);
    const LengthPair lengths(len(rng), len(rng));
    const double q = predict_preference(a, g, lengths, 400.0);
    const double q_swap = predict_preference(swapped, g, lengths.swapped(), 400.0);
    EXPECT_NEAR(q + q_swap, 1.0, 1e-12);
  }
}

TEST(PredictPreference, MonotoneInThetaAndLength) {
  const double g = -0.3;
  const LengthPair l(1200, 1000);
  double prev = 0.0;
  for (double theta = -3.0; theta <= 3.0; theta += 0.25) {
    const double q = predict_preference({theta, 0.4, 0.9}, g, l, 500.0);
    EXPECT_GT(q, prev);
    prev = q;
  }
  prev = 0.0;
  for (std::int64_t len = 200; len <= 3000; len += 100) {
    const double q = predict_preference({0.1, 0.6, 0.9}, g, LengthPair(len, 1000), 500.0);
    EXPECT_GT(q, prev);
    prev = q;
  }
}

TEST(LcPredict, HandEvaluated) {
  EXPECT_EQ(lc_predict({}, 1.3), 0.5);
  EXPECT_EQ(lc_predict({0.5, 2.0, 1.0}, -0.5), 0.5);
}

TEST(LcPredict, MatchesEqualLengthPrediction) {
  const GlmParameters p{0.4, 1.7, 0.8};
  for (std::int64_t L : {1, 17, 1500}) {
    for (double sigma : {1.0, 90.0, 2000.0}) {
      EXPECT_EQ(lc_predict(p, 0.25), predict_preference(p, 0.25, LengthPair(L, L), sigma));
    }
  }
}

TEST(GammaTable, RejectsDuplicatesAndMissing) {
  GammaTable t;
  t.insert("a", 0.5);
  EXPECT_THROW(t.insert("a", 0.1), InvalidArgument);
  EXPECT_THROW(t.insert("b", std::nan("")), InvalidArgument);
  EXPECT_THROW((void)t.at("zzz"), DataError);
  EXPECT_EQ(t.at("a"), 0.5);
  EXPECT_EQ(t.size(), 1u);
}

}  // namespace
}  // namespace lcwr
