//
// Copyright 2026 The LDPFL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "ldpfl/dp.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ldpfl/model.h"
#include "ldpfl/rng.h"

namespace ldpfl {
namespace {

using ::testing::DoubleNear;
using ::testing::ElementsAre;

TEST(ClipTest, ShortVectorUnchanged) {
  const std::vector<double> v = {0.3, 0.4};
  EXPECT_EQ(ClipVector(v, 1.0), v);
}

TEST(ClipTest, LongVectorScaledToThreshold) {
  EXPECT_THAT(ClipVector(std::vector<double>{1.2, 1.6}, 1.0),
              ElementsAre(DoubleNear(0.6, 1e-15), DoubleNear(0.8, 1e-15)));
}

TEST(ClipTest, NormBoundAndIdempotence) {
  Substream rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.Below(50));
    const double scale = 10 * rng.Uniform();
    for (double& x : v) x = scale * rng.Normal();
    const double c = 0.01 + rng.Uniform();
    const auto once = ClipVector(v, c);
    EXPECT_LE(L2Norm(once), c * (1 + 1e-12));
    const auto twice = ClipVector(once, c);
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_NEAR(twice[i], once[i], 1e-15);
    }
    if (L2Norm(v) <= c) EXPECT_EQ(once, v);
  }
}

TEST(ClipTest, PreservesUpdateMetadata) {
  const ModelUpdate u{{3.0, 4.0}, 7, 2};
  const ModelUpdate clipped = Clip(u, 1.0);
  EXPECT_EQ(clipped.node_id, 7);
  EXPECT_EQ(clipped.episode, 2);
  EXPECT_NEAR(L2Norm(clipped.delta), 1.0, 1e-15);
}

TEST(CalibrateSigmaTest, UnitAtSpecialDelta) {
  EXPECT_NEAR(CalibrateSigma(1.0, 1.25 * std::exp(-0.5), 1.0), 1.0, 1e-12);
}

TEST(CalibrateSigmaTest, ReferenceValue) {
  const double expected = std::sqrt(2 * std::log(1.25 / 0.001)) / 0.7;
  EXPECT_NEAR(CalibrateSigma(0.7, 0.001, 1.0), expected, 1e-12);
  EXPECT_NEAR(CalibrateSigma(0.7, 0.001, 1.0), 5.3950, 1e-4);
}

TEST(CalibrateSigmaTest, ScalesLinearlyInSensitivityAndInverselyInEpsilon) {
  const double base = CalibrateSigma(0.5, 1e-5, 1.0);
  EXPECT_NEAR(CalibrateSigma(0.5, 1e-5, 3.0), 3 * base, 1e-12);
  EXPECT_NEAR(CalibrateSigma(1.0, 1e-5, 1.0), base / 2, 1e-12);
}

TEST(CalibrateSigmaTest, MonotoneInEpsilonAndDelta) {
  double prev = CalibrateSigma(0.05, 0.01, 1.0);
  for (double eps = 0.1; eps < 3.0; eps += 0.05) {
    const double s = CalibrateSigma(eps, 0.01, 1.0);
    EXPECT_LT(s, prev);
    prev = s;
  }
  prev = CalibrateSigma(1.0, 1e-9, 1.0);
  for (double delta : {1e-7, 1e-5, 1e-3, 0.1, 0.5}) {
    const double s = CalibrateSigma(1.0, delta, 1.0);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(CalibrateSigmaTest, RejectsOutOfRange) {
  EXPECT_THROW(CalibrateSigma(0.0, 0.01, 1.0), std::invalid_argument);
  EXPECT_THROW(CalibrateSigma(1.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(CalibrateSigma(1.0, 1.0, 1.0), std::invalid_argument);
}

TEST(PrivacySpecTest, NoiseStdIsClipTimesSigma) {
  const PrivacySpec spec = PrivacySpec::Calibrated(0.7, 0.001, 0.05);
  EXPECT_DOUBLE_EQ(spec.sigma, CalibrateSigma(0.7, 0.001, 0.05));
  EXPECT_DOUBLE_EQ(spec.noise_std(), 0.05 * spec.sigma);
}

TEST(AddNoiseTest, ZeroSigmaIsIdentity) {
  PrivacySpec spec;
  spec.sigma = 0.0;
  const ModelUpdate u{{0.1, -0.2, 0.3}, 1, 1};
  EXPECT_EQ(AddNoise(u, spec, Substream(1)), u);
}

TEST(AddNoiseTest, SameStreamReplays) {
  const PrivacySpec spec = PrivacySpec::Calibrated(1.0, 0.01, 1.0);
  const ModelUpdate u{std::vector<double>(10, 0.0), 0, 0};
  EXPECT_EQ(AddNoise(u, spec, Substream(5)), AddNoise(u, spec, Substream(5)));
  EXPECT_NE(AddNoise(u, spec, Substream(5)), AddNoise(u, spec, Substream(6)));
}

TEST(AddNoiseTest, EmpiricalMomentsMatchCalibration) {
  const PrivacySpec spec = PrivacySpec::Calibrated(0.7, 0.001, 0.5);
  const std::size_t n = 100000;
  const ModelUpdate u{std::vector<double>(n, 0.25), 0, 0};
  const auto noisy = AddNoise(u, spec, Substream(42)).delta;
  const double mean = std::accumulate(noisy.begin(), noisy.end(), 0.0) / n;
  double var = 0;
  for (double x : noisy) var += (x - mean) * (x - mean);
  var /= n - 1;
  const double sd = spec.noise_std();
  EXPECT_NEAR(mean, 0.25, 5 * sd / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(var / (sd * sd), 1.0, 0.02);
}

TEST(AddGaussianTest, DrawsInIndexOrder) {
  std::vector<double> v(4, 1.0);
  Substream a(8);
  AddGaussian(v, 2.0, 0.5, a);
  Substream b(8);
  for (double x : v) EXPECT_DOUBLE_EQ(x, 1.0 + 2.0 + 0.5 * b.Normal());
}

TEST(PrivacyLedgerTest, StopsOnThirdEpisode) {
  PrivacyLedger ledger(0.0025);
  EXPECT_EQ(ledger.Account(0.001), LedgerDecision::kContinue);
  EXPECT_EQ(ledger.Account(0.001), LedgerDecision::kContinue);
  EXPECT_EQ(ledger.Account(0.001), LedgerDecision::kStop);
  EXPECT_NEAR(ledger.cumulative_delta(), 1 - std::pow(0.999, 3), 1e-15);
  EXPECT_TRUE(ledger.stopped());
}

TEST(PrivacyLedgerTest, ReachingThresholdExactlyContinues) {
  PrivacyLedger ledger(0.01);
  EXPECT_EQ(ledger.Account(0.01), LedgerDecision::kContinue);
  EXPECT_FALSE(ledger.stopped());
}

TEST(PrivacyLedgerTest, ZeroDeltaNeverStops) {
  PrivacyLedger ledger(0.0);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(ledger.Account(0.0), LedgerDecision::kContinue);
  }
  EXPECT_EQ(ledger.cumulative_delta(), 0.0);
}

TEST(PrivacyLedgerTest, MonotoneAndOrderIndependent) {
  Substream rng(17);
  std::vector<double> deltas(30);
  for (double& d : deltas) d = 0.01 * rng.Uniform();
  PrivacyLedger forward(1.0);
  double prev = 0.0;
  for (double d : deltas) {
    forward.Account(d);
    EXPECT_GE(forward.cumulative_delta(), prev);
    prev = forward.cumulative_delta();
  }
  std::reverse(deltas.begin(), deltas.end());
  PrivacyLedger backward(1.0);
  for (double d : deltas) backward.Account(d);
  EXPECT_NEAR(forward.cumulative_delta(), backward.cumulative_delta(), 1e-15);
  EXPECT_EQ(forward.per_episode_delta().size(), 30u);
}

}  // namespace
}  // namespace ldpfl
