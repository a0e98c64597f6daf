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

#include "ldpfl/detection.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <set>
#include <vector>

#include "ldpfl/data.h"
#include "ldpfl/model.h"
#include "ldpfl/rng.h"

namespace ldpfl {
namespace {

using ::testing::DoubleEq;
using ::testing::ElementsAre;
using ::testing::IsEmpty;

std::vector<ModelUpdate> Updates(const std::vector<std::vector<double>>& rows) {
  std::vector<ModelUpdate> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.push_back({rows[i], static_cast<int>(i), 1});
  }
  return out;
}

DetectorConfig NormConfig(double beta1 = 1.0) {
  DetectorConfig cfg;
  cfg.kind = DetectorKind::kNorm;
  cfg.beta1 = beta1;
  cfg.d_max = 10.0;
  return cfg;
}

// Updates scattered around a shared direction, with a few shifted outliers.
std::vector<ModelUpdate> RandomUpdates(std::size_t q, int n, std::uint64_t seed,
                                       const std::set<int>& outliers = {}) {
  Substream rng(seed);
  std::vector<double> base(q);
  for (double& x : base) x = 0.02 * rng.Normal();
  std::vector<ModelUpdate> out;
  for (int i = 0; i < n; ++i) {
    ModelUpdate u{base, i, 1};
    const double shift = outliers.count(i) ? 0.05 : 0.0;
    for (double& x : u.delta) x += 0.01 * rng.Normal() + shift;
    out.push_back(std::move(u));
  }
  return out;
}

TEST(ComparisonStandardTest, LeavesOneOut) {
  const auto updates = Updates({{1, 0}, {2, 2}, {3, 4}});
  EXPECT_THAT(ComparisonStandard(updates, 0),
              ElementsAre(DoubleEq(2.5), DoubleEq(3.0)));
  EXPECT_THAT(ComparisonStandard(updates, 2),
              ElementsAre(DoubleEq(1.5), DoubleEq(1.0)));
}

TEST(ComparisonStandardTest, EqualUpdatesGiveThemselves) {
  const auto updates = Updates({{0.3, -0.1}, {0.3, -0.1}, {0.3, -0.1}});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_THAT(ComparisonStandard(updates, i),
                ElementsAre(DoubleEq(0.3), DoubleEq(-0.1)));
  }
}

TEST(ComparisonStandardTest, SingleUpdateThrows) {
  EXPECT_THROW(ComparisonStandard(Updates({{1.0}}), 0), std::invalid_argument);
}

TEST(NormRateTest, IdenticalUpdatesPass) {
  const auto updates = Updates({{1, 2}, {1, 2}, {1, 2}});
  const Verdict v = NormRate(updates, 1, NormConfig());
  EXPECT_EQ(v.d, 0.0);
  EXPECT_EQ(v.e1, 0.0);
  EXPECT_EQ(v.rate, 1.0);
  EXPECT_FALSE(v.flagged);
}

TEST(NormRateTest, HandEvaluatedOutlier) {
  const auto updates = Updates({{1, 0}, {1, 0}, {1, 0}, {3, 0}});
  const Verdict v = NormRate(updates, 3, NormConfig());
  EXPECT_DOUBLE_EQ(v.d, 4.0);
  EXPECT_DOUBLE_EQ(v.e1, 4.0);
  EXPECT_EQ(v.rate, 0.0);
  EXPECT_TRUE(v.flagged);
  EXPECT_EQ(v.node_id, 3);
}

TEST(NormRateTest, BoundaryAtBetaPasses) {
  // Standard (1, 0); update (2, 0) gives e1 = 1.
  const auto updates = Updates({{1, 0}, {1, 0}, {2, 0}});
  const Verdict v = NormRate(updates, 2, NormConfig(1.0));
  EXPECT_DOUBLE_EQ(v.e1, 1.0);
  EXPECT_EQ(v.rate, 1.0);
  EXPECT_FALSE(v.flagged);
}

TEST(NormRateTest, SaturatesAtDmax) {
  const auto updates = Updates({{1, 0}, {1, 0}, {100, 0}});
  EXPECT_DOUBLE_EQ(NormRate(updates, 2, NormConfig()).e1, 10.0);
  const auto zero_standard = Updates({{0, 0}, {0, 0}, {0.1, 0}});
  EXPECT_DOUBLE_EQ(NormRate(zero_standard, 2, NormConfig()).e1, 10.0);
}

TEST(NormRateTest, RateInUnitIntervalAndMonotoneInBeta) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto updates = RandomUpdates(20, 8, seed, {2});
    for (std::size_t i = 0; i < updates.size(); ++i) {
      double prev = -1.0;
      for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        const Verdict v = NormRate(updates, i, NormConfig(beta));
        EXPECT_GE(v.rate, 0.0);
        EXPECT_LE(v.rate, 1.0);
        EXPECT_GE(v.rate, prev);
        prev = v.rate;
      }
    }
  }
}

TEST(AccuracyRateTest, EqualLossesPassInBothOrientations) {
  DetectorConfig cfg;
  for (Orientation o : {Orientation::kAsWritten, Orientation::kReversed}) {
    cfg.orientation = o;
    const Verdict v = AccuracyRateFromLosses(1.5, 1.5, cfg);
    EXPECT_EQ(v.e2, 0.0);
    EXPECT_EQ(v.rate, 1.0);
  }
}

TEST(AccuracyRateTest, ReversedFlagsHigherLoss) {
  DetectorConfig cfg;
  cfg.orientation = Orientation::kReversed;
  cfg.beta2 = 0.1;
  const Verdict v = AccuracyRateFromLosses(2.0, 1.0, cfg);
  EXPECT_DOUBLE_EQ(v.e2, 0.5);
  EXPECT_DOUBLE_EQ(v.rate, 0.5);
  EXPECT_TRUE(v.flagged);
  EXPECT_FALSE(AccuracyRateFromLosses(1.0, 2.0, cfg).flagged);
}

TEST(AccuracyRateTest, AsWrittenFlagsLowerLoss) {
  DetectorConfig cfg;
  cfg.orientation = Orientation::kAsWritten;
  cfg.beta2 = 0.1;
  const Verdict v = AccuracyRateFromLosses(1.0, 2.0, cfg);
  EXPECT_DOUBLE_EQ(v.e2, 0.5);
  EXPECT_DOUBLE_EQ(v.rate, 0.5);
  EXPECT_TRUE(v.flagged);
  EXPECT_FALSE(AccuracyRateFromLosses(2.0, 1.0, cfg).flagged);
  EXPECT_EQ(AccuracyRateFromLosses(0.0, 0.0, cfg).rate, 1.0);
}

TEST(AccuracyRateTest, GapEqualToBetaPasses) {
  DetectorConfig cfg;
  cfg.orientation = Orientation::kReversed;
  cfg.beta2 = 0.5;
  EXPECT_EQ(AccuracyRateFromLosses(2.0, 1.0, cfg).rate, 1.0);
}

TEST(AccuracyRateTest, MonotoneInBeta) {
  DetectorConfig cfg;
  double prev = -1.0;
  for (double beta : {0.0, 0.1, 0.2, 0.3, 0.5, 0.9}) {
    cfg.beta2 = beta;
    const double rate = AccuracyRateFromLosses(1.6, 1.0, cfg).rate;
    EXPECT_GE(rate, prev);
    EXPECT_GE(rate, 0.0);
    EXPECT_LE(rate, 1.0);
    prev = rate;
  }
}

TEST(AccuracyRateTest, UsesModelLosses) {
  const Mlp model;
  const ParamVector global = model.InitParams(2);
  const auto validation = Synthesize(50, 3);
  std::vector<double> zero(model.param_count(), 0.0);
  std::vector<double> push(model.param_count(), 0.5);
  const std::vector<ModelUpdate> updates = {
      {zero, 0, 1}, {zero, 1, 1}, {push, 2, 1}};
  DetectorConfig cfg;
  cfg.kind = DetectorKind::kAccuracy;
  const Verdict v = AccuracyRate(updates, 2, cfg, model, global, validation);
  EXPECT_DOUBLE_EQ(v.loss_standard, model.MseLoss(global, validation));
  ParamVector moved = global;
  for (double& w : moved) w += 0.5;
  EXPECT_DOUBLE_EQ(v.loss_update, model.MseLoss(moved, validation));
  EXPECT_THROW(AccuracyRate(updates, 2, cfg, model, global, {}),
               std::invalid_argument);
}

class EvaluateTest : public ::testing::Test {
 protected:
  EvaluateTest()
      : global_(model_.InitParams(5)), validation_(Synthesize(100, 9)) {}

  DetectionContext Context() const { return {&model_, global_, validation_}; }

  Mlp model_;
  ParamVector global_;
  std::vector<Sample> validation_;
};

TEST_F(EvaluateTest, MixFlagsTheUnionOfBothDetectors) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto updates =
        RandomUpdates(model_.param_count(), 10, seed, {1, 4});
    DetectorConfig cfg;
    cfg.beta1 = 2.0;
    cfg.beta2 = 0.05;
    cfg.kind = DetectorKind::kNorm;
    std::set<int> expected = FlaggedIds(EvaluateSerial(updates, cfg, Context()));
    cfg.kind = DetectorKind::kAccuracy;
    for (int id : FlaggedIds(EvaluateSerial(updates, cfg, Context()))) {
      expected.insert(id);
    }
    EXPECT_EQ(MixFilter(updates, cfg, Context()), expected);
    cfg.kind = DetectorKind::kMix;
    EXPECT_EQ(FlaggedIds(EvaluateSerial(updates, cfg, Context())), expected);
  }
}

TEST_F(EvaluateTest, MixRateIsTheSmallerRate) {
  const auto updates = RandomUpdates(model_.param_count(), 6, 3, {0});
  DetectorConfig cfg;
  cfg.kind = DetectorKind::kMix;
  const auto mix = EvaluateSerial(updates, cfg, Context());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const Verdict norm = NormRate(updates, i, cfg);
    const Verdict acc =
        AccuracyRate(updates, i, cfg, model_, global_, validation_);
    EXPECT_EQ(mix[i].rate, std::min(norm.rate, acc.rate));
  }
}

TEST_F(EvaluateTest, OffFlagsNothing) {
  const auto updates = RandomUpdates(model_.param_count(), 6, 3, {0, 1});
  const auto verdicts = EvaluateSerial(updates, DetectorConfig{}, Context());
  EXPECT_THAT(FlaggedIds(verdicts), IsEmpty());
}

TEST_F(EvaluateTest, ParallelMatchesSerial) {
  omp_set_num_threads(4);
  for (DetectorKind kind :
       {DetectorKind::kNorm, DetectorKind::kAccuracy, DetectorKind::kMix}) {
    const auto updates = RandomUpdates(model_.param_count(), 30, 11, {3, 7});
    DetectorConfig cfg;
    cfg.kind = kind;
    const auto serial = EvaluateSerial(updates, cfg, Context());
    const auto parallel = EvaluateParallel(updates, cfg, Context());
    ASSERT_EQ(serial.size(), parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      EXPECT_EQ(serial[i].node_id, parallel[i].node_id);
      EXPECT_EQ(serial[i].rate, parallel[i].rate);
      EXPECT_EQ(serial[i].flagged, parallel[i].flagged);
    }
  }
}

TEST(DetectionAccuracyTest, CountsCorrectClassifications) {
  auto verdicts = [](std::vector<bool> flags) {
    std::vector<Verdict> out;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      Verdict v;
      v.node_id = static_cast<int>(i);
      v.flagged = flags[i];
      out.push_back(v);
    }
    return out;
  };
  const std::vector<EpisodeVerdicts> perfect = {
      {verdicts({true, false, false, false, false}), {0}}};
  EXPECT_DOUBLE_EQ(DetectionAccuracy(perfect), 100.0);
  const std::vector<EpisodeVerdicts> one_miss = {
      {verdicts({false, false, false, false, false}), {0}}};
  EXPECT_DOUBLE_EQ(DetectionAccuracy(one_miss), 80.0);
  const std::vector<EpisodeVerdicts> two_episodes = {
      perfect[0], {verdicts({true, true, false, false, false}), {0}}};
  EXPECT_DOUBLE_EQ(DetectionAccuracy(two_episodes), 90.0);
}

TEST(DetectionAccuracyTest, SilentDetectorScoresBenignShare) {
  const int n = 30;
  for (int m = 0; m <= 9; m += 3) {
    EpisodeVerdicts ep;
    for (int i = 0; i < n; ++i) {
      Verdict v;
      v.node_id = i;
      ep.verdicts.push_back(v);
      if (i < m) ep.malicious.insert(i);
    }
    const std::vector<EpisodeVerdicts> eps = {ep};
    EXPECT_NEAR(DetectionAccuracy(eps), 100.0 * (n - m) / n, 1e-12);
  }
}

TEST(DetectorParsingTest, RoundTrips) {
  for (DetectorKind k : {DetectorKind::kOff, DetectorKind::kNorm,
                         DetectorKind::kAccuracy, DetectorKind::kMix}) {
    EXPECT_EQ(ParseDetectorKind(ToString(k)), k);
  }
  for (Orientation o : {Orientation::kAsWritten, Orientation::kReversed}) {
    EXPECT_EQ(ParseOrientation(ToString(o)), o);
  }
  EXPECT_THROW(ParseDetectorKind("bogus"), std::invalid_argument);
}

}  // namespace
}  // namespace ldpfl
