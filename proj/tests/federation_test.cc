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

#include "ldpfl/federation.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "ldpfl/data.h"
#include "ldpfl/rng.h"

namespace ldpfl {
namespace {

using ::testing::ElementsAre;
using ::testing::IsEmpty;
using ::testing::SizeIs;

std::shared_ptr<const FederatedData> SmallData(int k = 10) {
  return std::make_shared<const FederatedData>(
      PrepareFederatedData(Synthesize(800, 3), k, 3));
}

FederationConfig SmallConfig() {
  FederationConfig cfg;
  cfg.num_nodes = 10;
  cfg.participants = 4;
  cfg.episodes = 3;
  cfg.seed = 5;
  cfg.privacy = PrivacySpec::Calibrated(0.7, 0.001, 0.05);
  cfg.stop_threshold = 0.5;
  cfg.optimizer.learning_rate = 0.05;
  return cfg;
}

TEST(SelectNodesTest, AllNodesWhenNEqualsK) {
  EXPECT_THAT(SelectNodes(5, 5, Substream(1)), ElementsAre(0, 1, 2, 3, 4));
}

TEST(SelectNodesTest, DistinctSortedAndInRange) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ids = SelectNodes(100, 30, Substream(seed));
    ASSERT_THAT(ids, SizeIs(30));
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    EXPECT_EQ(std::set<int>(ids.begin(), ids.end()).size(), 30u);
    EXPECT_GE(ids.front(), 0);
    EXPECT_LT(ids.back(), 100);
  }
}

TEST(SelectNodesTest, InclusionFrequencyIsUniform) {
  const int draws = 10000;
  std::vector<int> hits(100, 0);
  for (int t = 0; t < draws; ++t) {
    for (int id : SelectNodes(100, 30, Substream(7, StreamTag::kSelect, 0, t))) {
      ++hits[static_cast<std::size_t>(id)];
    }
  }
  const double se = std::sqrt(0.3 * 0.7 / draws);
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(draws), 0.3, 4 * se);
}

TEST(SelectNodesTest, RejectsTooMany) {
  EXPECT_THROW(SelectNodes(3, 4, Substream(1)), std::invalid_argument);
}

TEST(AggregateTest, AddsMeanDelta) {
  const std::vector<double> global = {1.0, 1.0};
  const std::vector<ModelUpdate> updates = {{{0.2, 0.0}, 0, 1},
                                            {{0.4, -0.2}, 1, 1}};
  EXPECT_THAT(Aggregate(global, updates),
              ElementsAre(::testing::DoubleEq(1.3), ::testing::DoubleEq(0.9)));
}

TEST(AggregateTest, PermutationInvariantBitForBit) {
  Substream rng(2);
  std::vector<ModelUpdate> updates;
  for (int i = 0; i < 12; ++i) {
    ModelUpdate u{std::vector<double>(9), i, 1};
    for (double& x : u.delta) x = rng.Normal() * std::pow(10.0, i % 5);
    updates.push_back(std::move(u));
  }
  const std::vector<double> global(9, 0.5);
  const auto reference = Aggregate(global, updates);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(updates.begin(), updates.end(), rng.engine());
    EXPECT_EQ(Aggregate(global, updates), reference);
  }
}

TEST(AggregateTest, EmptyOrMismatchedThrows) {
  const std::vector<double> global = {0.0};
  EXPECT_THROW(Aggregate(global, {}), AggregationError);
  const std::vector<ModelUpdate> bad = {{{1.0, 2.0}, 0, 1}};
  EXPECT_THROW(Aggregate(global, bad), DimensionError);
}

TEST(FederationTest, SingleEpisodeGivesOneRecord) {
  FederationConfig cfg = SmallConfig();
  cfg.episodes = 1;
  Federation fed(cfg, SmallData());
  const TrainingResult result = fed.Run();
  ASSERT_THAT(result.rounds, SizeIs(1));
  EXPECT_EQ(result.rounds[0].episode, 1);
  EXPECT_THAT(result.rounds[0].selected, SizeIs(4));
  EXPECT_THAT(result.rounds[0].submitted, SizeIs(4));
  EXPECT_EQ(result.final_params, result.rounds[0].global_params_after);
}

TEST(FederationTest, LedgerStopsAfterThirdEpisode) {
  FederationConfig cfg = SmallConfig();
  cfg.episodes = 10;
  cfg.privacy = PrivacySpec::Calibrated(0.7, 0.001, 0.05);
  cfg.stop_threshold = 0.0025;
  Federation fed(cfg, SmallData());
  const TrainingResult result = fed.Run();
  ASSERT_THAT(result.rounds, SizeIs(3));
  EXPECT_TRUE(result.stopped_by_ledger);
  EXPECT_FALSE(result.rounds[1].stopped);
  EXPECT_TRUE(result.rounds[2].stopped);
  EXPECT_THROW(fed.RunEpisode(), std::logic_error);
}

TEST(FederationTest, SameSeedIsBitwiseIdentical) {
  AttackSetup attack{AttackMode::kMpelm, {}};
  attack.config.m = 2;
  DetectorConfig detector;
  detector.kind = DetectorKind::kMix;
  const auto a = Federation(SmallConfig(), SmallData(), attack, detector).Run();
  const auto b = Federation(SmallConfig(), SmallData(), attack, detector).Run();
  ASSERT_EQ(a.rounds.size(), b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    EXPECT_TRUE(a.rounds[i] == b.rounds[i]) << "episode " << i + 1;
  }
  EXPECT_EQ(a.final_params, b.final_params);
}

TEST(FederationTest, DifferentSeedsDiffer) {
  FederationConfig other = SmallConfig();
  other.seed = 6;
  EXPECT_NE(Federation(SmallConfig(), SmallData()).Run().final_params,
            Federation(other, SmallData()).Run().final_params);
}

TEST(FederationTest, ParallelMatchesSerial) {
  omp_set_num_threads(4);
  for (AttackMode mode : {AttackMode::kNone, AttackMode::kRmd, AttackMode::kMpelm}) {
    AttackSetup attack{mode, {}};
    attack.config.m = mode == AttackMode::kNone ? 0 : 2;
    DetectorConfig detector;
    detector.kind = DetectorKind::kMix;
    FederationConfig serial = SmallConfig();
    serial.execution = ExecutionPolicy::kSerial;
    FederationConfig parallel = SmallConfig();
    parallel.execution = ExecutionPolicy::kParallel;
    const auto a = Federation(serial, SmallData(), attack, detector).Run();
    const auto b = Federation(parallel, SmallData(), attack, detector).Run();
    ASSERT_EQ(a.rounds.size(), b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
      EXPECT_TRUE(a.rounds[i] == b.rounds[i])
          << ToString(mode) << " episode " << i + 1;
    }
  }
}

TEST(FederationTest, PermissiveDetectorChangesNothing) {
  DetectorConfig permissive;
  permissive.kind = DetectorKind::kNorm;
  permissive.beta1 = 1e9;
  const auto off = Federation(SmallConfig(), SmallData()).Run();
  const auto on = Federation(SmallConfig(), SmallData(), {}, permissive).Run();
  ASSERT_EQ(off.rounds.size(), on.rounds.size());
  for (std::size_t i = 0; i < off.rounds.size(); ++i) {
    EXPECT_THAT(on.rounds[i].flagged, IsEmpty());
    EXPECT_EQ(on.rounds[i].global_params_after,
              off.rounds[i].global_params_after);
  }
}

TEST(FederationTest, FrozenModelWithoutNoiseOrLearning) {
  FederationConfig cfg = SmallConfig();
  cfg.participants = 1;
  cfg.optimizer.learning_rate = 0.0;
  cfg.privacy.sigma = 0.0;
  Federation fed(cfg, SmallData());
  const ParamVector before = fed.global();
  const auto result = fed.Run();
  EXPECT_EQ(result.final_params, before);
}

TEST(FederationTest, CompromisedNodesAreSelectedParticipants) {
  AttackSetup attack{AttackMode::kRmd, {}};
  attack.config.m = 3;
  FederationConfig cfg = SmallConfig();
  cfg.episodes = 5;
  const auto result = Federation(cfg, SmallData(), attack).Run();
  for (const RoundRecord& r : result.rounds) {
    ASSERT_THAT(r.compromised, SizeIs(3));
    for (int id : r.compromised) {
      EXPECT_TRUE(std::binary_search(r.selected.begin(), r.selected.end(), id));
    }
    EXPECT_EQ(r.m_active, 3);
    EXPECT_TRUE(std::isnan(r.gamma_t));
  }
}

TEST(FederationTest, MpelmRecordsGammaTrace) {
  AttackSetup attack{AttackMode::kMpelm, {}};
  attack.config.m = 1;
  attack.config.gamma0 = 2.0;
  const auto result = Federation(SmallConfig(), SmallData(), attack).Run();
  EXPECT_DOUBLE_EQ(result.rounds[0].gamma_t, 2.0);
  EXPECT_DOUBLE_EQ(result.rounds[0].loss_ratio, 0.0);
  for (const RoundRecord& r : result.rounds) {
    EXPECT_GT(r.gamma_current, 0.0);
    EXPECT_FALSE(std::isnan(r.avg_compromised_val_loss));
  }
}

TEST(FederationTest, FlaggingEverythingAbortsTheEpisode) {
  DetectorConfig strict;
  strict.kind = DetectorKind::kNorm;
  strict.beta1 = 1e-12;
  Federation fed(SmallConfig(), SmallData(), {}, strict);
  const ParamVector before = fed.global();
  const RoundRecord r = fed.RunEpisode();
  EXPECT_EQ(r.flagged.size(), r.submitted.size());
  EXPECT_TRUE(r.aborted);
  EXPECT_EQ(r.global_params_after, before);
  EXPECT_DOUBLE_EQ(r.delta_step, 0.001);
}

TEST(FederationTest, RejectsInvalidSetups) {
  FederationConfig cfg = SmallConfig();
  cfg.participants = 11;
  EXPECT_THROW(Federation(cfg, SmallData()), std::invalid_argument);
  AttackSetup attack{AttackMode::kRmd, {}};
  attack.config.m = 5;
  EXPECT_THROW(Federation(SmallConfig(), SmallData(), attack),
               std::invalid_argument);
  EXPECT_THROW(Federation(SmallConfig(), SmallData(4)), std::invalid_argument);
}

TEST(AttackModeTest, ParseRoundTrip) {
  for (AttackMode m : {AttackMode::kNone, AttackMode::kRmd, AttackMode::kMpelm}) {
    EXPECT_EQ(ParseAttackMode(ToString(m)), m);
  }
  EXPECT_THROW(ParseAttackMode("x"), std::invalid_argument);
}

}  // namespace
}  // namespace ldpfl
