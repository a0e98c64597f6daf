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

#include "ldpfl/experiment.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "ldpfl/csv.h"

namespace ldpfl {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;
using ::testing::IsEmpty;
using ::testing::SizeIs;
using ::testing::StartsWith;

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ldpfl_experiment_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ExperimentConfig Tiny() {
  ExperimentConfig cfg = PresetBase("smoke");
  cfg.synthetic_n = 600;
  cfg.federation.num_nodes = 6;
  cfg.federation.participants = 3;
  cfg.federation.episodes = 3;
  return cfg;
}

ExperimentConfig Parse(const std::string& text, ExperimentConfig base = {}) {
  std::istringstream in(text);
  return ParseConfig(in, std::move(base));
}

TEST(ConfigTest, ParsesKeysAndRecalibratesSigma) {
  const ExperimentConfig cfg = Parse(
      "# comment\n"
      "seed = 42\n"
      "federation.num_nodes = 50\n"
      "federation.participants = 10\n"
      "privacy.epsilon = 0.5\n"
      "privacy.clip = 0.2\n"
      "attack.mode = rmd\n"
      "attack.m = 2\n"
      "detector.kind = mix\n"
      "rdp.grid = 0.5, 1.0, 1.5\n");
  EXPECT_EQ(cfg.seed(), 42u);
  EXPECT_EQ(cfg.federation.num_nodes, 50);
  EXPECT_EQ(cfg.attack.mode, AttackMode::kRmd);
  EXPECT_EQ(cfg.detector.kind, DetectorKind::kMix);
  EXPECT_THAT(cfg.rdp_grid, ::testing::ElementsAre(0.5, 1.0, 1.5));
  EXPECT_DOUBLE_EQ(cfg.federation.privacy.sigma,
                   CalibrateSigma(0.5, cfg.federation.privacy.delta, 0.2));
  EXPECT_NO_THROW(cfg.Validate());
}

TEST(ConfigTest, DefaultsFillUnsetKeys) {
  const ExperimentConfig cfg = Parse("");
  EXPECT_EQ(cfg.federation.num_nodes, 100);
  EXPECT_EQ(cfg.federation.participants, 30);
  EXPECT_EQ(cfg.federation.episodes, 30);
  EXPECT_DOUBLE_EQ(cfg.federation.privacy.epsilon, 0.7);
  EXPECT_DOUBLE_EQ(cfg.federation.privacy.delta, 0.001);
  EXPECT_NO_THROW(cfg.Validate());
}

TEST(ConfigTest, UnknownKeyNamesTheKey) {
  try {
    Parse("federation.bogus = 1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_THAT(e.what(), StartsWith("federation.bogus"));
  }
}

TEST(ConfigTest, BadValueNamesTheKey) {
  try {
    Parse("federation.episodes = many\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_THAT(e.what(), StartsWith("federation.episodes"));
  }
}

TEST(ConfigTest, ValidationErrorsNameTheKey) {
  auto expect_key = [](const std::string& text, const std::string& key) {
    try {
      Parse(text).Validate();
      ADD_FAILURE() << "expected ConfigError for " << text;
    } catch (const ConfigError& e) {
      EXPECT_THAT(e.what(), StartsWith(key)) << text;
    }
  };
  expect_key("privacy.epsilon = 0\n", "privacy.epsilon");
  expect_key("privacy.delta = 1\n", "privacy.delta");
  expect_key("attack.m = 2\n", "attack.m");
  expect_key("attack.mode = rmd\nattack.m = 31\n", "attack.m");
  expect_key("data.source = csv\n", "data.path");
}

TEST(ConfigTest, DumpRoundTrips) {
  const ExperimentConfig cfg = Parse(
      "seed = 9\nprivacy.epsilon = 1.3\nattack.mode = mpelm\nattack.m = 4\n"
      "detector.kind = accuracy\ndetector.orientation = as_written\n"
      "rdp.gammas = 1.5, 2.5\noptimizer.kind = adamax\n");
  const std::string dump = DumpConfig(cfg);
  EXPECT_EQ(DumpConfig(Parse(dump)), dump);
  for (const std::string& key : ConfigKeys()) {
    EXPECT_THAT(dump, HasSubstr(key + " = ")) << key;
  }
}

TEST(ConfigTest, RdpSeedsCountUp) {
  ExperimentConfig cfg;
  cfg.federation.seed = 10;
  cfg.rdp_num_seeds = 3;
  EXPECT_THAT(cfg.RdpSeeds(), ::testing::ElementsAre(10u, 11u, 12u));
}

TEST(RunExperimentTest, SingleEpisodeWritesOneRow) {
  ExperimentConfig cfg = Tiny();
  cfg.federation.episodes = 1;
  const fs::path dir = Scratch("one");
  const MetricsBundle bundle = RunExperiment(cfg, dir, "one");
  EXPECT_EQ(bundle.summary.episodes_executed, 1);
  std::ifstream in(dir / kEpisodesFile);
  const CsvTable t = ReadCsv(in, kEpisodesSchema, {});
  EXPECT_THAT(t.rows, SizeIs(1));
  for (std::string_view f : MetricFiles()) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_TRUE(fs::exists(dir / kResolvedConfigFile));
}

TEST(RunExperimentTest, SameConfigGivesIdenticalFiles) {
  ExperimentConfig cfg = Tiny();
  cfg.attack.mode = AttackMode::kMpelm;
  cfg.attack.config.m = 1;
  cfg.detector.kind = DetectorKind::kMix;
  const fs::path a = Scratch("same_a");
  const fs::path b = Scratch("same_b");
  RunExperiment(cfg, a, "x");
  RunExperiment(cfg, b, "x");
  for (std::string_view f : MetricFiles()) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
  EXPECT_EQ(Slurp(a / kResolvedConfigFile), Slurp(b / kResolvedConfigFile));
}

TEST(RunExperimentTest, SummaryMatchesRecomputation) {
  ExperimentConfig cfg = Tiny();
  cfg.attack.mode = AttackMode::kRmd;
  cfg.attack.config.m = 1;
  cfg.detector.kind = DetectorKind::kNorm;
  const fs::path dir = Scratch("recompute");
  const MetricsBundle bundle = RunExperiment(cfg, dir, "r");
  const RunSummary stored = ReadSummary(dir);
  const RunSummary again = RecomputeSummary(dir);
  EXPECT_EQ(stored.episodes_executed, again.episodes_executed);
  EXPECT_DOUBLE_EQ(stored.final_val_loss, again.final_val_loss);
  EXPECT_DOUBLE_EQ(stored.d_acc, again.d_acc);
  EXPECT_DOUBLE_EQ(stored.final_val_loss, bundle.summary.final_val_loss);
}

TEST(ReportTest, EmptyDirectoryGivesEmptyReport) {
  const fs::path dir = Scratch("empty");
  const auto runs = CollectRuns({dir});
  EXPECT_THAT(runs, IsEmpty());
  const auto groups = GroupRuns(runs);
  EXPECT_THAT(groups, IsEmpty());
  std::ostringstream csv;
  WriteReportCsv(csv, groups);
  std::istringstream back(csv.str());
  EXPECT_THAT(ReadCsv(back, kReportSchema, {}).rows, IsEmpty());
}

TEST(ReportTest, SchemaMismatchIsRejected) {
  const fs::path dir = Scratch("mismatch");
  RunExperiment(Tiny(), dir / "run", "run");
  std::string text = Slurp(dir / "run" / kEpisodesFile);
  text.replace(text.find("/1"), 2, "/9");
  std::ofstream(dir / "run" / kEpisodesFile, std::ios::binary) << text;
  EXPECT_THROW(CollectRuns({dir}), SchemaError);
}

TEST(ReportTest, TamperedSummaryIsRejected) {
  const fs::path dir = Scratch("tamper");
  RunExperiment(Tiny(), dir / "run", "run");
  std::string text = Slurp(dir / "run" / kSummaryFile);
  const auto pos = text.rfind(',');
  text.insert(pos, "1");
  std::ofstream(dir / "run" / kSummaryFile, std::ios::binary) << text;
  EXPECT_ANY_THROW(CollectRuns({dir}));
}

TEST(ReportTest, GroupsSeedsTogether) {
  const fs::path dir = Scratch("group");
  ExperimentConfig cfg = Tiny();
  cfg.federation.seed = 1;
  RunExperiment(cfg, dir / "s1", "s1");
  cfg.federation.seed = 2;
  RunExperiment(cfg, dir / "s2", "s2");
  const auto runs = CollectRuns({dir});
  ASSERT_THAT(runs, SizeIs(2));
  const auto groups = GroupRuns(runs);
  ASSERT_THAT(groups, SizeIs(1));
  EXPECT_EQ(groups[0].runs, 2);
  EXPECT_DOUBLE_EQ(groups[0].mean_final_loss,
                   (runs[0].final_val_loss + runs[1].final_val_loss) / 2);
  EXPECT_THAT(FormatReport(groups), HasSubstr("none"));
}

TEST(PresetTest, Fig4HasTwentyOneCells) {
  EXPECT_THAT(ExpandPreset("fig4-small", PresetBase("fig4-small")), SizeIs(21));
}

TEST(PresetTest, EveryCellValidates) {
  for (const std::string& name : PresetNames()) {
    if (name == "rdp") continue;
    for (const PresetRun& run : ExpandPreset(name, PresetBase(name))) {
      EXPECT_NO_THROW(run.config.Validate()) << name << "/" << run.name;
    }
  }
  EXPECT_THROW(PresetBase("nope"), ConfigError);
}

TEST(GenerateTablesTest, RequiresAnAttacker) {
  ExperimentConfig cfg = Tiny();
  cfg.attack.config.m = 0;
  EXPECT_THROW(GenerateTables(cfg), ConfigError);
}

}  // namespace
}  // namespace ldpfl
