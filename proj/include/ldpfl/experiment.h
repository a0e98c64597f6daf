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

#ifndef LDPFL_EXPERIMENT_H_
#define LDPFL_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ldpfl/detection.h"
#include "ldpfl/federation.h"
#include "ldpfl/rdp.h"

namespace ldpfl {

// Invalid configuration. The message starts with the offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string data_source = "synthetic";  // "synthetic" or "csv"
  std::string data_path;
  std::size_t synthetic_n = 20000;
  double synthetic_noise = 0.02;
  FederationConfig federation;
  AttackSetup attack;
  DetectorConfig detector;
  RdpHyper rdp;
  std::vector<double> rdp_grid = DefaultEpsilonGrid();
  std::vector<double> rdp_gammas = {2.0, 3.0};
  int rdp_num_seeds = 3;
  std::string output_dir = "out";

  std::uint64_t seed() const { return federation.seed; }
  // Seeds used for loss-table generation: seed, seed + 1, ...
  std::vector<std::uint64_t> RdpSeeds() const;
  // Throws ConfigError, including for m > n and for m > 0 without an attack.
  void Validate() const;
};

// Applies one dotted key. Privacy keys recalibrate sigma.
void SetConfigValue(ExperimentConfig& cfg, std::string_view key,
                    std::string_view value);
// Reads "key = value" lines over `base`. '#' starts a comment.
ExperimentConfig ParseConfig(std::istream& in, ExperimentConfig base = {});
ExperimentConfig LoadConfigFile(const std::filesystem::path& path,
                                ExperimentConfig base = {});
// Every key with its resolved value, one per line, in a fixed order.
std::string DumpConfig(const ExperimentConfig& cfg);
std::vector<std::string> ConfigKeys();

std::shared_ptr<const FederatedData> LoadFederatedData(
    const ExperimentConfig& cfg);

struct RunSummary {
  std::string name;
  std::string attack_mode;
  std::string detector;
  double epsilon = 0.0;
  double clip_c = 0.0;
  double gamma0 = 0.0;
  int m = 0;
  double beta1 = 0.0;
  std::uint64_t seed = 0;
  double initial_val_loss = 0.0;
  double final_val_loss = 0.0;
  int episodes_executed = 0;
  int aborted_episodes = 0;
  double delta_spent = 0.0;
  double d_acc = 0.0;  // NaN without a detector
  bool stopped_by_ledger = false;
};

struct MetricsBundle {
  std::filesystem::path dir;
  RunSummary summary;
};

inline constexpr std::string_view kEpisodesFile = "episodes.csv";
inline constexpr std::string_view kLedgerFile = "ledger.csv";
inline constexpr std::string_view kAttackTraceFile = "attack_trace.csv";
inline constexpr std::string_view kDetectionFile = "detection.csv";
inline constexpr std::string_view kSummaryFile = "summary.csv";
inline constexpr std::string_view kResolvedConfigFile = "config.resolved.txt";
inline constexpr std::string_view kTimestampFile = "timestamps.txt";

// Metric CSVs written by every run.
std::vector<std::string_view> MetricFiles();

RunSummary Summarize(const std::string& name, const ExperimentConfig& cfg,
                     const TrainingResult& result);
void WriteMetrics(const std::filesystem::path& dir, const std::string& name,
                  const ExperimentConfig& cfg, const TrainingResult& result);

// Trains one federation and writes its metrics into `dir`.
MetricsBundle RunExperiment(const ExperimentConfig& cfg,
                            const std::filesystem::path& dir,
                            const std::string& name = "run");

struct PresetRun {
  std::string name;
  ExperimentConfig config;
};

std::vector<std::string> PresetNames();
// Shared settings of a preset; a config file is applied on top.
ExperimentConfig PresetBase(std::string_view preset);
// Grid cells of a preset, each derived from `base`.
std::vector<PresetRun> ExpandPreset(std::string_view preset,
                                    const ExperimentConfig& base);
// Runs every cell into <out>/<cell name>.
std::vector<MetricsBundle> RunPreset(std::string_view preset,
                                     const ExperimentConfig& base,
                                     const std::filesystem::path& out);

RunSummary ReadSummary(const std::filesystem::path& dir);
// Rebuilds the summary from the per-episode CSVs.
RunSummary RecomputeSummary(const std::filesystem::path& dir);

// Finds run directories under `roots`, sorted by path. Throws SchemaError on
// a version mismatch or if a summary disagrees with its CSVs.
std::vector<RunSummary> CollectRuns(
    const std::vector<std::filesystem::path>& roots);

struct ReportGroup {
  std::string attack_mode;
  std::string detector;
  double epsilon = 0.0;
  double clip_c = 0.0;
  double gamma0 = 0.0;
  int m = 0;
  double beta1 = 0.0;
  int runs = 0;
  double mean_final_loss = 0.0;
  double mean_d_acc = 0.0;
  double mean_delta_spent = 0.0;
};

// Runs grouped by everything but the seed, in sorted key order.
std::vector<ReportGroup> GroupRuns(const std::vector<RunSummary>& runs);
void WriteReportCsv(std::ostream& out, const std::vector<ReportGroup>& groups);
std::string FormatReport(const std::vector<ReportGroup>& groups);

// Loss tables for the configured grid, gammas and seeds.
LossTables GenerateTables(const ExperimentConfig& cfg);

}  // namespace ldpfl

#endif  // LDPFL_EXPERIMENT_H_
