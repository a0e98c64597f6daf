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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ldpfl/acceptance.h"
#include "ldpfl/csv.h"
#include "ldpfl/data.h"
#include "ldpfl/experiment.h"
#include "ldpfl/rdp.h"

namespace {

namespace fs = std::filesystem;
using ldpfl::ConfigError;
using ldpfl::ExperimentConfig;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAcceptance = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string preset;
  std::vector<std::string> sets;
};

void AddCommon(CLI::App* cmd, CommonFlags& flags, bool with_preset = true) {
  cmd->add_option("--config", flags.config, "Key-value config file");
  cmd->add_option("--seed", flags.seed, "Master seed");
  cmd->add_option("--out", flags.out, "Output directory");
  if (with_preset) {
    cmd->add_option("--preset", flags.preset, "Scenario preset");
  }
  cmd->add_option("--set", flags.sets, "Override one key (key=value)");
}

ExperimentConfig Resolve(const CommonFlags& flags) {
  ExperimentConfig cfg =
      flags.preset.empty() ? ExperimentConfig{} : ldpfl::PresetBase(flags.preset);
  if (!flags.config.empty()) cfg = ldpfl::LoadConfigFile(flags.config, cfg);
  for (const std::string& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set: expected key=value, got '" + kv + "'");
    }
    ldpfl::SetConfigValue(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed) cfg.federation.seed = *flags.seed;
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  return cfg;
}

void PrintSummary(const ldpfl::RunSummary& s) {
  std::printf(
      "%-28s attack=%-5s detector=%-8s eps=%-4g m=%d loss %.6g -> %.6g "
      "episodes=%d delta=%.4g D_acc=%.2f\n",
      s.name.c_str(), s.attack_mode.c_str(), s.detector.c_str(), s.epsilon,
      s.m, s.initial_val_loss, s.final_val_loss, s.episodes_executed,
      s.delta_spent, s.d_acc);
}

int RunTraining(const CommonFlags& flags, const std::string& detector,
                bool attack, const std::string& mode, std::optional<int> m) {
  ExperimentConfig cfg = Resolve(flags);
  if (!detector.empty()) ldpfl::SetConfigValue(cfg, "detector.kind", detector);
  const fs::path out = cfg.output_dir;
  if (!flags.preset.empty()) {
    for (const auto& bundle : ldpfl::RunPreset(flags.preset, cfg, out)) {
      PrintSummary(bundle.summary);
    }
    return kExitOk;
  }
  if (attack) {
    if (!mode.empty()) ldpfl::SetConfigValue(cfg, "attack.mode", mode);
    if (cfg.attack.mode == ldpfl::AttackMode::kNone) {
      cfg.attack.mode = ldpfl::AttackMode::kMpelm;
    }
    if (m) cfg.attack.config.m = *m;
    if (cfg.attack.config.m == 0) cfg.attack.config.m = 1;
  } else if (cfg.attack.mode != ldpfl::AttackMode::kNone) {
    throw ConfigError("attack.mode: use the attack subcommand for attacked runs");
  }
  PrintSummary(
      ldpfl::RunExperiment(cfg, out, attack ? "attack" : "train").summary);
  return kExitOk;
}

int RunIngest(const CommonFlags& flags, const std::string& input) {
  ExperimentConfig cfg = Resolve(flags);
  const fs::path path = input.empty() ? fs::path(cfg.data_path) : fs::path(input);
  if (path.empty()) throw ConfigError("--input: no CSV given (or set data.path)");
  ldpfl::IngestStats stats;
  const auto samples =
      ldpfl::IngestCached(path, fs::path(cfg.output_dir) / "cache", &stats);
  std::printf(
      "raw_rows=%zu missing_rows=%zu malformed_rows=%zu retained_rows=%zu "
      "samples=%zu cache=%s\n",
      stats.raw_rows, stats.missing_rows, stats.malformed_rows,
      stats.retained_rows, samples.size(),
      (fs::path(cfg.output_dir) / "cache").string().c_str());
  return kExitOk;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int RunRdpTables(const CommonFlags& flags) {
  const ExperimentConfig cfg = Resolve(flags);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  const ldpfl::LossTables tables = ldpfl::GenerateTables(cfg);
  std::ofstream csv(out / "loss_tables.csv", std::ios::binary);
  ldpfl::WriteLossTablesCsv(csv, tables);
  WriteFile(out / ldpfl::kResolvedConfigFile, ldpfl::DumpConfig(cfg));
  std::printf("%-8s %-12s %-12s\n", "epsilon", "m_l", "f_l");
  for (std::size_t e = 0; e < tables.epsilon_grid.size(); ++e) {
    std::printf("%-8g %-12.6g %-12.6g\n", tables.epsilon_grid[e],
                tables.AttackerLoss(e), tables.f_l[e]);
  }
  if (!tables.complete()) {
    std::fprintf(stderr, "warning: some table cells failed and hold nan\n");
  }
  return kExitOk;
}

int RunRdpTrain(const CommonFlags& flags, const std::string& tables_path) {
  const ExperimentConfig cfg = Resolve(flags);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  ldpfl::LossTables tables;
  if (tables_path.empty()) {
    tables = ldpfl::GenerateTables(cfg);
    std::ofstream csv(out / "loss_tables.csv", std::ios::binary);
    ldpfl::WriteLossTablesCsv(csv, tables);
  } else {
    std::ifstream in(tables_path);
    if (!in) throw ConfigError("--tables: cannot open " + tables_path);
    tables = ldpfl::ReadLossTablesCsv(in);
  }
  const ldpfl::RdpResult result = ldpfl::TrainRdp(tables, cfg.rdp, cfg.seed());
  const ldpfl::RdpEnvironment env(tables, cfg.rdp);
  {
    std::ofstream q(out / "qtable.csv", std::ios::binary);
    ldpfl::WriteQTableCsv(q, result.q, env);
    std::ofstream t(out / "rdp_trace.csv", std::ios::binary);
    ldpfl::WriteRdpTraceCsv(t, result.trace);
  }
  std::ostringstream policy;
  policy << "epsilon_star = " << ldpfl::FormatDouble(result.epsilon_star) << "\n";
  for (int s = 0; s < env.num_states(); ++s) {
    policy << "policy eps=" << ldpfl::FormatDouble(env.epsilon(s)) << " -> "
           << ldpfl::ToString(result.policy[static_cast<std::size_t>(s)]) << "\n";
  }
  WriteFile(out / "rdp_policy.txt", policy.str());
  WriteFile(out / ldpfl::kResolvedConfigFile, ldpfl::DumpConfig(cfg));
  const auto& last = result.trace.back();
  std::printf("epsilon_star=%g final_reward=%.6g final_mean_abs_delta_q=%.3g\n",
              result.epsilon_star, last.cumulative_reward, last.mean_abs_delta_q);
  return kExitOk;
}

int RunReport(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<fs::path> roots(dirs.begin(), dirs.end());
  const auto groups = ldpfl::GroupRuns(ldpfl::CollectRuns(roots));
  std::cout << ldpfl::FormatReport(groups);
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "report.csv", std::ios::binary);
    ldpfl::WriteReportCsv(csv, groups);
  }
  return kExitOk;
}

int RunAccept(const std::vector<int>& criteria, const std::string& out) {
  ldpfl::AcceptanceOptions options;
  options.only.insert(criteria.begin(), criteria.end());
  if (!out.empty()) options.work_dir = out;
  bool all = true;
  ldpfl::RunAcceptance(options, [&](const ldpfl::CriterionResult& r) {
    std::printf("%s\n", ldpfl::FormatResult(r).c_str());
    std::fflush(stdout);
    all = all && r.passed;
  });
  return all ? kExitOk : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally differentially private federated learning simulator"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string detector, mode, input, tables, report_out, accept_out;
  std::optional<int> m;
  std::vector<std::string> report_dirs;
  std::vector<int> criteria;

  auto* ingest = app.add_subcommand("ingest", "Clean and cache a power CSV");
  AddCommon(ingest, flags, false);
  ingest->add_option("--input", input, "Raw household power CSV");

  auto* train = app.add_subcommand("train", "Benign federated training");
  AddCommon(train, flags);
  train->add_option("--detector", detector, "off|norm|accuracy|mix");

  auto* attack = app.add_subcommand("attack", "Federated training under attack");
  AddCommon(attack, flags);
  attack->add_option("--detector", detector, "off|norm|accuracy|mix");
  attack->add_option("--mode", mode, "rmd|mpelm");
  attack->add_option("--m", m, "Compromised participants per episode");

  auto* rdp_tables = app.add_subcommand("rdp-tables", "Generate rDP loss tables");
  AddCommon(rdp_tables, flags);

  auto* rdp_train = app.add_subcommand("rdp-train", "Train the rDP agent");
  AddCommon(rdp_train, flags);
  rdp_train->add_option("--tables", tables, "Loss tables CSV");

  auto* report = app.add_subcommand("report", "Summarize run directories");
  report->add_option("dirs", report_dirs, "Run or preset directories");
  report->add_option("--out", report_out, "Write report.csv here");

  auto* accept = app.add_subcommand("accept", "Run the acceptance suite");
  accept->add_option("--criteria", criteria, "Criterion ids (default all)")
      ->delimiter(',');
  accept->add_option("--out", accept_out, "Scratch directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) return RunIngest(flags, input);
    if (*train) return RunTraining(flags, detector, false, mode, m);
    if (*attack) return RunTraining(flags, detector, true, mode, m);
    if (*rdp_tables) return RunRdpTables(flags);
    if (*rdp_train) return RunRdpTrain(flags, tables);
    if (*report) return RunReport(report_dirs, report_out);
    if (*accept) return RunAccept(criteria, accept_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
