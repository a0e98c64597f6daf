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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <tuple>

#include "ldpfl/csv.h"

namespace ldpfl {
namespace {

namespace fs = std::filesystem;

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void Bad(std::string_view key, std::string_view value,
                      std::string_view expected) {
  throw ConfigError(std::string(key) + ": invalid value '" +
                    std::string(value) + "' (expected " +
                    std::string(expected) + ")");
}

double ToReal(std::string_view key, std::string_view v) {
  try {
    const double x = ParseDouble(Trim(v));
    if (std::isnan(x)) Bad(key, v, "a number");
    return x;
  } catch (const SchemaError&) {
    Bad(key, v, "a number");
  }
}

long long ToInt(std::string_view key, std::string_view v) {
  const std::string s = Trim(v);
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(s, &pos);
    if (pos != s.size()) Bad(key, v, "an integer");
    return x;
  } catch (const std::logic_error&) {
    Bad(key, v, "an integer");
  }
}

bool ToBool(std::string_view key, std::string_view v) {
  const std::string s = Trim(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  Bad(key, v, "true or false");
}

std::vector<std::string> SplitList(std::string_view v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(v)};
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string JoinReals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += FormatDouble(v[i]);
  }
  return s;
}

std::string JoinInts(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

std::string Bool(bool b) { return b ? "true" : "false"; }

void Recalibrate(ExperimentConfig& cfg) {
  PrivacySpec& p = cfg.federation.privacy;
  if (p.epsilon > 0.0 && p.delta > 0.0 && p.delta < 1.0) {
    p = PrivacySpec::Calibrated(p.epsilon, p.delta, p.clip_c);
  }
}

struct KeySpec {
  std::string_view key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

const std::vector<KeySpec>& Keys() {
  using C = ExperimentConfig;
  using V = std::string_view;
  static const std::vector<KeySpec> keys = {
      {"seed", [](const C& c) { return std::to_string(c.federation.seed); },
       [](C& c, V v) {
         const auto x = ToInt("seed", v);
         if (x < 0) Bad("seed", v, "a non-negative integer");
         c.federation.seed = static_cast<std::uint64_t>(x);
       }},
      {"output.dir", [](const C& c) { return c.output_dir; },
       [](C& c, V v) { c.output_dir = Trim(v); }},
      {"data.source", [](const C& c) { return c.data_source; },
       [](C& c, V v) {
         const std::string s = Trim(v);
         if (s != "synthetic" && s != "csv") Bad("data.source", v, "synthetic or csv");
         c.data_source = s;
       }},
      {"data.path", [](const C& c) { return c.data_path; },
       [](C& c, V v) { c.data_path = Trim(v); }},
      {"data.synthetic_n",
       [](const C& c) { return std::to_string(c.synthetic_n); },
       [](C& c, V v) {
         const auto x = ToInt("data.synthetic_n", v);
         if (x < 1) Bad("data.synthetic_n", v, "a positive integer");
         c.synthetic_n = static_cast<std::size_t>(x);
       }},
      {"data.synthetic_noise",
       [](const C& c) { return FormatDouble(c.synthetic_noise); },
       [](C& c, V v) { c.synthetic_noise = ToReal("data.synthetic_noise", v); }},
      {"federation.num_nodes",
       [](const C& c) { return std::to_string(c.federation.num_nodes); },
       [](C& c, V v) {
         c.federation.num_nodes = static_cast<int>(ToInt("federation.num_nodes", v));
       }},
      {"federation.participants",
       [](const C& c) { return std::to_string(c.federation.participants); },
       [](C& c, V v) {
         c.federation.participants =
             static_cast<int>(ToInt("federation.participants", v));
       }},
      {"federation.episodes",
       [](const C& c) { return std::to_string(c.federation.episodes); },
       [](C& c, V v) {
         c.federation.episodes = static_cast<int>(ToInt("federation.episodes", v));
       }},
      {"federation.execution",
       [](const C& c) -> std::string {
         return c.federation.execution == ExecutionPolicy::kSerial ? "serial"
                                                                   : "parallel";
       },
       [](C& c, V v) {
         const std::string s = Trim(v);
         if (s == "serial") {
           c.federation.execution = ExecutionPolicy::kSerial;
         } else if (s == "parallel") {
           c.federation.execution = ExecutionPolicy::kParallel;
         } else {
           Bad("federation.execution", v, "serial or parallel");
         }
       }},
      {"model.hidden",
       [](const C& c) { return JoinInts(c.federation.hidden, ','); },
       [](C& c, V v) {
         std::vector<int> hidden;
         for (const auto& item : SplitList(v)) {
           const auto x = ToInt("model.hidden", item);
           if (x < 1) Bad("model.hidden", v, "positive layer widths");
           hidden.push_back(static_cast<int>(x));
         }
         c.federation.hidden = hidden;
       }},
      {"optimizer.kind",
       [](const C& c) -> std::string {
         return c.federation.optimizer.kind == OptimizerKind::kMbgd ? "mbgd"
                                                                    : "adamax";
       },
       [](C& c, V v) {
         const std::string s = Trim(v);
         if (s == "mbgd") {
           c.federation.optimizer.kind = OptimizerKind::kMbgd;
         } else if (s == "adamax") {
           c.federation.optimizer.kind = OptimizerKind::kAdamax;
         } else {
           Bad("optimizer.kind", v, "mbgd or adamax");
         }
       }},
      {"optimizer.learning_rate",
       [](const C& c) { return FormatDouble(c.federation.optimizer.learning_rate); },
       [](C& c, V v) {
         c.federation.optimizer.learning_rate = ToReal("optimizer.learning_rate", v);
       }},
      {"optimizer.batch_size",
       [](const C& c) { return std::to_string(c.federation.optimizer.batch_size); },
       [](C& c, V v) {
         const auto x = ToInt("optimizer.batch_size", v);
         if (x < 1) Bad("optimizer.batch_size", v, "a positive integer");
         c.federation.optimizer.batch_size = static_cast<std::size_t>(x);
       }},
      {"optimizer.local_steps",
       [](const C& c) { return std::to_string(c.federation.optimizer.local_steps); },
       [](C& c, V v) {
         c.federation.optimizer.local_steps =
             static_cast<int>(ToInt("optimizer.local_steps", v));
       }},
      {"optimizer.early_stop",
       [](const C& c) { return Bool(c.federation.optimizer.early_stop); },
       [](C& c, V v) {
         c.federation.optimizer.early_stop = ToBool("optimizer.early_stop", v);
       }},
      {"optimizer.patience",
       [](const C& c) { return std::to_string(c.federation.optimizer.patience); },
       [](C& c, V v) {
         c.federation.optimizer.patience =
             static_cast<int>(ToInt("optimizer.patience", v));
       }},
      {"privacy.epsilon",
       [](const C& c) { return FormatDouble(c.federation.privacy.epsilon); },
       [](C& c, V v) {
         c.federation.privacy.epsilon = ToReal("privacy.epsilon", v);
         Recalibrate(c);
       }},
      {"privacy.delta",
       [](const C& c) { return FormatDouble(c.federation.privacy.delta); },
       [](C& c, V v) {
         c.federation.privacy.delta = ToReal("privacy.delta", v);
         Recalibrate(c);
       }},
      {"privacy.clip",
       [](const C& c) { return FormatDouble(c.federation.privacy.clip_c); },
       [](C& c, V v) {
         c.federation.privacy.clip_c = ToReal("privacy.clip", v);
         Recalibrate(c);
       }},
      {"privacy.stop_threshold",
       [](const C& c) { return FormatDouble(c.federation.stop_threshold); },
       [](C& c, V v) {
         c.federation.stop_threshold = ToReal("privacy.stop_threshold", v);
       }},
      {"attack.mode",
       [](const C& c) { return std::string(ToString(c.attack.mode)); },
       [](C& c, V v) {
         try {
           c.attack.mode = ParseAttackMode(Trim(v));
         } catch (const std::invalid_argument&) {
           Bad("attack.mode", v, "none, rmd or mpelm");
         }
       }},
      {"attack.m", [](const C& c) { return std::to_string(c.attack.config.m); },
       [](C& c, V v) { c.attack.config.m = static_cast<int>(ToInt("attack.m", v)); }},
      {"attack.gamma0",
       [](const C& c) { return FormatDouble(c.attack.config.gamma0); },
       [](C& c, V v) { c.attack.config.gamma0 = ToReal("attack.gamma0", v); }},
      {"attack.theta",
       [](const C& c) { return FormatDouble(c.attack.config.theta); },
       [](C& c, V v) { c.attack.config.theta = ToReal("attack.theta", v); }},
      {"attack.rho", [](const C& c) { return FormatDouble(c.attack.config.rho); },
       [](C& c, V v) { c.attack.config.rho = ToReal("attack.rho", v); }},
      {"attack.r_hi", [](const C& c) { return FormatDouble(c.attack.config.r_hi); },
       [](C& c, V v) { c.attack.config.r_hi = ToReal("attack.r_hi", v); }},
      {"attack.r_lo", [](const C& c) { return FormatDouble(c.attack.config.r_lo); },
       [](C& c, V v) { c.attack.config.r_lo = ToReal("attack.r_lo", v); }},
      {"attack.partial_stop_fraction",
       [](const C& c) { return FormatDouble(c.attack.config.partial_stop_fraction); },
       [](C& c, V v) {
         c.attack.config.partial_stop_fraction =
             ToReal("attack.partial_stop_fraction", v);
       }},
      {"attack.adaptive",
       [](const C& c) { return Bool(c.attack.config.adaptive); },
       [](C& c, V v) { c.attack.config.adaptive = ToBool("attack.adaptive", v); }},
      {"detector.kind",
       [](const C& c) { return std::string(ToString(c.detector.kind)); },
       [](C& c, V v) {
         try {
           c.detector.kind = ParseDetectorKind(Trim(v));
         } catch (const std::invalid_argument&) {
           Bad("detector.kind", v, "off, norm, accuracy or mix");
         }
       }},
      {"detector.beta1", [](const C& c) { return FormatDouble(c.detector.beta1); },
       [](C& c, V v) { c.detector.beta1 = ToReal("detector.beta1", v); }},
      {"detector.beta2", [](const C& c) { return FormatDouble(c.detector.beta2); },
       [](C& c, V v) { c.detector.beta2 = ToReal("detector.beta2", v); }},
      {"detector.d_max", [](const C& c) { return FormatDouble(c.detector.d_max); },
       [](C& c, V v) { c.detector.d_max = ToReal("detector.d_max", v); }},
      {"detector.orientation",
       [](const C& c) { return std::string(ToString(c.detector.orientation)); },
       [](C& c, V v) {
         try {
           c.detector.orientation = ParseOrientation(Trim(v));
         } catch (const std::invalid_argument&) {
           Bad("detector.orientation", v, "reversed or as_written");
         }
       }},
      {"rdp.alpha", [](const C& c) { return FormatDouble(c.rdp.alpha); },
       [](C& c, V v) { c.rdp.alpha = ToReal("rdp.alpha", v); }},
      {"rdp.zeta", [](const C& c) { return FormatDouble(c.rdp.zeta); },
       [](C& c, V v) { c.rdp.zeta = ToReal("rdp.zeta", v); }},
      {"rdp.psi1", [](const C& c) { return FormatDouble(c.rdp.psi1); },
       [](C& c, V v) { c.rdp.psi1 = ToReal("rdp.psi1", v); }},
      {"rdp.psi2", [](const C& c) { return FormatDouble(c.rdp.psi2); },
       [](C& c, V v) { c.rdp.psi2 = ToReal("rdp.psi2", v); }},
      {"rdp.psi3", [](const C& c) { return FormatDouble(c.rdp.psi3); },
       [](C& c, V v) { c.rdp.psi3 = ToReal("rdp.psi3", v); }},
      {"rdp.explore_start",
       [](const C& c) { return FormatDouble(c.rdp.explore_start); },
       [](C& c, V v) { c.rdp.explore_start = ToReal("rdp.explore_start", v); }},
      {"rdp.explore_min", [](const C& c) { return FormatDouble(c.rdp.explore_min); },
       [](C& c, V v) { c.rdp.explore_min = ToReal("rdp.explore_min", v); }},
      {"rdp.max_episodes",
       [](const C& c) { return std::to_string(c.rdp.max_episodes); },
       [](C& c, V v) {
         c.rdp.max_episodes = static_cast<int>(ToInt("rdp.max_episodes", v));
       }},
      {"rdp.num_bins", [](const C& c) { return std::to_string(c.rdp.num_bins); },
       [](C& c, V v) { c.rdp.num_bins = static_cast<int>(ToInt("rdp.num_bins", v)); }},
      {"rdp.grid", [](const C& c) { return JoinReals(c.rdp_grid); },
       [](C& c, V v) {
         std::vector<double> grid;
         for (const auto& item : SplitList(v)) grid.push_back(ToReal("rdp.grid", item));
         c.rdp_grid = grid;
       }},
      {"rdp.gammas", [](const C& c) { return JoinReals(c.rdp_gammas); },
       [](C& c, V v) {
         std::vector<double> g;
         for (const auto& item : SplitList(v)) g.push_back(ToReal("rdp.gammas", item));
         c.rdp_gammas = g;
       }},
      {"rdp.num_seeds", [](const C& c) { return std::to_string(c.rdp_num_seeds); },
       [](C& c, V v) { c.rdp_num_seeds = static_cast<int>(ToInt("rdp.num_seeds", v)); }},
  };
  return keys;
}

std::string NowUtc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

double EpisodeAccuracy(const RoundRecord& r) {
  if (r.verdicts.empty()) return std::numeric_limits<double>::quiet_NaN();
  EpisodeVerdicts ep{r.verdicts,
                     std::set<int>(r.compromised.begin(), r.compromised.end())};
  return DetectionAccuracy(std::span<const EpisodeVerdicts>(&ep, 1));
}

ExperimentConfig DeskBase() {
  ExperimentConfig c;
  c.synthetic_n = 20000;
  c.federation.num_nodes = 100;
  c.federation.participants = 30;
  c.federation.episodes = 30;
  c.federation.stop_threshold = 0.05;
  c.federation.optimizer.learning_rate = 0.05;
  return c;
}

void SetPrivacy(ExperimentConfig& c, double epsilon, double clip) {
  c.federation.privacy =
      PrivacySpec::Calibrated(epsilon, c.federation.privacy.delta, clip);
}

std::string Num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::vector<PresetRun> DetectionGrid(const ExperimentConfig& base,
                                     DetectorKind kind) {
  std::vector<PresetRun> runs;
  const std::vector<double> betas =
      kind == DetectorKind::kAccuracy ? std::vector<double>{base.detector.beta1}
                                      : std::vector<double>{1.0, 3.0};
  const int n = base.federation.participants;
  for (double beta1 : betas) {
    for (int tenths : {1, 2, 3}) {
      const int m = std::max(1, n * tenths / 10);
      for (AttackMode mode : {AttackMode::kRmd, AttackMode::kMpelm}) {
        ExperimentConfig c = base;
        c.detector.kind = kind;
        c.detector.beta1 = beta1;
        c.attack.mode = mode;
        c.attack.config.m = m;
        std::string name = std::string(ToString(kind));
        if (kind != DetectorKind::kAccuracy) name += "_b" + Num(beta1);
        name += "_m" + std::to_string(m) + "_" + std::string(ToString(mode));
        runs.push_back({name, c});
      }
    }
  }
  return runs;
}

bool SummaryEqual(const RunSummary& a, const RunSummary& b) {
  auto same = [](double x, double y) {
    return FormatDouble(x) == FormatDouble(y);
  };
  return a.episodes_executed == b.episodes_executed &&
         a.aborted_episodes == b.aborted_episodes &&
         same(a.final_val_loss, b.final_val_loss) &&
         same(a.delta_spent, b.delta_spent) && same(a.d_acc, b.d_acc) &&
         a.stopped_by_ledger == b.stopped_by_ledger;
}

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::RdpSeeds() const {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < rdp_num_seeds; ++i) seeds.push_back(seed() + i);
  return seeds;
}

void ExperimentConfig::Validate() const {
  auto wrap = [](const char* prefix, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(prefix) + ": " + e.what());
    }
  };
  if (data_source == "csv" && data_path.empty()) {
    throw ConfigError("data.path: required when data.source = csv");
  }
  const PrivacySpec& p = federation.privacy;
  if (!(p.epsilon > 0.0)) throw ConfigError("privacy.epsilon: must be > 0");
  if (!(p.delta > 0.0 && p.delta < 1.0)) {
    throw ConfigError("privacy.delta: must lie in (0, 1)");
  }
  if (!(p.clip_c > 0.0)) throw ConfigError("privacy.clip: must be > 0");
  if (!(federation.stop_threshold > 0.0)) {
    throw ConfigError("privacy.stop_threshold: must be > 0");
  }
  wrap("federation", [&] { federation.Validate(); });
  wrap("attack", [&] { attack.config.Validate(); });
  wrap("detector", [&] { detector.Validate(); });
  wrap("rdp", [&] { rdp.Validate(); });
  if (attack.mode == AttackMode::kNone && attack.config.m != 0) {
    throw ConfigError("attack.m: must be 0 when attack.mode = none");
  }
  if (attack.config.m > federation.participants) {
    throw ConfigError("attack.m: must not exceed federation.participants");
  }
  if (rdp_num_seeds < 1) throw ConfigError("rdp.num_seeds: must be >= 1");
}

void SetConfigValue(ExperimentConfig& cfg, std::string_view key,
                    std::string_view value) {
  for (const auto& spec : Keys()) {
    if (spec.key == key) {
      spec.set(cfg, value);
      return;
    }
  }
  throw ConfigError(std::string(key) + ": unknown key");
}

ExperimentConfig ParseConfig(std::istream& in, ExperimentConfig base) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = Trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    SetConfigValue(base, Trim(body.substr(0, eq)), body.substr(eq + 1));
  }
  return base;
}

ExperimentConfig LoadConfigFile(const fs::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config: cannot open " + path.string());
  return ParseConfig(in, std::move(base));
}

std::string DumpConfig(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& spec : Keys()) {
    out += std::string(spec.key) + " = " + spec.get(cfg) + "\n";
  }
  out += "# derived: privacy.sigma = " +
         FormatDouble(cfg.federation.privacy.sigma) + "\n";
  return out;
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const auto& spec : Keys()) keys.emplace_back(spec.key);
  return keys;
}

std::shared_ptr<const FederatedData> LoadFederatedData(
    const ExperimentConfig& cfg) {
  std::vector<Sample> samples =
      cfg.data_source == "csv"
          ? IngestCsv(cfg.data_path)
          : Synthesize(cfg.synthetic_n, cfg.seed(), cfg.synthetic_noise);
  return std::make_shared<const FederatedData>(
      PrepareFederatedData(samples, cfg.federation.num_nodes, cfg.seed()));
}

std::vector<std::string_view> MetricFiles() {
  return {kEpisodesFile, kLedgerFile, kAttackTraceFile, kDetectionFile,
          kSummaryFile};
}

RunSummary Summarize(const std::string& name, const ExperimentConfig& cfg,
                     const TrainingResult& result) {
  RunSummary s;
  s.name = name;
  s.attack_mode = std::string(ToString(cfg.attack.mode));
  s.detector = std::string(ToString(cfg.detector.kind));
  s.epsilon = cfg.federation.privacy.epsilon;
  s.clip_c = cfg.federation.privacy.clip_c;
  s.gamma0 = cfg.attack.mode == AttackMode::kMpelm
                 ? cfg.attack.config.InitialGamma(s.epsilon)
                 : 0.0;
  s.m = cfg.attack.mode == AttackMode::kNone ? 0 : cfg.attack.config.m;
  s.beta1 = cfg.detector.beta1;
  s.seed = cfg.seed();
  s.initial_val_loss = result.initial_val_loss;
  s.final_val_loss = result.rounds.empty() ? result.initial_val_loss
                                           : result.rounds.back().global_val_loss;
  s.episodes_executed = static_cast<int>(result.rounds.size());
  std::vector<EpisodeVerdicts> episodes;
  for (const RoundRecord& r : result.rounds) {
    if (r.aborted) ++s.aborted_episodes;
    if (!r.verdicts.empty()) {
      episodes.push_back(
          {r.verdicts, std::set<int>(r.compromised.begin(), r.compromised.end())});
    }
  }
  s.delta_spent = result.rounds.empty() ? 0.0 : result.rounds.back().delta_cumulative;
  s.d_acc = episodes.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : DetectionAccuracy(episodes);
  s.stopped_by_ledger = result.stopped_by_ledger;
  return s;
}

void WriteMetrics(const fs::path& dir, const std::string& name,
                  const ExperimentConfig& cfg, const TrainingResult& result) {
  fs::create_directories(dir);
  auto open = [&](std::string_view file) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    return out;
  };

  {
    auto out = open(kEpisodesFile);
    CsvWriter csv(out, kEpisodesSchema,
                  {"episode", "selected", "compromised", "m_active",
                   "submitted", "flagged", "aborted", "global_val_loss",
                   "d_acc"});
    for (const RoundRecord& r : result.rounds) {
      csv.Row({std::to_string(r.episode), JoinInts(r.selected, ';'),
               JoinInts(r.compromised, ';'), std::to_string(r.m_active),
               std::to_string(r.submitted.size()),
               std::to_string(r.flagged.size()), r.aborted ? "1" : "0",
               FormatDouble(r.global_val_loss),
               FormatDouble(EpisodeAccuracy(r))});
    }
  }
  {
    auto out = open(kLedgerFile);
    CsvWriter csv(out, kLedgerSchema,
                  {"episode", "delta_step", "delta_cumulative", "stopped"});
    for (const RoundRecord& r : result.rounds) {
      csv.Row({std::to_string(r.episode), FormatDouble(r.delta_step),
               FormatDouble(r.delta_cumulative), r.stopped ? "1" : "0"});
    }
  }
  {
    auto out = open(kAttackTraceFile);
    CsvWriter csv(out, kAttackTraceSchema,
                  {"episode", "compromised", "m_active", "gamma_t",
                   "gamma_current", "loss_ratio", "avg_compromised_val_loss"});
    for (const RoundRecord& r : result.rounds) {
      csv.Row({std::to_string(r.episode), JoinInts(r.compromised, ';'),
               std::to_string(r.m_active), FormatDouble(r.gamma_t),
               FormatDouble(r.gamma_current), FormatDouble(r.loss_ratio),
               FormatDouble(r.avg_compromised_val_loss)});
    }
  }
  {
    auto out = open(kDetectionFile);
    CsvWriter csv(out, kDetectionSchema,
                  {"episode", "node_id", "malicious", "flagged", "rate", "d",
                   "e1", "loss_update", "loss_standard", "e2"});
    for (const RoundRecord& r : result.rounds) {
      for (const Verdict& v : r.verdicts) {
        const bool malicious = std::binary_search(
            r.compromised.begin(), r.compromised.end(), v.node_id);
        csv.Row({std::to_string(r.episode), std::to_string(v.node_id),
                 malicious ? "1" : "0", v.flagged ? "1" : "0",
                 FormatDouble(v.rate), FormatDouble(v.d), FormatDouble(v.e1),
                 FormatDouble(v.loss_update), FormatDouble(v.loss_standard),
                 FormatDouble(v.e2)});
      }
    }
  }
  {
    const RunSummary s = Summarize(name, cfg, result);
    auto out = open(kSummaryFile);
    CsvWriter csv(out, kSummarySchema,
                  {"name", "attack_mode", "detector", "epsilon", "clip_c",
                   "gamma0", "m", "beta1", "seed", "initial_val_loss",
                   "final_val_loss", "episodes_executed", "aborted_episodes",
                   "delta_spent", "d_acc", "stopped_by_ledger"});
    csv.Row({s.name, s.attack_mode, s.detector, FormatDouble(s.epsilon),
             FormatDouble(s.clip_c), FormatDouble(s.gamma0),
             std::to_string(s.m), FormatDouble(s.beta1), std::to_string(s.seed),
             FormatDouble(s.initial_val_loss), FormatDouble(s.final_val_loss),
             std::to_string(s.episodes_executed),
             std::to_string(s.aborted_episodes), FormatDouble(s.delta_spent),
             FormatDouble(s.d_acc), s.stopped_by_ledger ? "1" : "0"});
  }
  WriteText(dir / kResolvedConfigFile, DumpConfig(cfg));
}

MetricsBundle RunExperiment(const ExperimentConfig& cfg, const fs::path& dir,
                            const std::string& name) {
  cfg.Validate();
  const std::string started = NowUtc();
  Federation fed(cfg.federation, LoadFederatedData(cfg), cfg.attack,
                 cfg.detector);
  const TrainingResult result = fed.Run();
  WriteMetrics(dir, name, cfg, result);
  WriteText(dir / kTimestampFile,
            "started = " + started + "\nfinished = " + NowUtc() + "\n");
  return {dir, Summarize(name, cfg, result)};
}

std::vector<std::string> PresetNames() {
  return {"benign",      "fig4-small", "fig5-small", "fig6-small",
          "fig7-small",  "rdp",        "smoke"};
}

ExperimentConfig PresetBase(std::string_view preset) {
  ExperimentConfig c = DeskBase();
  if (preset == "benign" || preset == "fig4-small") {
    SetPrivacy(c, 0.7, 0.2);
  } else if (preset == "fig5-small" || preset == "fig6-small" ||
             preset == "fig7-small") {
    SetPrivacy(c, 0.7, 0.005);
  } else if (preset == "rdp") {
    c.synthetic_n = 10000;
    c.federation.episodes = 20;
    SetPrivacy(c, 0.7, 0.05);
    c.attack.mode = AttackMode::kMpelm;
    c.attack.config.m = 1;
  } else if (preset == "smoke") {
    c.synthetic_n = 2000;
    c.federation.num_nodes = 20;
    c.federation.participants = 6;
    c.federation.episodes = 5;
    SetPrivacy(c, 0.7, 0.005);
  } else {
    throw ConfigError("--preset: unknown preset '" + std::string(preset) + "'");
  }
  return c;
}

std::vector<PresetRun> ExpandPreset(std::string_view preset,
                                    const ExperimentConfig& base) {
  std::vector<PresetRun> runs;
  if (preset == "benign") {
    ExperimentConfig c = base;
    c.attack = {};
    runs.push_back({"benign", c});
  } else if (preset == "fig4-small") {
    for (double eps : {0.5, 0.7, 1.0}) {
      ExperimentConfig c = base;
      SetPrivacy(c, eps, base.federation.privacy.clip_c);
      c.attack = {};
      runs.push_back({"eps" + Num(eps) + "_m0", c});
      for (int m : {1, 2, 3}) {
        for (double gamma : {2.0, 3.0}) {
          ExperimentConfig a = c;
          a.attack.mode = AttackMode::kMpelm;
          a.attack.config = base.attack.config;
          a.attack.config.m = m;
          a.attack.config.gamma0 = gamma;
          runs.push_back({"eps" + Num(eps) + "_m" + std::to_string(m) + "_g" +
                              Num(gamma),
                          a});
        }
      }
    }
  } else if (preset == "fig5-small") {
    runs = DetectionGrid(base, DetectorKind::kNorm);
  } else if (preset == "fig6-small") {
    runs = DetectionGrid(base, DetectorKind::kAccuracy);
  } else if (preset == "fig7-small") {
    runs = DetectionGrid(base, DetectorKind::kMix);
  } else if (preset == "smoke") {
    for (AttackMode mode : {AttackMode::kRmd, AttackMode::kMpelm}) {
      ExperimentConfig c = base;
      c.attack.mode = mode;
      c.attack.config.m = 1;
      c.detector.kind = DetectorKind::kMix;
      runs.push_back({"mix_" + std::string(ToString(mode)), c});
    }
  } else if (preset == "rdp") {
    throw ConfigError(
        "--preset: 'rdp' configures rdp-tables and rdp-train only");
  } else {
    throw ConfigError("--preset: unknown preset '" + std::string(preset) + "'");
  }
  for (const PresetRun& r : runs) r.config.Validate();
  return runs;
}

std::vector<MetricsBundle> RunPreset(std::string_view preset,
                                     const ExperimentConfig& base,
                                     const fs::path& out) {
  std::vector<MetricsBundle> bundles;
  for (const PresetRun& run : ExpandPreset(preset, base)) {
    bundles.push_back(RunExperiment(run.config, out / run.name, run.name));
  }
  return bundles;
}

RunSummary ReadSummary(const fs::path& dir) {
  const CsvTable t = ReadCsvFile(
      (dir / kSummaryFile).string(), kSummarySchema,
      {"name", "attack_mode", "detector", "epsilon", "clip_c", "gamma0", "m",
       "beta1", "seed", "initial_val_loss", "final_val_loss",
       "episodes_executed", "aborted_episodes", "delta_spent", "d_acc",
       "stopped_by_ledger"});
  if (t.rows.size() != 1) {
    throw SchemaError((dir / kSummaryFile).string() + ": expected one row");
  }
  RunSummary s;
  s.name = t.Cell(0, "name");
  s.attack_mode = t.Cell(0, "attack_mode");
  s.detector = t.Cell(0, "detector");
  s.epsilon = t.Number(0, "epsilon");
  s.clip_c = t.Number(0, "clip_c");
  s.gamma0 = t.Number(0, "gamma0");
  s.m = static_cast<int>(t.Number(0, "m"));
  s.beta1 = t.Number(0, "beta1");
  s.seed = std::stoull(t.Cell(0, "seed"));
  s.initial_val_loss = t.Number(0, "initial_val_loss");
  s.final_val_loss = t.Number(0, "final_val_loss");
  s.episodes_executed = static_cast<int>(t.Number(0, "episodes_executed"));
  s.aborted_episodes = static_cast<int>(t.Number(0, "aborted_episodes"));
  s.delta_spent = t.Number(0, "delta_spent");
  s.d_acc = t.Number(0, "d_acc");
  s.stopped_by_ledger = t.Cell(0, "stopped_by_ledger") == "1";
  return s;
}

RunSummary RecomputeSummary(const fs::path& dir) {
  RunSummary s = ReadSummary(dir);
  const CsvTable episodes =
      ReadCsvFile((dir / kEpisodesFile).string(), kEpisodesSchema,
                  {"episode", "aborted", "global_val_loss"});
  const CsvTable ledger =
      ReadCsvFile((dir / kLedgerFile).string(), kLedgerSchema,
                  {"episode", "delta_cumulative", "stopped"});
  const CsvTable detection =
      ReadCsvFile((dir / kDetectionFile).string(), kDetectionSchema,
                  {"episode", "node_id", "malicious", "flagged"});
  s.episodes_executed = static_cast<int>(episodes.rows.size());
  s.aborted_episodes = 0;
  for (std::size_t i = 0; i < episodes.rows.size(); ++i) {
    if (episodes.Cell(i, "aborted") == "1") ++s.aborted_episodes;
  }
  s.final_val_loss =
      episodes.rows.empty()
          ? s.initial_val_loss
          : episodes.Number(episodes.rows.size() - 1, "global_val_loss");
  s.delta_spent = ledger.rows.empty()
                      ? 0.0
                      : ledger.Number(ledger.rows.size() - 1, "delta_cumulative");
  s.stopped_by_ledger =
      !ledger.rows.empty() && ledger.Cell(ledger.rows.size() - 1, "stopped") == "1";

  std::map<int, EpisodeVerdicts> by_episode;
  for (std::size_t i = 0; i < detection.rows.size(); ++i) {
    EpisodeVerdicts& ep =
        by_episode[static_cast<int>(detection.Number(i, "episode"))];
    Verdict v;
    v.node_id = static_cast<int>(detection.Number(i, "node_id"));
    v.flagged = detection.Cell(i, "flagged") == "1";
    ep.verdicts.push_back(v);
    if (detection.Cell(i, "malicious") == "1") ep.malicious.insert(v.node_id);
  }
  std::vector<EpisodeVerdicts> eps;
  for (auto& [episode, ep] : by_episode) eps.push_back(std::move(ep));
  s.d_acc = eps.empty() ? std::numeric_limits<double>::quiet_NaN()
                        : DetectionAccuracy(eps);
  return s;
}

std::vector<RunSummary> CollectRuns(const std::vector<fs::path>& roots) {
  std::vector<fs::path> dirs;
  for (const fs::path& root : roots) {
    if (!fs::exists(root)) {
      throw std::runtime_error("no such directory: " + root.string());
    }
    if (fs::exists(root / kSummaryFile)) dirs.push_back(root);
    if (!fs::is_directory(root)) continue;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && entry.path().filename() == kSummaryFile &&
          entry.path().parent_path() != root) {
        dirs.push_back(entry.path().parent_path());
      }
    }
  }
  std::sort(dirs.begin(), dirs.end());
  dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());
  std::vector<RunSummary> runs;
  for (const fs::path& dir : dirs) {
    RunSummary stored = ReadSummary(dir);
    if (!SummaryEqual(stored, RecomputeSummary(dir))) {
      throw SchemaError(dir.string() +
                        ": summary.csv disagrees with the per-episode CSVs");
    }
    runs.push_back(std::move(stored));
  }
  return runs;
}

std::vector<ReportGroup> GroupRuns(const std::vector<RunSummary>& runs) {
  using Key = std::tuple<std::string, std::string, double, double, double, int,
                         double>;
  struct Acc {
    int n = 0;
    double loss = 0.0, dacc = 0.0, delta = 0.0;
  };
  std::map<Key, Acc> groups;
  for (const RunSummary& r : runs) {
    Acc& a = groups[{r.attack_mode, r.detector, r.epsilon, r.clip_c, r.gamma0,
                     r.m, r.detector == "off" ? 0.0 : r.beta1}];
    ++a.n;
    a.loss += r.final_val_loss;
    a.dacc += r.d_acc;
    a.delta += r.delta_spent;
  }
  std::vector<ReportGroup> out;
  for (const auto& [key, a] : groups) {
    ReportGroup g;
    std::tie(g.attack_mode, g.detector, g.epsilon, g.clip_c, g.gamma0, g.m,
             g.beta1) = key;
    g.runs = a.n;
    g.mean_final_loss = a.loss / a.n;
    g.mean_d_acc = a.dacc / a.n;
    g.mean_delta_spent = a.delta / a.n;
    out.push_back(g);
  }
  return out;
}

void WriteReportCsv(std::ostream& out, const std::vector<ReportGroup>& groups) {
  CsvWriter csv(out, kReportSchema,
                {"attack_mode", "detector", "epsilon", "clip_c", "gamma0", "m",
                 "beta1", "runs", "mean_final_loss", "mean_d_acc",
                 "mean_delta_spent"});
  for (const ReportGroup& g : groups) {
    csv.Row({g.attack_mode, g.detector, FormatDouble(g.epsilon),
             FormatDouble(g.clip_c), FormatDouble(g.gamma0),
             std::to_string(g.m), FormatDouble(g.beta1), std::to_string(g.runs),
             FormatDouble(g.mean_final_loss), FormatDouble(g.mean_d_acc),
             FormatDouble(g.mean_delta_spent)});
  }
}

std::string FormatReport(const std::vector<ReportGroup>& groups) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "attack" << std::setw(10) << "detector"
      << std::right << std::setw(8) << "eps" << std::setw(8) << "clip"
      << std::setw(8) << "gamma0" << std::setw(5) << "m" << std::setw(7)
      << "beta1" << std::setw(6) << "runs" << std::setw(14) << "final_loss"
      << std::setw(9) << "D_acc" << '\n';
  for (const ReportGroup& g : groups) {
    out << std::left << std::setw(8) << g.attack_mode << std::setw(10)
        << g.detector << std::right << std::setw(8) << g.epsilon << std::setw(8)
        << g.clip_c << std::setw(8) << g.gamma0 << std::setw(5) << g.m
        << std::setw(7) << g.beta1 << std::setw(6) << g.runs << std::setw(14)
        << std::setprecision(6) << g.mean_final_loss << std::setw(9)
        << std::fixed << std::setprecision(2) << g.mean_d_acc
        << std::defaultfloat << '\n';
  }

  // D_acc of the adaptive attack against the random baseline, per detector
  // setting.
  std::map<std::tuple<std::string, double, double, int>, std::pair<double, double>>
      pairs;
  for (const ReportGroup& g : groups) {
    if (g.detector == "off" || g.attack_mode == "none") continue;
    auto& p = pairs.try_emplace({g.detector, g.epsilon, g.beta1, g.m},
                                std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN())
                  .first->second;
    (g.attack_mode == "rmd" ? p.first : p.second) = g.mean_d_acc;
  }
  bool header = false;
  for (const auto& [key, p] : pairs) {
    if (std::isnan(p.first) || std::isnan(p.second)) continue;
    if (!header) {
      out << "\n" << std::left << std::setw(10) << "detector" << std::right
          << std::setw(8) << "eps" << std::setw(7) << "beta1" << std::setw(5)
          << "m" << std::setw(11) << "D_acc rmd" << std::setw(13)
          << "D_acc mpelm" << std::setw(8) << "gap" << '\n';
      header = true;
    }
    const auto& [det, eps, beta1, m] = key;
    out << std::left << std::setw(10) << det << std::right << std::setw(8) << eps
        << std::setw(7) << beta1 << std::setw(5) << m << std::fixed
        << std::setprecision(2) << std::setw(11) << p.first << std::setw(13)
        << p.second << std::setw(8) << p.first - p.second << std::defaultfloat
        << '\n';
  }
  return out.str();
}

LossTables GenerateTables(const ExperimentConfig& cfg) {
  cfg.Validate();
  if (cfg.attack.config.m < 1) {
    throw ConfigError("attack.m: loss tables need at least one attacker");
  }
  LossTableSpec spec;
  spec.epsilon_grid = cfg.rdp_grid;
  spec.gamma_values = cfg.rdp_gammas;
  spec.seeds = cfg.RdpSeeds();
  spec.federation = cfg.federation;
  spec.attack = cfg.attack.config;
  return GenerateLossTables(
      spec,
      [&cfg](std::uint64_t seed) {
        ExperimentConfig c = cfg;
        c.federation.seed = seed;
        return LoadFederatedData(c);
      },
      cfg.federation.execution);
}

}  // namespace ldpfl
