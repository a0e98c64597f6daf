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

#include "ldpfl/acceptance.h"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>

#include "ldpfl/csv.h"
#include "ldpfl/detection.h"
#include "ldpfl/dp.h"
#include "ldpfl/experiment.h"
#include "ldpfl/federation.h"
#include "ldpfl/model.h"
#include "ldpfl/rdp.h"
#include "ldpfl/rng.h"

namespace ldpfl {
namespace {

namespace fs = std::filesystem;

constexpr int kSeeds = 5;

std::string Fmt(const char* format, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), format, a);
  return buf;
}

std::string Join(const std::vector<double>& v, const char* format = "%.6g") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += Fmt(format, v[i]);
  }
  return s;
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

template <typename Fn>
CriterionResult Timed(int id, const char* name, double budget, Fn&& body) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  r.budget_seconds = budget;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count();
  if (r.passed && r.seconds > budget) {
    r.passed = false;
    r.detail += "; exceeded runtime budget";
  }
  return r;
}

TrainingResult Train(const ExperimentConfig& cfg) {
  cfg.Validate();
  Federation fed(cfg.federation, LoadFederatedData(cfg), cfg.attack,
                 cfg.detector);
  return fed.Run();
}

double FinalLoss(const ExperimentConfig& cfg) {
  const TrainingResult result = Train(cfg);
  return result.rounds.back().global_val_loss;
}

ExperimentConfig WithSeed(ExperimentConfig cfg, int seed) {
  cfg.federation.seed = static_cast<std::uint64_t>(seed);
  return cfg;
}

ExperimentConfig WithEpsilon(ExperimentConfig cfg, double epsilon) {
  SetConfigValue(cfg, "privacy.epsilon", FormatDouble(epsilon));
  return cfg;
}

ExperimentConfig Mpelm(ExperimentConfig cfg, int m, double gamma0,
                       bool adaptive) {
  cfg.attack.mode = AttackMode::kMpelm;
  cfg.attack.config.m = m;
  cfg.attack.config.gamma0 = gamma0;
  cfg.attack.config.adaptive = adaptive;
  return cfg;
}

bool SameBits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) {
      return false;
    }
  }
  return true;
}

std::string ReadBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Hand-built deterministic MDP: next state and reward per (state, action).
constexpr int kHandNext[3][kNumActions] = {
    {0, 0, 1, 1, 2}, {1, 0, 2, 2, 0}, {2, 1, 0, 0, 1}};
constexpr double kHandReward[3][kNumActions] = {
    {1.0, 0.5, 2.0, 0.0, 3.0}, {0.2, 1.5, 0.7, 2.5, 0.1},
    {4.0, 0.3, 1.1, 0.9, 2.2}};

}  // namespace

std::string FormatResult(const CriterionResult& r) {
  char head[160];
  std::snprintf(head, sizeof(head), "%s %2d %s (%.1fs / %.0fs): ",
                r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                r.budget_seconds);
  return head + r.detail;
}

CriterionResult CheckGradientCorrectness() {
  return Timed(1, "gradient-correctness", 10, [](CriterionResult& r) {
    Substream rng(20261016, StreamTag::kInit);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      std::vector<int> hidden = {1 + static_cast<int>(rng.Below(8))};
      if (k % 3 != 0) hidden.push_back(1 + static_cast<int>(rng.Below(6)));
      const Mlp model(hidden);
      ParamVector params = model.InitParams(1000 + k);
      for (double& p : params) p += 0.1 * rng.Normal();
      std::vector<Sample> batch(1 + rng.Below(8));
      for (Sample& s : batch) {
        for (double& f : s.features) f = rng.Uniform();
        s.target = rng.Uniform();
      }
      const auto grad = model.Gradient(params, batch);
      const double h = 1e-5;
      for (std::size_t j = 0; j < params.size(); ++j) {
        ParamVector plus = params, minus = params;
        plus[j] += h;
        minus[j] -= h;
        const double fd =
            (model.MseLoss(plus, batch) - model.MseLoss(minus, batch)) / (2 * h);
        const double denom =
            std::max({std::abs(grad[j]), std::abs(fd), 1e-6});
        worst = std::max(worst, std::abs(grad[j] - fd) / denom);
      }
    }
    r.passed = worst < 1e-4;
    r.detail = "20 fixtures, max relative error " + Fmt("%.3g", worst) +
               " (bound 1e-4)";
  });
}

CriterionResult CheckNoiseCalibration(const SigmaFn& calibrate) {
  return Timed(2, "dp-calibration", 30, [&](CriterionResult& r) {
    const double oracle = std::sqrt(2.0 * std::log(1250.0)) / 0.7;
    const double sigma = calibrate(0.7, 0.001, 1.0);
    const bool sigma_ok = std::abs(sigma - oracle) <= 1e-9;

    const int n = 100000;
    PrivacySpec spec{0.7, 0.001, 1.0, sigma};
    ModelUpdate zero{ParamVector(n, 0.0), 0, 1};
    const ModelUpdate noisy = AddNoise(zero, spec, Substream(7, StreamTag::kNoise));
    double mean = 0.0;
    for (double x : noisy.delta) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : noisy.delta) var += (x - mean) * (x - mean);
    var /= n - 1;
    const bool mean_ok = std::abs(mean) <= 4.0 * oracle / std::sqrt(n);
    const double var_ratio = var / (oracle * oracle);
    const bool var_ok = std::abs(var_ratio - 1.0) <= 0.05;
    r.passed = sigma_ok && mean_ok && var_ok;
    r.detail = "sigma " + Fmt("%.12f", sigma) + " vs " + Fmt("%.12f", oracle) +
               "; mean " + Fmt("%.4g", mean) + " (bound " +
               Fmt("%.4g", 4.0 * oracle / std::sqrt(n)) + "); var/sigma^2 " +
               Fmt("%.4f", var_ratio);
  });
}

CriterionResult CheckBenignConvergence() {
  return Timed(3, "benign-convergence", 120, [](CriterionResult& r) {
    ExperimentConfig base = WithEpsilon(PresetBase("benign"), 1e6);
    std::vector<double> ratios;
    for (int seed = 1; seed <= kSeeds; ++seed) {
      const TrainingResult result = Train(WithSeed(base, seed));
      ratios.push_back(result.rounds.back().global_val_loss /
                       result.initial_val_loss);
    }
    const double worst = *std::max_element(ratios.begin(), ratios.end());
    r.passed = worst < 0.5 && std::all_of(ratios.begin(), ratios.end(),
                                          [](double x) { return x == x; });
    r.detail = "final/initial loss per seed: " + Join(ratios, "%.4f") +
               " (bound < 0.5)";
  });
}

CriterionResult CheckPrivacyUtility() {
  return Timed(4, "privacy-utility-direction", 600, [](CriterionResult& r) {
    const ExperimentConfig base = PresetBase("benign");
    std::vector<double> means;
    for (double eps : {0.5, 0.7, 1.0}) {
      std::vector<double> losses;
      for (int seed = 1; seed <= kSeeds; ++seed) {
        losses.push_back(FinalLoss(WithSeed(WithEpsilon(base, eps), seed)));
      }
      means.push_back(Mean(losses));
    }
    r.passed = means[0] >= means[1] && means[1] >= means[2];
    r.detail = "mean final loss at eps 0.5/0.7/1.0: " + Join(means);
  });
}

CriterionResult CheckSingleAttackerDamage() {
  return Timed(5, "single-attacker-damage", 600, [](CriterionResult& r) {
    const ExperimentConfig base = WithEpsilon(PresetBase("benign"), 0.7);
    int wins = 0;
    std::vector<double> benign, attacked;
    for (int seed = 1; seed <= kSeeds; ++seed) {
      benign.push_back(FinalLoss(WithSeed(base, seed)));
      attacked.push_back(
          FinalLoss(WithSeed(Mpelm(base, 1, -1.0, true), seed)));
      if (attacked.back() > benign.back()) ++wins;
    }
    r.passed = wins >= 4;
    r.detail = std::to_string(wins) + "/5 pairs attacked > benign; benign " +
               Join(benign) + "; attacked " + Join(attacked);
  });
}

CriterionResult CheckGammaMonotonicDamage() {
  return Timed(6, "gamma-monotonic-damage", 900, [](CriterionResult& r) {
    const ExperimentConfig base = WithEpsilon(PresetBase("benign"), 0.7);
    std::vector<double> means;
    for (double gamma : {0.0, 2.0, 3.0}) {
      std::vector<double> losses;
      for (int seed = 1; seed <= kSeeds; ++seed) {
        losses.push_back(
            FinalLoss(WithSeed(Mpelm(base, 1, gamma, false), seed)));
      }
      means.push_back(Mean(losses));
    }
    r.passed = means[2] >= means[1] && means[1] >= means[0];
    r.detail = "mean final loss at gamma 0/2/3 (m=1, fixed gamma): " + Join(means);
  });
}

CriterionResult CheckStealthDirection() {
  return Timed(7, "stealth-direction", 1200, [](CriterionResult& r) {
    ExperimentConfig base = PresetBase("fig5-small");
    base.detector.beta1 = 1.0;
    base.detector.orientation = Orientation::kReversed;
    const int m = base.federation.participants / 10;
    bool ok = true;
    std::string detail = "m=" + std::to_string(m) + ";";
    for (DetectorKind kind :
         {DetectorKind::kNorm, DetectorKind::kAccuracy, DetectorKind::kMix}) {
      std::map<AttackMode, std::vector<double>> dacc;
      for (AttackMode mode : {AttackMode::kRmd, AttackMode::kMpelm}) {
        for (int seed = 1; seed <= kSeeds; ++seed) {
          ExperimentConfig c = WithSeed(base, seed);
          c.detector.kind = kind;
          c.attack.mode = mode;
          c.attack.config.m = m;
          dacc[mode].push_back(Summarize("c7", c, Train(c)).d_acc);
        }
      }
      const double rmd = Mean(dacc[AttackMode::kRmd]);
      const double mpelm = Mean(dacc[AttackMode::kMpelm]);
      ok = ok && mpelm <= rmd;
      detail += " " + std::string(ToString(kind)) + " rmd " + Fmt("%.2f", rmd) +
                " mpelm " + Fmt("%.2f", mpelm) + " gap " +
                Fmt("%.2f", rmd - mpelm) + ";";
    }
    r.passed = ok;
    r.detail = detail;
  });
}

CriterionResult CheckGammaZeroCollapse() {
  return Timed(8, "gamma-zero-collapse", 60, [](CriterionResult& r) {
    bool ok = true;
    std::string detail;
    for (DetectorKind kind : {DetectorKind::kOff, DetectorKind::kMix}) {
      ExperimentConfig benign = PresetBase("smoke");
      benign.detector.kind = kind;
      const ExperimentConfig pinned = Mpelm(benign, 2, 0.0, false);
      const TrainingResult a = Train(benign);
      const TrainingResult b = Train(pinned);
      bool same = a.rounds.size() == b.rounds.size() &&
                  SameBits(a.final_params, b.final_params);
      for (std::size_t t = 0; same && t < a.rounds.size(); ++t) {
        const RoundRecord& x = a.rounds[t];
        const RoundRecord& y = b.rounds[t];
        same = x.selected == y.selected && x.flagged == y.flagged &&
               x.submitted == y.submitted &&
               SameBits(x.global_params_after, y.global_params_after) &&
               std::bit_cast<std::uint64_t>(x.global_val_loss) ==
                   std::bit_cast<std::uint64_t>(y.global_val_loss);
      }
      ok = ok && same;
      detail += std::string(ToString(kind)) + (same ? " bitwise equal; " : " DIFFERS; ");
    }
    r.passed = ok;
    r.detail = detail + "m=2, gamma pinned to 0";
  });
}

CriterionResult CheckRdpConvergence() {
  return Timed(9, "rdp-convergence", 300, [](CriterionResult& r) {
    const LossTables tables = GenerateTables(PresetBase("rdp"));
    bool ok = true;
    std::string detail;
    for (double alpha : {0.01, 0.001, 0.0001}) {
      for (double zeta : {0.15, 0.2, 0.5, 1.0}) {
        RdpHyper h;
        h.alpha = alpha;
        h.zeta = zeta;
        const RdpResult res = TrainRdp(tables, h, 1);
        const std::size_t window = res.trace.size() / 10;
        double dq = 0.0, mean = 0.0, var = 0.0;
        for (std::size_t i = res.trace.size() - window; i < res.trace.size(); ++i) {
          dq += res.trace[i].mean_abs_delta_q;
          mean += res.trace[i].cumulative_reward;
        }
        dq /= window;
        mean /= window;
        for (std::size_t i = res.trace.size() - window; i < res.trace.size(); ++i) {
          var += std::pow(res.trace[i].cumulative_reward - mean, 2);
        }
        const double rel_std = std::sqrt(var / window) / mean;
        const bool bounded = zeta < 1.0;
        if (bounded) ok = ok && dq < 1e-3 && rel_std < 0.01;
        char line[160];
        std::snprintf(line, sizeof(line),
                      " a=%g z=%g dQ=%.2e R=%.2f sd/R=%.4f%s;", alpha, zeta, dq,
                      mean, rel_std, bounded ? "" : " (not asserted)");
        detail += line;
      }
    }
    r.passed = ok;
    r.detail = detail;
  });
}

CriterionResult CheckQLearningExactness() {
  return Timed(10, "q-learning-exactness", 5, [](CriterionResult& r) {
    RdpHyper h;
    h.alpha = 0.5;
    h.zeta = 0.5;
    h.max_episodes = 20000;
    TabularMdp mdp;
    mdp.num_states = 3;
    mdp.next = [](int s, RdpAction a) {
      return kHandNext[s][static_cast<int>(a)];
    };
    mdp.reward = [](int s, RdpAction a) {
      return kHandReward[s][static_cast<int>(a)];
    };
    const QLearningResult learned = QLearn(mdp, h, 3);

    double q[3][kNumActions] = {};
    for (int iter = 0; iter < 5000; ++iter) {
      double next[3][kNumActions];
      for (int s = 0; s < 3; ++s) {
        for (int a = 0; a < kNumActions; ++a) {
          const int sn = kHandNext[s][a];
          const double best = *std::max_element(q[sn], q[sn] + kNumActions);
          next[s][a] = kHandReward[s][a] + h.zeta * best;
        }
      }
      std::copy(&next[0][0], &next[0][0] + 3 * kNumActions, &q[0][0]);
    }
    double worst = 0.0;
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < kNumActions; ++a) {
        worst = std::max(worst, std::abs(learned.q.values[s][a] - q[s][a]));
      }
    }
    r.passed = worst <= 1e-6;
    r.detail = "max |Q - Q*| = " + Fmt("%.3g", worst) + " (bound 1e-6)";
  });
}

CriterionResult CheckDetectorOracles() {
  return Timed(11, "detector-oracles", 30, [](CriterionResult& r) {
    auto updates = [](std::vector<std::vector<double>> rows) {
      std::vector<ModelUpdate> out;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        out.push_back({rows[i], static_cast<int>(i), 1});
      }
      return out;
    };
    std::vector<std::string> failures;
    auto expect = [&](bool cond, const char* what) {
      if (!cond) failures.push_back(what);
    };
    DetectorConfig cfg;
    cfg.beta1 = 1.0;
    cfg.d_max = 10.0;
    cfg.beta2 = 0.1;

    const auto st = ComparisonStandard(updates({{2, 0}, {0, 0}, {0, 0}}), 0);
    expect(st == std::vector<double>({0.0, 0.0}), "standard of {(2,0),(0,0),(0,0)}");

    const auto same = updates({{1, 2}, {1, 2}, {1, 2}});
    const Verdict v0 = NormRate(same, 1, cfg);
    expect(v0.d == 0.0 && v0.e1 == 0.0 && v0.rate == 1.0 && !v0.flagged,
           "identical updates");

    const Verdict v1 = NormRate(updates({{1, 0}, {1, 0}, {1, 0}, {3, 0}}), 3, cfg);
    expect(v1.d == 4.0 && v1.e1 == 4.0 && v1.rate == 0.0 && v1.flagged,
           "norm fixture d=4 e1=4 rate=0");

    const Verdict v2 = NormRate(updates({{1, 0}, {1, 0}, {2, 0}}), 2, cfg);
    expect(v2.e1 == 1.0 && v2.rate == 1.0 && !v2.flagged, "e1 = beta1 boundary");

    for (Orientation o : {Orientation::kReversed, Orientation::kAsWritten}) {
      DetectorConfig c = cfg;
      c.orientation = o;
      const Verdict eq = AccuracyRateFromLosses(1.3, 1.3, c);
      expect(eq.e2 == 0.0 && eq.rate == 1.0 && !eq.flagged, "equal losses");
    }
    DetectorConfig rev = cfg;
    rev.orientation = Orientation::kReversed;
    const Verdict a1 = AccuracyRateFromLosses(2.0, 1.0, rev);
    expect(a1.e2 == 0.5 && a1.rate == 0.5 && a1.flagged, "reversed 2.0 vs 1.0");
    DetectorConfig lit = cfg;
    lit.orientation = Orientation::kAsWritten;
    const Verdict a2 = AccuracyRateFromLosses(1.0, 2.0, lit);
    expect(a2.e2 == 0.5 && a2.rate == 0.5 && a2.flagged, "as_written 1.0 vs 2.0");

    EpisodeVerdicts ep;
    for (int i = 0; i < 10; ++i) {
      Verdict v;
      v.node_id = i;
      v.flagged = i == 0 || i == 9;
      ep.verdicts.push_back(v);
    }
    ep.malicious = {0, 1};
    expect(DetectionAccuracy(std::span<const EpisodeVerdicts>(&ep, 1)) == 80.0,
           "D_acc 80");

    // Mix equals the union of the two detectors on random episodes.
    Substream rng(11, StreamTag::kInit);
    const Mlp model({3});
    int union_failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 2 + rng.Below(7);
      const double scale = 0.01 + rng.Uniform();
      std::vector<ModelUpdate> ups;
      for (std::size_t i = 0; i < n; ++i) {
        ParamVector d(model.param_count());
        for (double& x : d) x = scale * rng.Normal();
        if (rng.Uniform() < 0.3) {
          for (double& x : d) x *= 5.0;
        }
        ups.push_back({d, static_cast<int>(3 * i + 1), 1});
      }
      ParamVector global = model.InitParams(trial);
      std::vector<Sample> val(10);
      for (Sample& s : val) {
        for (double& f : s.features) f = rng.Uniform();
        s.target = rng.Uniform();
      }
      DetectorConfig c;
      c.beta1 = 0.5 + 4.5 * rng.Uniform();
      c.beta2 = 0.5 * rng.Uniform();
      c.orientation =
          rng.Uniform() < 0.5 ? Orientation::kReversed : Orientation::kAsWritten;
      const DetectionContext ctx{&model, global, val};
      c.kind = DetectorKind::kNorm;
      std::set<int> expected = FlaggedIds(EvaluateSerial(ups, c, ctx));
      c.kind = DetectorKind::kAccuracy;
      const std::set<int> acc = FlaggedIds(EvaluateSerial(ups, c, ctx));
      expected.insert(acc.begin(), acc.end());
      c.kind = DetectorKind::kMix;
      const auto mix = EvaluateSerial(ups, c, ctx);
      bool good = FlaggedIds(mix) == expected && MixFilter(ups, c, ctx) == expected;
      for (const Verdict& v : mix) {
        good = good && v.rate >= 0.0 && v.rate <= 1.0 && v.flagged == (v.rate < 1.0);
      }
      if (!good) ++union_failures;
    }
    expect(union_failures == 0, "mix union fuzz");

    r.passed = failures.empty();
    r.detail = "9 fixtures, 1000 mix episodes";
    if (!r.passed) {
      r.detail += "; failed:";
      for (const auto& f : failures) r.detail += " [" + f + "]";
      r.detail += " union failures " + std::to_string(union_failures);
    } else {
      r.detail += ", all exact";
    }
  });
}

CriterionResult CheckDeterminism(const fs::path& work_dir, int parallel_threads) {
  return Timed(12, "determinism", 300, [&](CriterionResult& r) {
    fs::remove_all(work_dir / "determinism");
    const int saved_threads = omp_get_max_threads();
    std::size_t files = 0;
    std::vector<std::string> mismatches;
    for (const char* preset : {"smoke", "fig7-small"}) {
      const ExperimentConfig base = PresetBase(preset);
      std::vector<fs::path> legs;
      int leg = 0;
      for (ExecutionPolicy policy :
           {ExecutionPolicy::kSerial, ExecutionPolicy::kSerial,
            ExecutionPolicy::kParallel, ExecutionPolicy::kParallel}) {
        ExperimentConfig c = base;
        c.federation.execution = policy;
        omp_set_num_threads(policy == ExecutionPolicy::kParallel ? parallel_threads
                                                                 : 1);
        const fs::path out =
            work_dir / "determinism" / preset / ("leg" + std::to_string(leg++));
        RunPreset(preset, c, out);
        legs.push_back(out);
      }
      for (const PresetRun& run : ExpandPreset(preset, base)) {
        for (std::string_view file : MetricFiles()) {
          const std::string ref = ReadBytes(legs[0] / run.name / file);
          ++files;
          for (std::size_t l = 1; l < legs.size(); ++l) {
            if (ReadBytes(legs[l] / run.name / file) != ref) {
              mismatches.push_back(std::string(preset) + "/" + run.name + "/" +
                                   std::string(file));
            }
          }
        }
      }
    }
    omp_set_num_threads(saved_threads);
    r.passed = mismatches.empty();
    r.detail = std::to_string(files) +
               " metric files compared across 2 serial + 2 parallel runs (" +
               std::to_string(parallel_threads) + " threads)";
    for (const auto& m : mismatches) r.detail += "; differs: " + m;
  });
}

bool GammaTraceMatchesOracle(const GammaUpdateFn& update, std::string* detail) {
  AttackConfig cfg;
  cfg.rho = 0.1;
  AttackState state = InitAttackState(cfg, 0.7);
  const std::vector<double> losses = {1.0, 1.0, 2.0, 0.4};
  // Ratios 0, 1, 2, 0.3 against the running history mean.
  const std::vector<double> expected = {0.7, 0.63, 0.0, 0.63 * 1.03};
  bool ok = true;
  std::string trace;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    state = update(std::move(state), losses[t], cfg);
    ok = ok && std::abs(state.gamma_episode - expected[t]) <= 1e-12;
    trace += Fmt("%.6g ", state.gamma_episode);
  }
  AttackState low = InitAttackState(cfg, 0.7);
  low.episodic_losses = {1.0};
  low = update(std::move(low), 0.4, cfg);
  ok = ok && std::abs(low.gamma_episode - 0.728) <= 1e-12;
  if (detail) *detail = "gamma trace " + trace + Fmt("low-ratio step %.6g", low.gamma_episode);
  return ok;
}

std::vector<CriterionResult> RunAcceptance(
    const AcceptanceOptions& options,
    const std::function<void(const CriterionResult&)>& on_result) {
  const std::vector<std::function<CriterionResult()>> suite = {
      [] { return CheckGradientCorrectness(); },
      [] { return CheckNoiseCalibration(CalibrateSigma); },
      [] { return CheckBenignConvergence(); },
      [] { return CheckPrivacyUtility(); },
      [] { return CheckSingleAttackerDamage(); },
      [] { return CheckGammaMonotonicDamage(); },
      [] { return CheckStealthDirection(); },
      [] { return CheckGammaZeroCollapse(); },
      [] { return CheckRdpConvergence(); },
      [] { return CheckQLearningExactness(); },
      [] { return CheckDetectorOracles(); },
      [&] {
        return CheckDeterminism(options.work_dir, options.parallel_threads);
      },
  };
  std::vector<CriterionResult> results;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!options.only.empty() && !options.only.count(id)) continue;
    results.push_back(suite[i]());
    if (on_result) on_result(results.back());
  }
  return results;
}

}  // namespace ldpfl
