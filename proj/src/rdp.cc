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

#include "ldpfl/rdp.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ldpfl/csv.h"

namespace ldpfl {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> QuantileBins(std::span<const double> values, int num_bins) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(values.size());
  std::vector<int> bins;
  bins.reserve(values.size());
  for (double v : values) {
    const auto rank = static_cast<double>(
        std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    bins.push_back(std::min(num_bins - 1, static_cast<int>(rank * num_bins / n)));
  }
  return bins;
}

int Shift(RdpAction action) {
  switch (action) {
    case RdpAction::kStatic: return 0;
    case RdpAction::kDec1: return -1;
    case RdpAction::kDec2: return -2;
    case RdpAction::kInc1: return 1;
    case RdpAction::kInc2: return 2;
  }
  return 0;
}

}  // namespace

std::string_view ToString(RdpAction action) {
  switch (action) {
    case RdpAction::kStatic: return "static";
    case RdpAction::kDec1: return "dec1";
    case RdpAction::kDec2: return "dec2";
    case RdpAction::kInc1: return "inc1";
    case RdpAction::kInc2: return "inc2";
  }
  return "?";
}

double LossTables::AttackerLoss(std::size_t eps_index) const {
  const auto& row = m_l.at(eps_index);
  if (row.empty()) return kNaN;
  double sum = 0.0;
  for (double v : row) sum += v;
  return sum / static_cast<double>(row.size());
}

bool LossTables::complete() const {
  if (epsilon_grid.empty() || f_l.size() != epsilon_grid.size() ||
      m_l.size() != epsilon_grid.size()) {
    return false;
  }
  for (std::size_t e = 0; e < epsilon_grid.size(); ++e) {
    if (!(f_l[e] > 0.0) || !std::isfinite(f_l[e])) return false;
    if (m_l[e].size() != gamma_values.size() || m_l[e].empty()) return false;
    for (double v : m_l[e]) {
      if (!(v > 0.0) || !std::isfinite(v)) return false;
    }
  }
  return true;
}

void LossTables::Validate() const {
  if (!complete()) {
    throw std::invalid_argument(
        "loss tables incomplete: every cell must be finite and positive");
  }
}

LossTables BuildLossTables(std::vector<LossTableRow> rows) {
  LossTables t;
  std::set<double> eps_set, gamma_set;
  for (const auto& r : rows) {
    eps_set.insert(r.epsilon);
    gamma_set.insert(r.gamma);
  }
  t.epsilon_grid.assign(eps_set.begin(), eps_set.end());
  t.gamma_values.assign(gamma_set.begin(), gamma_set.end());
  auto eps_index = [&](double e) {
    return static_cast<std::size_t>(
        std::lower_bound(t.epsilon_grid.begin(), t.epsilon_grid.end(), e) -
        t.epsilon_grid.begin());
  };
  auto gamma_index = [&](double g) {
    return static_cast<std::size_t>(
        std::lower_bound(t.gamma_values.begin(), t.gamma_values.end(), g) -
        t.gamma_values.begin());
  };

  const std::size_t ne = t.epsilon_grid.size(), ng = t.gamma_values.size();
  std::vector<std::vector<double>> m_sum(ne, std::vector<double>(ng, 0.0));
  std::vector<std::vector<int>> m_count(ne, std::vector<int>(ng, 0));
  // f_l is recorded once per (epsilon, seed) even when repeated per gamma.
  std::vector<std::map<std::uint64_t, double>> f_by_seed(ne);
  for (const auto& r : rows) {
    const auto e = eps_index(r.epsilon);
    const auto g = gamma_index(r.gamma);
    m_sum[e][g] += r.m_l;
    ++m_count[e][g];
    f_by_seed[e].emplace(r.seed, r.f_l);
  }
  t.m_l.assign(ne, std::vector<double>(ng, kNaN));
  t.f_l.assign(ne, kNaN);
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t g = 0; g < ng; ++g) {
      if (m_count[e][g] > 0) t.m_l[e][g] = m_sum[e][g] / m_count[e][g];
    }
    if (!f_by_seed[e].empty()) {
      double s = 0.0;
      for (const auto& [seed, v] : f_by_seed[e]) s += v;
      t.f_l[e] = s / static_cast<double>(f_by_seed[e].size());
    }
  }
  t.m_l_max = -std::numeric_limits<double>::infinity();
  t.f_l_max = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < ne; ++e) {
    for (double v : t.m_l[e]) {
      if (std::isfinite(v)) t.m_l_max = std::max(t.m_l_max, v);
    }
    if (std::isfinite(t.f_l[e])) t.f_l_max = std::max(t.f_l_max, t.f_l[e]);
  }
  t.rows = std::move(rows);
  return t;
}

void WriteLossTablesCsv(std::ostream& out, const LossTables& tables) {
  CsvWriter csv(out, kLossTablesSchema,
                {"epsilon", "gamma", "seed", "m_l", "f_l"});
  for (const auto& r : tables.rows) {
    csv.Row({FormatDouble(r.epsilon), FormatDouble(r.gamma),
             std::to_string(r.seed), FormatDouble(r.m_l),
             FormatDouble(r.f_l)});
  }
}

LossTables ReadLossTablesCsv(std::istream& in) {
  CsvTable table = ReadCsv(in, kLossTablesSchema,
                           {"epsilon", "gamma", "seed", "m_l", "f_l"});
  std::vector<LossTableRow> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    LossTableRow r;
    r.epsilon = table.Number(i, "epsilon");
    r.gamma = table.Number(i, "gamma");
    r.seed = static_cast<std::uint64_t>(std::stoull(table.Cell(i, "seed")));
    r.m_l = table.Number(i, "m_l");
    r.f_l = table.Number(i, "f_l");
    rows.push_back(r);
  }
  return BuildLossTables(std::move(rows));
}

std::vector<double> DefaultEpsilonGrid() {
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(i / 10.0);
  return grid;
}

void RdpHyper::Validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("rdp.alpha must lie in (0, 1]");
  }
  if (!(zeta >= 0.0 && zeta <= 1.0)) {
    throw std::invalid_argument("rdp.zeta must lie in [0, 1]");
  }
  if (psi1 < 0.0 || psi2 < 0.0 || psi3 < 0.0) {
    throw std::invalid_argument("rdp.psi weights must be >= 0");
  }
  if (!(explore_min >= 0.0 && explore_min <= explore_start &&
        explore_start <= 1.0)) {
    throw std::invalid_argument("rdp exploration schedule out of range");
  }
  if (max_episodes < 1) throw std::invalid_argument("rdp.max_episodes >= 1");
  if (num_bins < 1) throw std::invalid_argument("rdp.num_bins >= 1");
}

double Reward(double m_l, double f_l, double epsilon, const LossTables& tables,
              const RdpHyper& hyper) {
  if (!(m_l != 0.0 && f_l != 0.0 && epsilon != 0.0)) {
    throw std::invalid_argument("reward: zero denominator");
  }
  return hyper.psi1 * tables.m_l_max / m_l + hyper.psi2 * tables.f_l_max / f_l +
         hyper.psi3 * (1.0 / epsilon);
}

RdpEnvironment::RdpEnvironment(const LossTables& tables,
                               const RdpHyper& hyper)
    : grid_(tables.epsilon_grid) {
  tables.Validate();
  hyper.Validate();
  const std::size_t n = grid_.size();
  std::vector<double> attacker(n);
  for (std::size_t e = 0; e < n; ++e) attacker[e] = tables.AttackerLoss(e);
  const auto m_bins = QuantileBins(attacker, hyper.num_bins);
  const auto f_bins = QuantileBins(tables.f_l, hyper.num_bins);
  for (std::size_t e = 0; e < n; ++e) {
    states_.push_back({m_bins[e], f_bins[e], static_cast<int>(e)});
    rewards_.push_back(
        Reward(attacker[e], tables.f_l[e], grid_[e], tables, hyper));
  }
}

int RdpEnvironment::NextIndex(int index, RdpAction action) const {
  return std::clamp(index + Shift(action), 0, num_states() - 1);
}

RdpState RdpEnvironment::Step(const RdpState& state, RdpAction action) const {
  return states_[NextIndex(state.epsilon_index, action)];
}

TabularMdp MakeMdp(const RdpEnvironment& env) {
  TabularMdp mdp;
  mdp.num_states = env.num_states();
  mdp.next = [&env](int s, RdpAction a) { return env.NextIndex(s, a); };
  mdp.reward = [&env](int s, RdpAction a) {
    return env.RewardAt(env.NextIndex(s, a));
  };
  return mdp;
}

QTable::QTable(int num_states)
    : values(static_cast<std::size_t>(num_states)),
      visits(static_cast<std::size_t>(num_states)) {
  for (auto& row : values) row.fill(0.0);
  for (auto& row : visits) row.fill(0);
}

RdpAction QTable::Greedy(int state) const {
  const auto& row = values[static_cast<std::size_t>(state)];
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (row[a] > row[best]) best = a;
  }
  return static_cast<RdpAction>(best);
}

double QTable::MaxValue(int state) const {
  const auto& row = values[static_cast<std::size_t>(state)];
  return *std::max_element(row.begin(), row.end());
}

double QUpdate(QTable& q, int state, RdpAction action, double reward,
               int next_state, const RdpHyper& hyper) {
  double& cell = q.values[static_cast<std::size_t>(state)]
                         [static_cast<std::size_t>(action)];
  const double old = cell;
  cell = (1.0 - hyper.alpha) * old +
         hyper.alpha * (reward + hyper.zeta * q.MaxValue(next_state));
  ++q.visits[static_cast<std::size_t>(state)][static_cast<std::size_t>(action)];
  return std::abs(cell - old);
}

double ExplorationProb(int episode, const RdpHyper& hyper) {
  const double half = std::max(1.0, hyper.max_episodes / 2.0);
  if (episode >= half) return hyper.explore_min;
  return hyper.explore_start -
         (hyper.explore_start - hyper.explore_min) * episode / half;
}

QLearningResult QLearn(const TabularMdp& mdp, const RdpHyper& hyper,
                       std::uint64_t seed) {
  hyper.Validate();
  if (mdp.num_states < 1) throw std::invalid_argument("MDP has no states");
  QLearningResult result{QTable(mdp.num_states), {}};
  result.trace.reserve(static_cast<std::size_t>(hyper.max_episodes));
  Substream stream(seed, StreamTag::kRdp);

  for (int episode = 0; episode < hyper.max_episodes; ++episode) {
    const double explore = ExplorationProb(episode, hyper);
    double reward_sum = 0.0, delta_sum = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) {
      RdpAction action;
      if (stream.Uniform() < explore) {
        action = static_cast<RdpAction>(stream.Below(kNumActions));
      } else {
        action = result.q.Greedy(s);
      }
      const int next = mdp.next(s, action);
      const double r = mdp.reward(s, action);
      const double delta = QUpdate(result.q, s, action, r, next, hyper);
      if (!std::isfinite(result.q.values[s][static_cast<int>(action)])) {
        throw std::runtime_error("non-finite Q value at episode " +
                                 std::to_string(episode + 1));
      }
      reward_sum += r;
      delta_sum += delta;
    }
    const double mean_delta = delta_sum / mdp.num_states;
    result.q.delta_trace.push_back(mean_delta);
    result.trace.push_back({episode + 1, reward_sum, mean_delta, explore});
  }
  return result;
}

RdpResult TrainRdp(const LossTables& tables, const RdpHyper& hyper,
                   std::uint64_t seed) {
  RdpEnvironment env(tables, hyper);
  QLearningResult learned = QLearn(MakeMdp(env), hyper, seed);
  RdpResult result{std::move(learned.q), {}, std::move(learned.trace), 0, 0.0};
  for (int s = 0; s < env.num_states(); ++s) {
    result.policy.push_back(result.q.Greedy(s));
  }
  int s = env.num_states() / 2;
  std::vector<bool> seen(static_cast<std::size_t>(env.num_states()), false);
  while (!seen[static_cast<std::size_t>(s)]) {
    seen[static_cast<std::size_t>(s)] = true;
    const int next = env.NextIndex(s, result.policy[static_cast<std::size_t>(s)]);
    if (next == s) break;
    s = next;
  }
  result.epsilon_star_index = s;
  result.epsilon_star = env.epsilon(s);
  return result;
}

void WriteQTableCsv(std::ostream& out, const QTable& q,
                    const RdpEnvironment& env) {
  CsvWriter csv(out, kQTableSchema,
                {"m_l_bin", "f_l_bin", "eps_index", "action", "q_value"});
  for (int s = 0; s < env.num_states(); ++s) {
    const RdpState& st = env.state(s);
    for (int a = 0; a < kNumActions; ++a) {
      csv.Row({std::to_string(st.m_l_bin), std::to_string(st.f_l_bin),
               std::to_string(st.epsilon_index),
               std::string(ToString(static_cast<RdpAction>(a))),
               FormatDouble(q.values[static_cast<std::size_t>(s)]
                                    [static_cast<std::size_t>(a)])});
    }
  }
}

void WriteRdpTraceCsv(std::ostream& out, std::span<const RdpTraceRow> trace) {
  CsvWriter csv(out, kRdpTraceSchema,
                {"episode", "cumulative_reward", "mean_abs_delta_q",
                 "exploration_prob"});
  for (const auto& row : trace) {
    csv.Row({std::to_string(row.episode), FormatDouble(row.cumulative_reward),
             FormatDouble(row.mean_abs_delta_q),
             FormatDouble(row.exploration_prob)});
  }
}

LossTables GenerateLossTables(const LossTableSpec& spec,
                              const DataProvider& data_for_seed,
                              ExecutionPolicy policy) {
  if (spec.epsilon_grid.empty() || spec.gamma_values.empty() ||
      spec.seeds.empty()) {
    throw std::invalid_argument("loss table grid, gammas and seeds are required");
  }
  std::map<std::uint64_t, std::shared_ptr<const FederatedData>> data;
  for (std::uint64_t seed : spec.seeds) data[seed] = data_for_seed(seed);

  struct Cell {
    std::size_t eps;
    std::size_t seed;
    int gamma;  // -1 for the benign run
    double loss = kNaN;
  };
  std::vector<Cell> cells;
  for (std::size_t e = 0; e < spec.epsilon_grid.size(); ++e) {
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
      for (int g = -1; g < static_cast<int>(spec.gamma_values.size()); ++g) {
        cells.push_back({e, s, g});
      }
    }
  }

  auto run_cell = [&](Cell& cell) {
    try {
      FederationConfig cfg = spec.federation;
      cfg.seed = spec.seeds[cell.seed];
      cfg.execution = ExecutionPolicy::kSerial;
      cfg.privacy = PrivacySpec::Calibrated(spec.epsilon_grid[cell.eps],
                                            cfg.privacy.delta,
                                            cfg.privacy.clip_c);
      AttackSetup attack;
      if (cell.gamma >= 0) {
        attack.mode = AttackMode::kMpelm;
        attack.config = spec.attack;
        attack.config.gamma0 =
            spec.gamma_values[static_cast<std::size_t>(cell.gamma)];
      }
      Federation fed(cfg, data.at(cfg.seed), attack);
      TrainingResult result = fed.Run();
      cell.loss = result.rounds.back().global_val_loss;
    } catch (const std::exception&) {
      cell.loss = kNaN;
    }
  };

  const auto n = static_cast<long>(cells.size());
  if (policy == ExecutionPolicy::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) run_cell(cells[static_cast<std::size_t>(i)]);
  } else {
    for (long i = 0; i < n; ++i) run_cell(cells[static_cast<std::size_t>(i)]);
  }

  std::vector<LossTableRow> rows;
  for (std::size_t c = 0; c < cells.size();) {
    const double f = cells[c].loss;  // benign cell precedes its gamma cells
    for (std::size_t g = 0; g < spec.gamma_values.size(); ++g) {
      const Cell& cell = cells[c + 1 + g];
      rows.push_back({spec.epsilon_grid[cell.eps], spec.gamma_values[g],
                      spec.seeds[cell.seed], cell.loss, f});
    }
    c += 1 + spec.gamma_values.size();
  }
  return BuildLossTables(std::move(rows));
}

AssistVerdict DetectAssist(double f_l_standard, double f_l_observed,
                           double margin) {
  if (!(f_l_standard > 0.0 && f_l_observed > 0.0)) {
    throw std::invalid_argument("losses must be > 0");
  }
  return f_l_observed > f_l_standard * (1.0 + margin)
             ? AssistVerdict::kSuspectedAttack
             : AssistVerdict::kClear;
}

}  // namespace ldpfl
