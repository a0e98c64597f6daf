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

#ifndef LDPFL_RDP_H_
#define LDPFL_RDP_H_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "ldpfl/federation.h"

namespace ldpfl {

// Privacy-level moves. The enumerator order is the argmax tie-break order.
enum class RdpAction : int { kStatic = 0, kDec1, kDec2, kInc1, kInc2 };
inline constexpr int kNumActions = 5;
std::string_view ToString(RdpAction action);

// One federation outcome used to build the loss tables.
struct LossTableRow {
  double epsilon = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double m_l = 0.0;  // final loss under the loss-memorizing attack
  double f_l = 0.0;  // final loss of the benign run at the same epsilon
};

// Attacker and benign federated losses over an epsilon grid, averaged over
// seeds. Cells whose runs failed hold NaN.
struct LossTables {
  std::vector<double> epsilon_grid;
  std::vector<double> gamma_values;
  std::vector<std::vector<double>> m_l;  // [epsilon][gamma]
  std::vector<double> f_l;               // [epsilon]
  double m_l_max = 0.0;
  double f_l_max = 0.0;
  std::vector<LossTableRow> rows;

  // Attacker loss at an epsilon, averaged over the gamma values.
  double AttackerLoss(std::size_t eps_index) const;
  bool complete() const;
  // Throws unless every cell is finite and positive.
  void Validate() const;
};

LossTables BuildLossTables(std::vector<LossTableRow> rows);

void WriteLossTablesCsv(std::ostream& out, const LossTables& tables);
LossTables ReadLossTablesCsv(std::istream& in);

// {0.1, 0.2, ..., 2.0}.
std::vector<double> DefaultEpsilonGrid();

struct RdpHyper {
  double alpha = 0.01;
  double zeta = 0.5;
  double psi1 = 1.0 / 3.0;
  double psi2 = 1.0 / 3.0;
  double psi3 = 1.0 / 3.0;
  double explore_start = 1.0;
  double explore_min = 0.05;
  int max_episodes = 100000;
  int num_bins = 10;

  void Validate() const;
};

// psi1 m_max/m_l + psi2 f_max/f_l + psi3/epsilon.
double Reward(double m_l, double f_l, double epsilon, const LossTables& tables,
              const RdpHyper& hyper);

struct RdpState {
  int m_l_bin = 0;
  int f_l_bin = 0;
  int epsilon_index = 0;

  friend bool operator==(const RdpState&, const RdpState&) = default;
};

// Deterministic environment over the epsilon grid. Loss bins are quantile
// bins of the per-epsilon table values; moving past either end of the grid
// clamps.
class RdpEnvironment {
 public:
  RdpEnvironment(const LossTables& tables, const RdpHyper& hyper);

  int num_states() const { return static_cast<int>(states_.size()); }
  const RdpState& state(int index) const { return states_[index]; }
  RdpState Step(const RdpState& state, RdpAction action) const;
  int NextIndex(int index, RdpAction action) const;
  // Reward observed on arriving at state `index`.
  double RewardAt(int index) const { return rewards_[index]; }
  double epsilon(int index) const { return grid_[index]; }

 private:
  std::vector<double> grid_;
  std::vector<RdpState> states_;
  std::vector<double> rewards_;
};

// A finite deterministic MDP over kNumActions actions.
struct TabularMdp {
  int num_states = 0;
  std::function<int(int, RdpAction)> next;
  std::function<double(int, RdpAction)> reward;
};

TabularMdp MakeMdp(const RdpEnvironment& env);

struct QTable {
  std::vector<std::array<double, kNumActions>> values;
  std::vector<std::array<long, kNumActions>> visits;
  // Mean |Q_new - Q_old| per training episode.
  std::vector<double> delta_trace;

  explicit QTable(int num_states = 0);
  RdpAction Greedy(int state) const;
  double MaxValue(int state) const;
};

// Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + zeta max_a' Q(s',a')).
// Returns |Q_new - Q_old|.
double QUpdate(QTable& q, int state, RdpAction action, double reward,
               int next_state, const RdpHyper& hyper);

struct RdpTraceRow {
  int episode = 0;
  double cumulative_reward = 0.0;
  double mean_abs_delta_q = 0.0;
  double exploration_prob = 0.0;
};

// Exploration probability for a 0-based episode: linear from explore_start
// to explore_min over the first half of training, then held.
double ExplorationProb(int episode, const RdpHyper& hyper);

struct QLearningResult {
  QTable q;
  std::vector<RdpTraceRow> trace;
};

// Epsilon-greedy Q-learning. Each episode takes one step from every state in
// index order.
QLearningResult QLearn(const TabularMdp& mdp, const RdpHyper& hyper,
                       std::uint64_t seed);

struct RdpResult {
  QTable q;
  std::vector<RdpAction> policy;
  std::vector<RdpTraceRow> trace;
  int epsilon_star_index = 0;
  double epsilon_star = 0.0;
};

// Trains on the tables and follows the greedy policy from the grid midpoint
// until it stays put or revisits a state.
RdpResult TrainRdp(const LossTables& tables, const RdpHyper& hyper,
                   std::uint64_t seed);

void WriteQTableCsv(std::ostream& out, const QTable& q,
                    const RdpEnvironment& env);
void WriteRdpTraceCsv(std::ostream& out, std::span<const RdpTraceRow> trace);

// Federation runs behind the tables. `data_for_seed` supplies the data used
// for every run with that seed.
struct LossTableSpec {
  std::vector<double> epsilon_grid;
  std::vector<double> gamma_values;
  std::vector<std::uint64_t> seeds;
  FederationConfig federation;
  AttackConfig attack;  // gamma0 is overridden per cell
};

using DataProvider =
    std::function<std::shared_ptr<const FederatedData>(std::uint64_t seed)>;

// Runs the benign federation for every (epsilon, seed) and the adaptive
// attack for every (epsilon, gamma, seed). Cells run concurrently; the
// result does not depend on scheduling.
LossTables GenerateLossTables(const LossTableSpec& spec,
                              const DataProvider& data_for_seed,
                              ExecutionPolicy policy = ExecutionPolicy::kParallel);

enum class AssistVerdict { kClear, kSuspectedAttack };

// Suspected attack iff observed > standard * (1 + margin).
AssistVerdict DetectAssist(double f_l_standard, double f_l_observed,
                           double margin = 0.1);

}  // namespace ldpfl

#endif  // LDPFL_RDP_H_
