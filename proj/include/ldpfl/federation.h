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

#ifndef LDPFL_FEDERATION_H_
#define LDPFL_FEDERATION_H_

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ldpfl/adversary.h"
#include "ldpfl/data.h"
#include "ldpfl/detection.h"
#include "ldpfl/dp.h"
#include "ldpfl/model.h"

namespace ldpfl {

enum class ExecutionPolicy { kSerial, kParallel };

enum class AttackMode { kNone, kRmd, kMpelm };
std::string_view ToString(AttackMode mode);
AttackMode ParseAttackMode(std::string_view s);

struct AttackSetup {
  AttackMode mode = AttackMode::kNone;
  AttackConfig config;
};

struct FederationConfig {
  int num_nodes = 100;     // K
  int participants = 30;   // n
  int episodes = 30;       // T
  std::uint64_t seed = 1;
  PrivacySpec privacy = PrivacySpec::Calibrated(0.7, 0.001, 0.01);
  double stop_threshold = kDefaultStopThreshold;
  OptimizerConfig optimizer;
  std::vector<int> hidden = {16, 8};
  ExecutionPolicy execution = ExecutionPolicy::kParallel;

  void Validate() const;
};

class AggregationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One executed episode.
struct RoundRecord {
  int episode = 0;
  std::vector<int> selected;
  // Compromised participants this episode (ground truth for detection).
  std::vector<int> compromised;
  // Compromised participants that actually poisoned (gamma_t > 0 or RMD).
  int m_active = 0;
  // Noisy clipped updates in ascending node-id order.
  std::vector<ModelUpdate> submitted;
  std::vector<Verdict> verdicts;
  std::set<int> flagged;
  // Every update was flagged; the global model was left unchanged.
  bool aborted = false;
  ParamVector global_params_after;
  double global_val_loss = 0.0;
  double delta_step = 0.0;
  double delta_cumulative = 0.0;
  bool stopped = false;
  // Attack trace; NaN without an adaptive attacker.
  double gamma_t = std::numeric_limits<double>::quiet_NaN();
  double gamma_current = std::numeric_limits<double>::quiet_NaN();
  double loss_ratio = std::numeric_limits<double>::quiet_NaN();
  double avg_compromised_val_loss = std::numeric_limits<double>::quiet_NaN();

  friend bool operator==(const RoundRecord&, const RoundRecord&);
};

struct TrainingResult {
  double initial_val_loss = 0.0;
  std::vector<RoundRecord> rounds;
  ParamVector final_params;
  bool stopped_by_ledger = false;
};

// Uniform sample of n distinct ids from [0, K), sorted ascending.
std::vector<int> SelectNodes(int num_nodes, int n, Substream stream);

// global + mean(updates), summing in ascending node-id order.
ParamVector Aggregate(std::span<const double> global,
                      std::span<const ModelUpdate> updates);

// Runs the locally private protocol: each episode samples n of the K nodes,
// trains them from the current global model, clips and perturbs their
// updates (or lets compromised nodes poison them), optionally filters them
// through a detector, and averages the survivors into the global model.
class Federation {
 public:
  Federation(FederationConfig config,
             std::shared_ptr<const FederatedData> data,
             AttackSetup attack = {}, DetectorConfig detector = {});

  // Executes the next episode. Throws std::logic_error once the ledger has
  // stopped training.
  RoundRecord RunEpisode();
  // Runs until T episodes or the ledger stops.
  TrainingResult Run();

  const ParamVector& global() const { return global_; }
  double ValidationLoss() const;
  const PrivacyLedger& ledger() const { return ledger_; }
  const AttackState& attack_state() const { return attack_state_; }
  const Mlp& model() const { return model_; }
  const FederatedData& data() const { return *data_; }
  const FederationConfig& config() const { return config_; }

 private:
  struct NodeTask {
    int node_id;
    bool compromised;
    double gamma;  // poisoning degree for compromised nodes
  };
  ModelUpdate ProduceUpdate(const NodeTask& task, int episode) const;
  std::vector<ModelUpdate> CollectSerial(std::span<const NodeTask> tasks,
                                         int episode) const;
  std::vector<ModelUpdate> CollectParallel(std::span<const NodeTask> tasks,
                                           int episode) const;

  FederationConfig config_;
  std::shared_ptr<const FederatedData> data_;
  AttackSetup attack_;
  DetectorConfig detector_;
  Mlp model_;
  std::vector<Sample> pooled_validation_;
  ParamVector global_;
  PrivacyLedger ledger_;
  AttackState attack_state_;
  int episode_ = 0;
};

}  // namespace ldpfl

#endif  // LDPFL_FEDERATION_H_
