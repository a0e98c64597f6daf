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

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <numeric>

namespace ldpfl {
namespace {

bool SameBits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool SameBits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!SameBits(a[i], b[i])) return false;
  }
  return true;
}

bool SameVerdict(const Verdict& a, const Verdict& b) {
  return a.node_id == b.node_id && a.flagged == b.flagged &&
         SameBits(a.rate, b.rate) && SameBits(a.d, b.d) &&
         SameBits(a.e1, b.e1) && SameBits(a.loss_update, b.loss_update) &&
         SameBits(a.loss_standard, b.loss_standard) && SameBits(a.e2, b.e2);
}

// First k entries of a uniform random permutation of `ids`, sorted.
std::vector<int> SampleSubset(std::vector<int> ids, std::size_t k,
                              Substream& stream) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + stream.Below(ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

bool operator==(const RoundRecord& a, const RoundRecord& b) {
  if (a.episode != b.episode || a.selected != b.selected ||
      a.compromised != b.compromised || a.m_active != b.m_active ||
      a.flagged != b.flagged || a.aborted != b.aborted ||
      a.stopped != b.stopped || a.submitted.size() != b.submitted.size() ||
      a.verdicts.size() != b.verdicts.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.submitted.size(); ++i) {
    if (a.submitted[i].node_id != b.submitted[i].node_id ||
        a.submitted[i].episode != b.submitted[i].episode ||
        !SameBits(a.submitted[i].delta, b.submitted[i].delta)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.verdicts.size(); ++i) {
    if (!SameVerdict(a.verdicts[i], b.verdicts[i])) return false;
  }
  return SameBits(a.global_params_after, b.global_params_after) &&
         SameBits(a.global_val_loss, b.global_val_loss) &&
         SameBits(a.delta_step, b.delta_step) &&
         SameBits(a.delta_cumulative, b.delta_cumulative) &&
         SameBits(a.gamma_t, b.gamma_t) &&
         SameBits(a.gamma_current, b.gamma_current) &&
         SameBits(a.loss_ratio, b.loss_ratio) &&
         SameBits(a.avg_compromised_val_loss, b.avg_compromised_val_loss);
}

std::string_view ToString(AttackMode mode) {
  switch (mode) {
    case AttackMode::kNone: return "none";
    case AttackMode::kRmd: return "rmd";
    case AttackMode::kMpelm: return "mpelm";
  }
  return "?";
}

AttackMode ParseAttackMode(std::string_view s) {
  if (s == "none") return AttackMode::kNone;
  if (s == "rmd") return AttackMode::kRmd;
  if (s == "mpelm") return AttackMode::kMpelm;
  throw std::invalid_argument("unknown attack mode '" + std::string(s) + "'");
}

void FederationConfig::Validate() const {
  if (num_nodes < 1) throw std::invalid_argument("federation.K must be >= 1");
  if (participants < 1 || participants > num_nodes) {
    throw std::invalid_argument("federation.n must satisfy 1 <= n <= K");
  }
  if (episodes < 1) throw std::invalid_argument("federation.T must be >= 1");
  if (!(privacy.epsilon > 0.0) || !(privacy.clip_c > 0.0) ||
      !(privacy.delta > 0.0 && privacy.delta < 1.0) || !(privacy.sigma >= 0.0)) {
    throw std::invalid_argument("privacy spec out of range");
  }
  optimizer.Validate();
}

std::vector<int> SelectNodes(int num_nodes, int n, Substream stream) {
  if (n > num_nodes) throw std::invalid_argument("cannot select n > K nodes");
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  std::vector<int> ids(static_cast<std::size_t>(num_nodes));
  std::iota(ids.begin(), ids.end(), 0);
  return SampleSubset(std::move(ids), static_cast<std::size_t>(n), stream);
}

ParamVector Aggregate(std::span<const double> global,
                      std::span<const ModelUpdate> updates) {
  if (updates.empty()) throw AggregationError("empty aggregation");
  std::vector<const ModelUpdate*> ordered;
  ordered.reserve(updates.size());
  for (const ModelUpdate& u : updates) {
    if (u.delta.size() != global.size()) {
      throw DimensionError("update length does not match the global model");
    }
    ordered.push_back(&u);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ModelUpdate* a, const ModelUpdate* b) {
                     return a->node_id < b->node_id;
                   });
  std::vector<double> sum(global.size(), 0.0);
  for (const ModelUpdate* u : ordered) {
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += u->delta[j];
  }
  const double count = static_cast<double>(updates.size());
  ParamVector next(global.begin(), global.end());
  for (std::size_t j = 0; j < next.size(); ++j) next[j] += sum[j] / count;
  return next;
}

Federation::Federation(FederationConfig config,
                       std::shared_ptr<const FederatedData> data,
                       AttackSetup attack, DetectorConfig detector)
    : config_(std::move(config)),
      data_(std::move(data)),
      attack_(attack),
      detector_(detector),
      model_(config_.hidden),
      ledger_(config_.stop_threshold) {
  config_.Validate();
  if (!data_) throw std::invalid_argument("federation needs data");
  if (data_->shards.size() != static_cast<std::size_t>(config_.num_nodes)) {
    throw std::invalid_argument("shard count does not match K");
  }
  for (const NodeShard& shard : data_->shards) {
    if (shard.train.empty()) {
      throw std::invalid_argument("node " + std::to_string(shard.node_id) +
                                  " has no training data");
    }
  }
  if (attack_.mode != AttackMode::kNone) {
    attack_.config.Validate();
    if (attack_.config.m > config_.participants) {
      throw std::invalid_argument("attack.m must not exceed federation.n");
    }
    if (attack_.mode == AttackMode::kMpelm) {
      for (const NodeShard& shard : data_->shards) {
        if (shard.validation.empty()) {
          throw std::invalid_argument(
              "loss-memorizing attack needs node validation data");
        }
      }
    }
  }
  if (detector_.kind != DetectorKind::kOff) {
    detector_.Validate();
    if (config_.participants < 2) {
      throw std::invalid_argument("detection needs n >= 2");
    }
    if ((detector_.kind == DetectorKind::kAccuracy ||
         detector_.kind == DetectorKind::kMix) &&
        data_->server_validation.empty()) {
      throw std::invalid_argument("accuracy detection needs server validation");
    }
  }
  pooled_validation_ = PooledValidation(data_->shards);
  if (pooled_validation_.empty()) {
    throw std::invalid_argument("no validation samples across nodes");
  }
  global_ = model_.InitParams(config_.seed);
  attack_state_ = InitAttackState(attack_.config, config_.privacy.epsilon);
}

double Federation::ValidationLoss() const {
  return model_.MseLoss(global_, pooled_validation_);
}

ModelUpdate Federation::ProduceUpdate(const NodeTask& task,
                                      int episode) const {
  const std::uint64_t seed = config_.seed;
  const auto node = static_cast<std::uint64_t>(task.node_id);
  const auto ep = static_cast<std::uint64_t>(episode);
  Substream noise(seed, StreamTag::kNoise, node, ep);

  if (task.compromised && attack_.mode == AttackMode::kRmd) {
    ModelUpdate u = RmdUpdate(config_.privacy, model_.param_count(),
                              Substream(seed, StreamTag::kRmd, node, ep),
                              std::move(noise));
    u.node_id = task.node_id;
    u.episode = episode;
    return u;
  }

  const NodeShard& shard = data_->shards[static_cast<std::size_t>(task.node_id)];
  ModelUpdate local =
      LocalTrain(model_, global_, shard, config_.optimizer,
                 Substream(seed, StreamTag::kTrain, node, ep), episode);
  ModelUpdate clipped = Clip(local, config_.privacy.clip_c);
  if (task.compromised && attack_.mode == AttackMode::kMpelm) {
    return Inject(clipped, config_.privacy, task.gamma, attack_.config.theta,
                  std::move(noise));
  }
  return AddNoise(clipped, config_.privacy, std::move(noise));
}

std::vector<ModelUpdate> Federation::CollectSerial(
    std::span<const NodeTask> tasks, int episode) const {
  std::vector<ModelUpdate> out;
  out.reserve(tasks.size());
  for (const NodeTask& task : tasks) out.push_back(ProduceUpdate(task, episode));
  return out;
}

std::vector<ModelUpdate> Federation::CollectParallel(
    std::span<const NodeTask> tasks, int episode) const {
  std::vector<ModelUpdate> out(tasks.size());
  std::exception_ptr error;
  const auto n = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          ProduceUpdate(tasks[static_cast<std::size_t>(i)], episode);
    } catch (...) {
#pragma omp critical(ldpfl_federation_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

RoundRecord Federation::RunEpisode() {
  if (ledger_.stopped()) {
    throw std::logic_error("privacy ledger has stopped training");
  }
  const int episode = ++episode_;
  const auto ep = static_cast<std::uint64_t>(episode);
  RoundRecord record;
  record.episode = episode;
  record.selected =
      SelectNodes(config_.num_nodes, config_.participants,
                  Substream(config_.seed, StreamTag::kSelect, 0, ep));

  const bool attacking =
      attack_.mode != AttackMode::kNone && attack_.config.m > 0;
  if (attacking) {
    Substream pick(config_.seed, StreamTag::kCompromise, 0, ep);
    record.compromised = SampleSubset(
        record.selected, static_cast<std::size_t>(attack_.config.m), pick);
  }

  // Poisoning degree per compromised node for this episode.
  std::vector<double> gammas(record.compromised.size(), 0.0);
  if (attacking && attack_.mode == AttackMode::kMpelm) {
    std::vector<const NodeShard*> shards;
    for (int id : record.compromised) {
      shards.push_back(&data_->shards[static_cast<std::size_t>(id)]);
    }
    attack_state_ =
        MpelmStep(std::move(attack_state_), model_, global_, shards,
                  attack_.config);
    std::fill(gammas.begin(), gammas.end(), attack_state_.gamma_episode);
    if (attack_state_.gamma_episode == 0.0 &&
        attack_.config.partial_stop_fraction < 1.0) {
      // Only a fraction of the compromised nodes pause; the rest keep
      // poisoning with the last non-zero degree.
      const auto paused = static_cast<std::size_t>(std::lround(
          attack_.config.partial_stop_fraction *
          static_cast<double>(record.compromised.size())));
      std::vector<int> order(record.compromised.size());
      std::iota(order.begin(), order.end(), 0);
      Substream s(config_.seed, StreamTag::kPartialStop, 0, ep);
      const auto pausing = SampleSubset(order, paused, s);
      for (std::size_t i = 0; i < gammas.size(); ++i) {
        if (!std::binary_search(pausing.begin(), pausing.end(),
                                static_cast<int>(i))) {
          gammas[i] = attack_state_.gamma_current;
        }
      }
    }
    record.gamma_t = attack_state_.gamma_episode;
    record.gamma_current = attack_state_.gamma_current;
    record.loss_ratio = attack_state_.loss_ratio;
    record.avg_compromised_val_loss = attack_state_.avg_loss;
  }

  std::vector<NodeTask> tasks;
  tasks.reserve(record.selected.size());
  for (int id : record.selected) {
    NodeTask task{id, false, 0.0};
    auto it = std::lower_bound(record.compromised.begin(),
                               record.compromised.end(), id);
    if (it != record.compromised.end() && *it == id) {
      task.compromised = true;
      task.gamma = gammas[static_cast<std::size_t>(
          it - record.compromised.begin())];
      if (attack_.mode == AttackMode::kRmd || task.gamma > 0.0) {
        ++record.m_active;
      }
    }
    tasks.push_back(task);
  }

  record.submitted = config_.execution == ExecutionPolicy::kParallel
                         ? CollectParallel(tasks, episode)
                         : CollectSerial(tasks, episode);

  std::vector<ModelUpdate> survivors;
  if (detector_.kind != DetectorKind::kOff) {
    DetectionContext ctx{&model_, global_, data_->server_validation};
    record.verdicts =
        config_.execution == ExecutionPolicy::kParallel
            ? EvaluateParallel(record.submitted, detector_, ctx)
            : EvaluateSerial(record.submitted, detector_, ctx);
    record.flagged = FlaggedIds(record.verdicts);
    for (const ModelUpdate& u : record.submitted) {
      if (record.flagged.count(u.node_id) == 0) survivors.push_back(u);
    }
  } else {
    survivors = record.submitted;
  }

  if (survivors.empty()) {
    record.aborted = true;
  } else {
    global_ = Aggregate(global_, survivors);
  }
  record.global_params_after = global_;
  record.global_val_loss = ValidationLoss();

  record.delta_step = config_.privacy.delta;
  record.stopped = ledger_.Account(config_.privacy) == LedgerDecision::kStop;
  record.delta_cumulative = ledger_.cumulative_delta();
  return record;
}

TrainingResult Federation::Run() {
  TrainingResult result;
  result.initial_val_loss = ValidationLoss();
  while (episode_ < config_.episodes && !ledger_.stopped()) {
    result.rounds.push_back(RunEpisode());
  }
  result.stopped_by_ledger = ledger_.stopped();
  result.final_params = global_;
  return result;
}

}  // namespace ldpfl
