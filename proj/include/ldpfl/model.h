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

#ifndef LDPFL_MODEL_H_
#define LDPFL_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldpfl/data.h"
#include "ldpfl/rng.h"

namespace ldpfl {

// Flat model parameters in layer-major order: W1, b1, W2, b2, ..., Wout, bout.
// Weight matrices are stored row-major with one row per output unit.
using ParamVector = std::vector<double>;

// A node's contribution for one episode: delta = w_local - w_global.
struct ModelUpdate {
  std::vector<double> delta;
  int node_id = 0;
  int episode = 0;

  friend bool operator==(const ModelUpdate&, const ModelUpdate&) = default;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Fully connected regressor: kNumFeatures inputs, ReLU hidden layers, one
// linear output.
class Mlp {
 public:
  explicit Mlp(std::vector<int> hidden = {16, 8});

  std::size_t param_count() const { return param_count_; }
  // Input, hidden..., output.
  const std::vector<int>& layer_sizes() const { return sizes_; }

  // He-uniform weights, zero biases.
  ParamVector InitParams(std::uint64_t seed) const;

  double Predict(std::span<const double> params, const Sample& sample) const;
  std::vector<double> Forward(std::span<const double> params,
                              std::span<const Sample> batch) const;
  // Mean squared error. Throws on empty data.
  double MseLoss(std::span<const double> params,
                 std::span<const Sample> data) const;
  // Exact gradient of MseLoss over `batch` by backpropagation.
  std::vector<double> Gradient(std::span<const double> params,
                               std::span<const Sample> batch) const;
  // Loss and gradient in one pass; returns the loss.
  double LossAndGradient(std::span<const double> params,
                         std::span<const Sample> batch,
                         std::span<double> grad) const;

 private:
  void CheckParams(std::span<const double> params) const;

  std::vector<int> sizes_;
  std::size_t param_count_ = 0;
};

enum class OptimizerKind { kMbgd, kAdamax };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kMbgd;
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  int local_steps = 5;
  bool early_stop = true;
  int patience = 3;

  void Validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Runs cfg.local_steps optimizer steps from `global` on mini-batches drawn
// from shard.train and returns w_local - global. With early stopping on, the
// shard's validation loss is evaluated after every step and training stops
// once it has failed to improve `patience` times in a row.
ModelUpdate LocalTrain(const Mlp& model, std::span<const double> global,
                       const NodeShard& shard, const OptimizerConfig& cfg,
                       Substream stream, int episode = 0);

// Versioned text checkpoint:
//   ldpfl-checkpoint v1
//   layers 6 16 8 1
//   activations relu relu linear
//   count <q>
//   <q lines, one value each, 17 significant digits>
void SaveCheckpoint(const std::filesystem::path& path, const Mlp& model,
                    std::span<const double> params);
struct Checkpoint {
  std::vector<int> layer_sizes;
  ParamVector params;
};
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Vector helpers shared across modules.
double Dot(std::span<const double> a, std::span<const double> b);
double SquaredNorm(std::span<const double> v);
double L2Norm(std::span<const double> v);

}  // namespace ldpfl

#endif  // LDPFL_MODEL_H_
