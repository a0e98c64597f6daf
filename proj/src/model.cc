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

#include "ldpfl/model.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ldpfl {
namespace {

// Activations of every layer for one sample; acts[0] is the input.
struct Trace {
  std::vector<std::vector<double>> acts;
};

}  // namespace

Mlp::Mlp(std::vector<int> hidden) {
  sizes_.push_back(static_cast<int>(kNumFeatures));
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden width must be >= 1");
    sizes_.push_back(h);
  }
  sizes_.push_back(1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    param_count_ += static_cast<std::size_t>(sizes_[l + 1]) *
                    (static_cast<std::size_t>(sizes_[l]) + 1);
  }
}

void Mlp::CheckParams(std::span<const double> params) const {
  if (params.size() != param_count_) {
    throw DimensionError("parameter vector has " +
                         std::to_string(params.size()) + " entries, model needs " +
                         std::to_string(param_count_));
  }
}

ParamVector Mlp::InitParams(std::uint64_t seed) const {
  Substream stream(seed, StreamTag::kInit);
  ParamVector params(param_count_, 0.0);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto fan_in = static_cast<std::size_t>(sizes_[l]);
    const auto fan_out = static_cast<std::size_t>(sizes_[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
      params[offset + i] = limit * (2.0 * stream.Uniform() - 1.0);
    }
    offset += fan_in * fan_out + fan_out;
  }
  return params;
}

double Mlp::Predict(std::span<const double> params,
                    const Sample& sample) const {
  CheckParams(params);
  std::vector<double> in(sample.features.begin(), sample.features.end());
  std::vector<double> out;
  std::size_t offset = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto fan_in = static_cast<std::size_t>(sizes_[l]);
    const auto fan_out = static_cast<std::size_t>(sizes_[l + 1]);
    const double* w = params.data() + offset;
    const double* b = w + fan_in * fan_out;
    out.assign(fan_out, 0.0);
    for (std::size_t j = 0; j < fan_out; ++j) {
      double z = b[j];
      for (std::size_t i = 0; i < fan_in; ++i) z += w[j * fan_in + i] * in[i];
      out[j] = (l + 1 < layers) ? std::max(z, 0.0) : z;
    }
    offset += fan_in * fan_out + fan_out;
    in.swap(out);
  }
  return in[0];
}

std::vector<double> Mlp::Forward(std::span<const double> params,
                                 std::span<const Sample> batch) const {
  CheckParams(params);
  std::vector<double> preds;
  preds.reserve(batch.size());
  for (const Sample& s : batch) preds.push_back(Predict(params, s));
  return preds;
}

double Mlp::MseLoss(std::span<const double> params,
                    std::span<const Sample> data) const {
  if (data.empty()) throw std::invalid_argument("MSE over empty data");
  CheckParams(params);
  double sum = 0.0;
  for (const Sample& s : data) {
    const double r = Predict(params, s) - s.target;
    sum += r * r;
  }
  return sum / static_cast<double>(data.size());
}

std::vector<double> Mlp::Gradient(std::span<const double> params,
                                  std::span<const Sample> batch) const {
  std::vector<double> grad(param_count_, 0.0);
  LossAndGradient(params, batch, grad);
  return grad;
}

double Mlp::LossAndGradient(std::span<const double> params,
                            std::span<const Sample> batch,
                            std::span<double> grad) const {
  if (batch.empty()) throw std::invalid_argument("gradient over empty batch");
  CheckParams(params);
  if (grad.size() != param_count_) throw DimensionError("gradient size");
  std::fill(grad.begin(), grad.end(), 0.0);

  const std::size_t layers = sizes_.size() - 1;
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, off = 0; l < layers; ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(sizes_[l + 1]) *
           (static_cast<std::size_t>(sizes_[l]) + 1);
  }

  const double scale = 2.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Trace trace;
  trace.acts.resize(layers + 1);
  std::vector<double> upstream, next;
  for (const Sample& s : batch) {
    trace.acts[0].assign(s.features.begin(), s.features.end());
    for (std::size_t l = 0; l < layers; ++l) {
      const auto fan_in = static_cast<std::size_t>(sizes_[l]);
      const auto fan_out = static_cast<std::size_t>(sizes_[l + 1]);
      const double* w = params.data() + offsets[l];
      const double* b = w + fan_in * fan_out;
      auto& out = trace.acts[l + 1];
      out.assign(fan_out, 0.0);
      for (std::size_t j = 0; j < fan_out; ++j) {
        double z = b[j];
        for (std::size_t i = 0; i < fan_in; ++i) {
          z += w[j * fan_in + i] * trace.acts[l][i];
        }
        out[j] = (l + 1 < layers) ? std::max(z, 0.0) : z;
      }
    }
    const double residual = trace.acts[layers][0] - s.target;
    loss += residual * residual;

    upstream.assign(1, scale * residual);
    for (std::size_t l = layers; l-- > 0;) {
      const auto fan_in = static_cast<std::size_t>(sizes_[l]);
      const auto fan_out = static_cast<std::size_t>(sizes_[l + 1]);
      const double* w = params.data() + offsets[l];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + fan_in * fan_out;
      const auto& in = trace.acts[l];
      for (std::size_t j = 0; j < fan_out; ++j) {
        gb[j] += upstream[j];
        for (std::size_t i = 0; i < fan_in; ++i) {
          gw[j * fan_in + i] += upstream[j] * in[i];
        }
      }
      if (l == 0) break;
      next.assign(fan_in, 0.0);
      for (std::size_t i = 0; i < fan_in; ++i) {
        // ReLU derivative taken as 0 at the kink.
        if (in[i] <= 0.0) continue;
        double g = 0.0;
        for (std::size_t j = 0; j < fan_out; ++j) {
          g += w[j * fan_in + i] * upstream[j];
        }
        next[i] = g;
      }
      upstream.swap(next);
    }
  }
  return loss / static_cast<double>(batch.size());
}

void OptimizerConfig::Validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (local_steps < 1) throw std::invalid_argument("local_steps must be >= 1");
  if (early_stop && patience < 1) {
    throw std::invalid_argument("patience must be >= 1");
  }
}

ModelUpdate LocalTrain(const Mlp& model, std::span<const double> global,
                       const NodeShard& shard, const OptimizerConfig& cfg,
                       Substream stream, int episode) {
  cfg.Validate();
  const std::size_t q = model.param_count();
  if (global.size() != q) throw DimensionError("global model size");

  ParamVector w(global.begin(), global.end());
  std::vector<double> grad(q), m, u;
  if (cfg.kind == OptimizerKind::kAdamax) {
    m.assign(q, 0.0);
    u.assign(q, 0.0);
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  BatchSampler sampler(shard.train, cfg.batch_size, std::move(stream));
  const bool watch = cfg.early_stop && !shard.validation.empty();
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int step = 1; step <= cfg.local_steps; ++step) {
    const auto batch = sampler.Next();
    const double loss = model.LossAndGradient(w, batch, grad);
    if (!std::isfinite(loss)) {
      throw TrainingError(
          "non-finite loss at local step " + std::to_string(step), step);
    }
    if (cfg.kind == OptimizerKind::kMbgd) {
      for (std::size_t i = 0; i < q; ++i) w[i] -= cfg.learning_rate * grad[i];
    } else {
      const double step_size =
          cfg.learning_rate / (1.0 - std::pow(kBeta1, step));
      for (std::size_t i = 0; i < q; ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
        u[i] = std::max(kBeta2 * u[i], std::abs(grad[i]) + kEps);
        w[i] -= step_size * m[i] / u[i];
      }
    }
    if (watch) {
      const double val = model.MseLoss(w, shard.validation);
      if (!std::isfinite(val)) {
        throw TrainingError(
            "non-finite validation loss at local step " + std::to_string(step),
            step);
      }
      if (val < best) {
        best = val;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }

  ModelUpdate update;
  update.node_id = shard.node_id;
  update.episode = episode;
  update.delta.resize(q);
  for (std::size_t i = 0; i < q; ++i) update.delta[i] = w[i] - global[i];
  return update;
}

void SaveCheckpoint(const std::filesystem::path& path, const Mlp& model,
                    std::span<const double> params) {
  if (params.size() != model.param_count()) {
    throw DimensionError("checkpoint parameter count");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "ldpfl-checkpoint v1\nlayers";
  for (int s : model.layer_sizes()) out << ' ' << s;
  out << "\nactivations";
  for (std::size_t l = 1; l < model.layer_sizes().size(); ++l) {
    out << (l + 1 < model.layer_sizes().size() ? " relu" : " linear");
  }
  out << "\ncount " << params.size() << '\n';
  char num[32];
  for (double v : params) {
    std::snprintf(num, sizeof(num), "%.17g", v);
    out << num << '\n';
  }
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ldpfl-checkpoint v1") {
    throw std::runtime_error("unsupported checkpoint version: " + line);
  }
  Checkpoint ckpt;
  std::string key;
  std::getline(in, line);
  {
    std::istringstream ls(line);
    ls >> key;
    if (key != "layers") throw std::runtime_error("checkpoint: expected layers");
    int s;
    while (ls >> s) ckpt.layer_sizes.push_back(s);
  }
  std::getline(in, line);  // activations
  std::size_t count = 0;
  in >> key >> count;
  if (key != "count") throw std::runtime_error("checkpoint: expected count");
  ckpt.params.resize(count);
  for (double& v : ckpt.params) {
    if (!(in >> v)) throw std::runtime_error("checkpoint: truncated values");
  }
  std::vector<int> hidden(ckpt.layer_sizes.begin() + 1,
                          ckpt.layer_sizes.end() - 1);
  if (Mlp(hidden).param_count() != count) {
    throw std::runtime_error("checkpoint: count does not match layers");
  }
  return ckpt;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double SquaredNorm(std::span<const double> v) { return Dot(v, v); }

double L2Norm(std::span<const double> v) { return std::sqrt(SquaredNorm(v)); }

}  // namespace ldpfl
