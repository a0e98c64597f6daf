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

#include "ldpfl/adversary.h"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ldpfl {

PoisonWindow PoisoningWindow(double tau, double upsilon, double eta_max) {
  if (!(tau >= 0.0)) throw std::invalid_argument("tau must be >= 0");
  PoisonWindow w;
  w.tau = tau;
  w.upsilon = upsilon;
  w.eta_max = eta_max;
  w.lower = {0.0, tau - upsilon};
  w.upper = {0.0, tau + upsilon};
  return w;
}

double AdversarialMu(double theta, double gamma, double sigma_x) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  if (!(sigma_x >= 0.0)) throw std::invalid_argument("sigma_x must be >= 0");
  return theta + std::sqrt(2.0 * gamma) * sigma_x;
}

ModelUpdate Inject(const ModelUpdate& clipped, double gamma, double theta,
                   double sigma_x, Substream stream) {
  const double mu = AdversarialMu(theta, gamma, sigma_x);
  ModelUpdate out = clipped;
  AddGaussian(out.delta, mu, sigma_x, stream);
  return out;
}

ModelUpdate Inject(const ModelUpdate& clipped, const PrivacySpec& spec,
                   double gamma, double theta, Substream stream) {
  return Inject(clipped, gamma, theta, spec.noise_std(), std::move(stream));
}

std::vector<double> RmdDirection(std::size_t q, double norm,
                                 Substream& direction) {
  std::vector<double> v(q);
  double sq = 0.0;
  do {
    for (double& x : v) x = 2.0 * direction.Uniform() - 1.0;
    sq = SquaredNorm(v);
  } while (sq == 0.0);
  const double scale = norm / std::sqrt(sq);
  for (double& x : v) x *= scale;
  return v;
}

ModelUpdate RmdUpdate(const PrivacySpec& spec, std::size_t q,
                      Substream direction, Substream noise) {
  ModelUpdate out;
  out.delta = RmdDirection(q, spec.clip_c, direction);
  AddGaussian(out.delta, 0.0, spec.noise_std(), noise);
  return out;
}

void AttackConfig::Validate() const {
  if (m < 0) throw std::invalid_argument("attack.m must be >= 0");
  if (!(rho > 0.0)) throw std::invalid_argument("attack.rho must be > 0");
  if (!(r_lo < 1.0 && 1.0 < r_hi)) {
    throw std::invalid_argument("attack thresholds need r_lo < 1 < r_hi");
  }
  if (!(partial_stop_fraction >= 0.0 && partial_stop_fraction <= 1.0)) {
    throw std::invalid_argument("partial_stop_fraction must be in [0, 1]");
  }
}

AttackState InitAttackState(const AttackConfig& cfg, double epsilon) {
  AttackState state;
  state.gamma_current = cfg.InitialGamma(epsilon);
  state.gamma_episode = state.gamma_current;
  return state;
}

AttackState UpdateGamma(AttackState state, double avg_loss,
                        const AttackConfig& cfg) {
  state.avg_loss = avg_loss;
  const double gamma = state.gamma_current;
  if (!cfg.adaptive) {
    state.loss_ratio = 0.0;
    if (!state.episodic_losses.empty()) {
      const double hist =
          std::accumulate(state.episodic_losses.begin(),
                          state.episodic_losses.end(), 0.0) /
          static_cast<double>(state.episodic_losses.size());
      state.loss_ratio = hist != 0.0 ? avg_loss / hist : 1.0;
    }
    state.gamma_episode = gamma;
  } else if (state.episodic_losses.empty()) {
    state.loss_ratio = 0.0;
    state.gamma_episode = gamma;
  } else {
    const double hist =
        std::accumulate(state.episodic_losses.begin(),
                        state.episodic_losses.end(), 0.0) /
        static_cast<double>(state.episodic_losses.size());
    const double ratio = hist != 0.0 ? avg_loss / hist : 1.0;
    state.loss_ratio = ratio;
    if (hist != 0.0 && ratio > cfg.r_hi) {
      state.gamma_episode = 0.0;
    } else if (hist != 0.0 && ratio < cfg.r_lo) {
      state.gamma_episode = gamma + cfg.rho * ratio * gamma;
    } else {
      state.gamma_episode = gamma - cfg.rho * ratio * gamma;
    }
    if (state.gamma_episode != 0.0) state.gamma_current = state.gamma_episode;
  }
  state.episodic_losses.push_back(avg_loss);
  return state;
}

double AverageValidationLoss(const Mlp& model, std::span<const double> global,
                             std::span<const NodeShard* const> shards) {
  if (shards.empty()) throw std::invalid_argument("no compromised shards");
  double sum = 0.0;
  for (const NodeShard* shard : shards) {
    sum += model.MseLoss(global, shard->validation);
  }
  return sum / static_cast<double>(shards.size());
}

AttackState MpelmStep(AttackState state, const Mlp& model,
                      std::span<const double> global,
                      std::span<const NodeShard* const> compromised,
                      const AttackConfig& cfg) {
  return UpdateGamma(std::move(state),
                     AverageValidationLoss(model, global, compromised), cfg);
}

}  // namespace ldpfl
