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

#ifndef LDPFL_ADVERSARY_H_
#define LDPFL_ADVERSARY_H_

#include <cstddef>
#include <span>
#include <vector>

#include "ldpfl/data.h"
#include "ldpfl/dp.h"
#include "ldpfl/model.h"
#include "ldpfl/rng.h"

namespace ldpfl {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return hi < lo; }
};

// Slack that a DP-aware detector with threshold tau leaves for an update
// deviating by upsilon from the expected one: lower [0, tau - upsilon],
// upper [0, tau + upsilon]. Analysis only; the attack loop never reads it.
struct PoisonWindow {
  double tau = 0.0;
  double upsilon = 0.0;
  double eta_max = 0.0;
  Interval lower;
  Interval upper;
};

PoisonWindow PoisoningWindow(double tau, double upsilon, double eta_max = 0.0);

// Mean of the optimal adversarial Gaussian: theta + sqrt(2 gamma) sigma_x.
// gamma = 0 gives back the benign mean.
double AdversarialMu(double theta, double gamma, double sigma_x);

// Adds N(AdversarialMu(theta, gamma, sigma_x), sigma_x^2) to every
// coordinate of an already clipped update. Uses the same draw order as
// AddNoise, so gamma = 0, theta = 0 and sigma_x = S sigma reproduce it bit for
// bit from the same stream.
ModelUpdate Inject(const ModelUpdate& clipped, double gamma, double theta,
                   double sigma_x, Substream stream);
// Convenience overload with sigma_x = S sigma, the benign deviation.
ModelUpdate Inject(const ModelUpdate& clipped, const PrivacySpec& spec,
                   double gamma, double theta, Substream stream);

// Random-model baseline: a uniformly random direction scaled to norm clip_c,
// plus benign DP noise drawn from `noise`.
std::vector<double> RmdDirection(std::size_t q, double norm,
                                 Substream& direction);
ModelUpdate RmdUpdate(const PrivacySpec& spec, std::size_t q,
                      Substream direction, Substream noise);

struct AttackConfig {
  // Compromised participants per episode.
  int m = 0;
  double theta = 0.0;
  double rho = 0.1;
  // Initial degree of poisoning; negative means "use epsilon".
  double gamma0 = -1.0;
  double r_hi = 1.5;
  double r_lo = 0.5;
  // Fraction of compromised nodes that pause when the loss ratio is high.
  double partial_stop_fraction = 1.0;
  // When false the degree of poisoning is pinned to gamma0.
  bool adaptive = true;

  void Validate() const;
  double InitialGamma(double epsilon) const {
    return gamma0 < 0.0 ? epsilon : gamma0;
  }
};

struct AttackState {
  // Average compromised validation loss of every completed step, in order.
  std::vector<double> episodic_losses;
  // Most recent non-zero degree of poisoning.
  double gamma_current = 0.0;
  // Degree of poisoning for the current episode.
  double gamma_episode = 0.0;
  double loss_ratio = 0.0;
  double avg_loss = 0.0;
};

AttackState InitAttackState(const AttackConfig& cfg, double epsilon);

// One loss-memorization step given the current average compromised
// validation loss. The ratio against the mean of the history is 0 on the
// first step (no history, poison with the current gamma); a zero historical
// mean is treated as ratio 1. Then:
//   R > r_hi  -> gamma_t = 0
//   R < r_lo  -> gamma_t = gamma + rho R gamma
//   otherwise -> gamma_t = gamma - rho R gamma
// gamma is replaced by gamma_t only when gamma_t != 0, and the loss is
// appended after the ratio is computed.
AttackState UpdateGamma(AttackState state, double avg_loss,
                        const AttackConfig& cfg);

// Average validation loss of `global` over the compromised nodes' shards.
double AverageValidationLoss(const Mlp& model, std::span<const double> global,
                             std::span<const NodeShard* const> shards);

AttackState MpelmStep(AttackState state, const Mlp& model,
                      std::span<const double> global,
                      std::span<const NodeShard* const> compromised,
                      const AttackConfig& cfg);

}  // namespace ldpfl

#endif  // LDPFL_ADVERSARY_H_
