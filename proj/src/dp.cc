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

#include "ldpfl/dp.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ldpfl {

double CalibrateSigma(double epsilon, double delta, double sensitivity) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  if (!(sensitivity >= 0.0)) {
    throw std::invalid_argument("sensitivity must be >= 0");
  }
  return std::sqrt(2.0 * std::log(1.25 / delta)) * sensitivity / epsilon;
}

PrivacySpec PrivacySpec::Calibrated(double epsilon, double delta,
                                    double clip_c) {
  if (!(clip_c > 0.0)) throw std::invalid_argument("clip_c must be > 0");
  PrivacySpec spec;
  spec.epsilon = epsilon;
  spec.delta = delta;
  spec.clip_c = clip_c;
  spec.sigma = CalibrateSigma(epsilon, delta, clip_c);
  return spec;
}

std::vector<double> ClipVector(std::span<const double> v, double clip_c) {
  if (!(clip_c > 0.0)) throw std::invalid_argument("clip_c must be > 0");
  const double divisor = std::max(1.0, L2Norm(v) / clip_c);
  std::vector<double> out(v.begin(), v.end());
  if (divisor != 1.0) {
    for (double& x : out) x /= divisor;
  }
  return out;
}

ModelUpdate Clip(const ModelUpdate& update, double clip_c) {
  ModelUpdate out = update;
  out.delta = ClipVector(update.delta, clip_c);
  return out;
}

void AddGaussian(std::span<double> v, double mean, double stddev,
                 Substream& stream) {
  for (double& x : v) x += mean + stddev * stream.Normal();
}

ModelUpdate AddNoise(const ModelUpdate& clipped, const PrivacySpec& spec,
                     Substream stream) {
  ModelUpdate out = clipped;
  AddGaussian(out.delta, 0.0, spec.noise_std(), stream);
  return out;
}

PrivacyLedger::PrivacyLedger(double stop_threshold)
    : stop_threshold_(stop_threshold) {
  if (!(stop_threshold >= 0.0)) {
    throw std::invalid_argument("stop threshold must be >= 0");
  }
}

LedgerDecision PrivacyLedger::Account(double delta_step) {
  if (!(delta_step >= 0.0 && delta_step < 1.0)) {
    throw std::invalid_argument("per-episode delta must lie in [0, 1)");
  }
  steps_.push_back(delta_step);
  // 1 - (1 - c)(1 - d) expanded so a single step reports d exactly.
  cumulative_ = std::max(cumulative_,
                         cumulative_ + delta_step - cumulative_ * delta_step);
  return stopped() ? LedgerDecision::kStop : LedgerDecision::kContinue;
}

}  // namespace ldpfl
