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

#ifndef LDPFL_DP_H_
#define LDPFL_DP_H_

#include <span>
#include <vector>

#include "ldpfl/model.h"
#include "ldpfl/rng.h"

namespace ldpfl {

// Gaussian local-DP parameters. The sensitivity is the clipping threshold.
struct PrivacySpec {
  double epsilon = 1.0;
  double delta = 0.001;
  double clip_c = 1.0;
  // Noise multiplier sqrt(2 ln(1.25/delta)) * sensitivity / epsilon.
  double sigma = 0.0;

  double sensitivity() const { return clip_c; }
  // Per-coordinate standard deviation of the benign noise, S * sigma.
  double noise_std() const { return sensitivity() * sigma; }

  // Builds a spec with sigma at the smallest value the calibration allows.
  static PrivacySpec Calibrated(double epsilon, double delta, double clip_c);
};

// sigma = sqrt(2 ln(1.25/delta)) * sensitivity / epsilon. Throws
// std::invalid_argument unless epsilon > 0 and 0 < delta < 1.
double CalibrateSigma(double epsilon, double delta, double sensitivity);

// delta / max(1, ||delta|| / clip_c).
std::vector<double> ClipVector(std::span<const double> v, double clip_c);
ModelUpdate Clip(const ModelUpdate& update, double clip_c);

// Adds i.i.d. N(mean, stddev^2) to every coordinate, drawing one standard
// normal per coordinate from `stream` in index order.
void AddGaussian(std::span<double> v, double mean, double stddev,
                 Substream& stream);

// clipped + N(0, (S sigma)^2 I).
ModelUpdate AddNoise(const ModelUpdate& clipped, const PrivacySpec& spec,
                     Substream stream);

enum class LedgerDecision { kContinue, kStop };

// Tracks the probability that the privacy budget has been exceeded under
// independent composition: cumulative = 1 - prod_t (1 - delta_t). Training
// stops once cumulative > stop_threshold.
class PrivacyLedger {
 public:
  explicit PrivacyLedger(double stop_threshold);

  LedgerDecision Account(double delta_step);
  LedgerDecision Account(const PrivacySpec& spec) {
    return Account(spec.delta);
  }

  double cumulative_delta() const { return cumulative_; }
  double stop_threshold() const { return stop_threshold_; }
  const std::vector<double>& per_episode_delta() const { return steps_; }
  bool stopped() const { return cumulative_ > stop_threshold_; }

 private:
  double stop_threshold_;
  double cumulative_ = 0.0;
  std::vector<double> steps_;
};

inline constexpr double kDefaultStopThreshold = 0.01;

}  // namespace ldpfl

#endif  // LDPFL_DP_H_
