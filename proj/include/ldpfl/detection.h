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

#ifndef LDPFL_DETECTION_H_
#define LDPFL_DETECTION_H_

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ldpfl/data.h"
#include "ldpfl/model.h"

namespace ldpfl {

enum class DetectorKind { kOff, kNorm, kAccuracy, kMix };

// Which side of the loss comparison counts as anomalous. kAsWritten flags a
// model whose candidate global has lower loss than the comparison standard's;
// kReversed flags one with higher loss.
enum class Orientation { kAsWritten, kReversed };

std::string_view ToString(DetectorKind kind);
std::string_view ToString(Orientation orientation);
DetectorKind ParseDetectorKind(std::string_view s);
Orientation ParseOrientation(std::string_view s);

struct DetectorConfig {
  DetectorKind kind = DetectorKind::kOff;
  double beta1 = 1.0;
  double beta2 = 0.1;
  double d_max = 10.0;
  Orientation orientation = Orientation::kReversed;

  void Validate() const;
};

struct Verdict {
  int node_id = 0;
  double rate = 1.0;
  bool flagged = false;
  // Diagnostics; NaN when the component was not evaluated.
  double d = 0.0;
  double e1 = 0.0;
  double loss_update = 0.0;
  double loss_standard = 0.0;
  double e2 = 0.0;
};

// Mean of every update except index i, accumulated as a running mean in
// index order. Throws std::invalid_argument when fewer than two updates.
std::vector<double> ComparisonStandard(std::span<const ModelUpdate> updates,
                                       std::size_t i);

// Squared-distance test against the comparison standard:
//   d  = ||xi_i - st||^2
//   e1 = d / ||st||^2 if d < d_max ||st||^2, else d_max
//   rate = clamp(1 - max(0, e1 - beta1), 0, 1)
// A zero standard with d > 0 gives e1 = d_max.
Verdict NormRate(std::span<const ModelUpdate> updates, std::size_t i,
                 const DetectorConfig& cfg);

// Rate from the two validation losses (candidate global with the update vs
// with the standard). e2 is the relative loss gap on the anomalous side;
// rate = 1 if e2 <= beta2 else 1 - e2.
Verdict AccuracyRateFromLosses(double loss_update, double loss_standard,
                               const DetectorConfig& cfg);

Verdict AccuracyRate(std::span<const ModelUpdate> updates, std::size_t i,
                     const DetectorConfig& cfg, const Mlp& model,
                     std::span<const double> global,
                     std::span<const Sample> validation);

// Verdicts for every update under cfg.kind. For kMix a model is flagged when
// either test flags it and its rate is the smaller of the two.
struct DetectionContext {
  const Mlp* model = nullptr;
  std::span<const double> global;
  std::span<const Sample> validation;
};
std::vector<Verdict> EvaluateSerial(std::span<const ModelUpdate> updates,
                                    const DetectorConfig& cfg,
                                    const DetectionContext& ctx);
// Same results as EvaluateSerial; nodes scored concurrently with OpenMP.
std::vector<Verdict> EvaluateParallel(std::span<const ModelUpdate> updates,
                                      const DetectorConfig& cfg,
                                      const DetectionContext& ctx);

std::set<int> FlaggedIds(std::span<const Verdict> verdicts);

// Union of the norm and accuracy flags.
std::set<int> MixFilter(std::span<const ModelUpdate> updates,
                        const DetectorConfig& cfg, const DetectionContext& ctx);

struct EpisodeVerdicts {
  std::vector<Verdict> verdicts;
  std::set<int> malicious;
};

// Mean over episodes of the percentage of submitted models classified
// correctly (malicious flagged, benign unflagged).
double DetectionAccuracy(std::span<const EpisodeVerdicts> episodes);

}  // namespace ldpfl

#endif  // LDPFL_DETECTION_H_
