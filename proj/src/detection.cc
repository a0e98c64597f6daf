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

#include "ldpfl/detection.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

namespace ldpfl {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Verdict Combine(const Verdict& norm, const Verdict& acc) {
  Verdict v = norm;
  v.loss_update = acc.loss_update;
  v.loss_standard = acc.loss_standard;
  v.e2 = acc.e2;
  v.rate = std::min(norm.rate, acc.rate);
  v.flagged = norm.flagged || acc.flagged;
  return v;
}

Verdict ScoreOne(std::span<const ModelUpdate> updates, std::size_t i,
                 const DetectorConfig& cfg, const DetectionContext& ctx) {
  switch (cfg.kind) {
    case DetectorKind::kOff: {
      Verdict v;
      v.node_id = updates[i].node_id;
      v.d = v.e1 = v.loss_update = v.loss_standard = v.e2 = kNaN;
      return v;
    }
    case DetectorKind::kNorm:
      return NormRate(updates, i, cfg);
    case DetectorKind::kAccuracy:
      return AccuracyRate(updates, i, cfg, *ctx.model, ctx.global,
                          ctx.validation);
    case DetectorKind::kMix:
      return Combine(NormRate(updates, i, cfg),
                     AccuracyRate(updates, i, cfg, *ctx.model, ctx.global,
                                  ctx.validation));
  }
  throw std::logic_error("unknown detector kind");
}

}  // namespace

std::string_view ToString(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kOff: return "off";
    case DetectorKind::kNorm: return "norm";
    case DetectorKind::kAccuracy: return "accuracy";
    case DetectorKind::kMix: return "mix";
  }
  return "?";
}

std::string_view ToString(Orientation orientation) {
  return orientation == Orientation::kAsWritten ? "as_written" : "reversed";
}

DetectorKind ParseDetectorKind(std::string_view s) {
  if (s == "off" || s == "none") return DetectorKind::kOff;
  if (s == "norm") return DetectorKind::kNorm;
  if (s == "accuracy") return DetectorKind::kAccuracy;
  if (s == "mix") return DetectorKind::kMix;
  throw std::invalid_argument("unknown detector kind '" + std::string(s) + "'");
}

Orientation ParseOrientation(std::string_view s) {
  if (s == "as_written") return Orientation::kAsWritten;
  if (s == "reversed") return Orientation::kReversed;
  throw std::invalid_argument("unknown orientation '" + std::string(s) + "'");
}

void DetectorConfig::Validate() const {
  if (!(beta1 > 0.0)) throw std::invalid_argument("detector.beta1 must be > 0");
  if (!(beta2 >= 0.0)) throw std::invalid_argument("detector.beta2 must be >= 0");
  if (!(d_max > 0.0)) throw std::invalid_argument("detector.d_max must be > 0");
}

std::vector<double> ComparisonStandard(std::span<const ModelUpdate> updates,
                                       std::size_t i) {
  if (updates.size() < 2) {
    throw std::invalid_argument("comparison standard needs at least 2 updates");
  }
  if (i >= updates.size()) throw std::out_of_range("update index");
  const std::size_t q = updates[i].delta.size();
  std::vector<double> mean(q, 0.0);
  double count = 0.0;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    if (k == i) continue;
    const auto& delta = updates[k].delta;
    if (delta.size() != q) throw DimensionError("update length mismatch");
    count += 1.0;
    for (std::size_t j = 0; j < q; ++j) {
      mean[j] += (delta[j] - mean[j]) / count;
    }
  }
  return mean;
}

Verdict NormRate(std::span<const ModelUpdate> updates, std::size_t i,
                 const DetectorConfig& cfg) {
  const auto standard = ComparisonStandard(updates, i);
  const auto& xi = updates[i].delta;
  double d = 0.0;
  for (std::size_t j = 0; j < xi.size(); ++j) {
    const double diff = xi[j] - standard[j];
    d += diff * diff;
  }
  const double ref = SquaredNorm(standard);
  double e1;
  if (d == 0.0) {
    e1 = 0.0;
  } else if (ref == 0.0 || d >= cfg.d_max * ref) {
    e1 = cfg.d_max;
  } else {
    e1 = d / ref;
  }
  Verdict v;
  v.node_id = updates[i].node_id;
  v.d = d;
  v.e1 = e1;
  v.loss_update = v.loss_standard = v.e2 = kNaN;
  v.rate = std::clamp(1.0 - std::max(0.0, e1 - cfg.beta1), 0.0, 1.0);
  v.flagged = v.rate < 1.0;
  return v;
}

Verdict AccuracyRateFromLosses(double loss_update, double loss_standard,
                               const DetectorConfig& cfg) {
  double gap = 0.0;
  if (cfg.orientation == Orientation::kReversed) {
    if (loss_update > loss_standard) {
      gap = (loss_update - loss_standard) / loss_update;
    }
  } else {
    if (loss_standard > loss_update) {
      gap = (loss_standard - loss_update) / loss_standard;
    }
  }
  Verdict v;
  v.d = v.e1 = kNaN;
  v.loss_update = loss_update;
  v.loss_standard = loss_standard;
  v.e2 = gap;
  v.rate = gap <= cfg.beta2 ? 1.0 : 1.0 - gap;
  v.flagged = v.rate < 1.0;
  return v;
}

Verdict AccuracyRate(std::span<const ModelUpdate> updates, std::size_t i,
                     const DetectorConfig& cfg, const Mlp& model,
                     std::span<const double> global,
                     std::span<const Sample> validation) {
  if (validation.empty()) {
    throw std::invalid_argument("accuracy detection needs validation data");
  }
  const auto standard = ComparisonStandard(updates, i);
  const auto& xi = updates[i].delta;
  if (global.size() != xi.size()) throw DimensionError("global/update length");
  std::vector<double> with_update(global.begin(), global.end());
  std::vector<double> with_standard(global.begin(), global.end());
  for (std::size_t j = 0; j < xi.size(); ++j) {
    with_update[j] += xi[j];
    with_standard[j] += standard[j];
  }
  Verdict v = AccuracyRateFromLosses(model.MseLoss(with_update, validation),
                                     model.MseLoss(with_standard, validation),
                                     cfg);
  v.node_id = updates[i].node_id;
  return v;
}

std::vector<Verdict> EvaluateSerial(std::span<const ModelUpdate> updates,
                                    const DetectorConfig& cfg,
                                    const DetectionContext& ctx) {
  std::vector<Verdict> verdicts(updates.size());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    verdicts[i] = ScoreOne(updates, i, cfg, ctx);
  }
  return verdicts;
}

std::vector<Verdict> EvaluateParallel(std::span<const ModelUpdate> updates,
                                      const DetectorConfig& cfg,
                                      const DetectionContext& ctx) {
  std::vector<Verdict> verdicts(updates.size());
  std::exception_ptr error;
  const auto n = static_cast<long>(updates.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      verdicts[static_cast<std::size_t>(i)] =
          ScoreOne(updates, static_cast<std::size_t>(i), cfg, ctx);
    } catch (...) {
#pragma omp critical(ldpfl_detection_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return verdicts;
}

std::set<int> FlaggedIds(std::span<const Verdict> verdicts) {
  std::set<int> ids;
  for (const Verdict& v : verdicts) {
    if (v.flagged) ids.insert(v.node_id);
  }
  return ids;
}

std::set<int> MixFilter(std::span<const ModelUpdate> updates,
                        const DetectorConfig& cfg,
                        const DetectionContext& ctx) {
  DetectorConfig norm = cfg, acc = cfg;
  norm.kind = DetectorKind::kNorm;
  acc.kind = DetectorKind::kAccuracy;
  std::set<int> flagged = FlaggedIds(EvaluateSerial(updates, norm, ctx));
  const std::set<int> by_acc = FlaggedIds(EvaluateSerial(updates, acc, ctx));
  flagged.insert(by_acc.begin(), by_acc.end());
  return flagged;
}

double DetectionAccuracy(std::span<const EpisodeVerdicts> episodes) {
  if (episodes.empty()) return 0.0;
  double total = 0.0;
  for (const EpisodeVerdicts& ep : episodes) {
    if (ep.verdicts.empty()) continue;
    std::size_t correct = 0;
    for (const Verdict& v : ep.verdicts) {
      const bool malicious = ep.malicious.count(v.node_id) > 0;
      if (malicious == v.flagged) ++correct;
    }
    total += 100.0 * static_cast<double>(correct) /
             static_cast<double>(ep.verdicts.size());
  }
  return total / static_cast<double>(episodes.size());
}

}  // namespace ldpfl
