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

#ifndef LDPFL_ACCEPTANCE_H_
#define LDPFL_ACCEPTANCE_H_

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "ldpfl/adversary.h"

namespace ldpfl {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct AcceptanceOptions {
  // Scratch space for runs that write metric files.
  std::filesystem::path work_dir = std::filesystem::temp_directory_path() /
                                   "ldpfl-accept";
  // Criteria to run; empty means all.
  std::set<int> only;
  // Worker threads for the parallel leg of the determinism check.
  int parallel_threads = 4;
};

// "PASS  7 stealth-direction (12.3s / 1200s): ..."
std::string FormatResult(const CriterionResult& result);

// Runs each criterion in isolation; a failure or exception in one does not
// stop the others. `on_result` is called as each criterion finishes.
std::vector<CriterionResult> RunAcceptance(
    const AcceptanceOptions& options,
    const std::function<void(const CriterionResult&)>& on_result = {});

using SigmaFn = std::function<double(double epsilon, double delta,
                                     double sensitivity)>;
using GammaUpdateFn =
    std::function<AttackState(AttackState, double, const AttackConfig&)>;

// Individual criteria. The injectable pieces let tests confirm that a broken
// implementation is caught.
CriterionResult CheckGradientCorrectness();
CriterionResult CheckNoiseCalibration(const SigmaFn& calibrate);
CriterionResult CheckBenignConvergence();
CriterionResult CheckPrivacyUtility();
CriterionResult CheckSingleAttackerDamage();
CriterionResult CheckGammaMonotonicDamage();
CriterionResult CheckStealthDirection();
CriterionResult CheckGammaZeroCollapse();
CriterionResult CheckRdpConvergence();
CriterionResult CheckQLearningExactness();
CriterionResult CheckDetectorOracles();
CriterionResult CheckDeterminism(const std::filesystem::path& work_dir,
                                 int parallel_threads);

// Replays a fixed loss sequence through `update` and compares the
// per-episode gamma against hand-computed values.
bool GammaTraceMatchesOracle(const GammaUpdateFn& update,
                             std::string* detail = nullptr);

}  // namespace ldpfl

#endif  // LDPFL_ACCEPTANCE_H_
