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

#ifndef LDPFL_DATA_H_
#define LDPFL_DATA_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldpfl/rng.h"

namespace ldpfl {

inline constexpr std::size_t kNumFeatures = 6;

// One normalized observation. Features are the six numeric columns other than
// Global_active_power; the target is Global_active_power. All values lie in
// [0, 1] after normalization.
struct Sample {
  std::array<double, kNumFeatures> features{};
  double target = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct NodeShard {
  int node_id = 0;
  std::vector<Sample> train;
  std::vector<Sample> validation;
};

enum class MissingPolicy { kDropRow };

struct IngestStats {
  std::size_t raw_rows = 0;
  std::size_t missing_rows = 0;
  std::size_t malformed_rows = 0;
  std::size_t retained_rows = 0;
  std::vector<std::size_t> malformed_line_numbers;
};

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Maximum fraction of malformed rows tolerated before ingestion fails.
inline constexpr double kMaxMalformedFraction = 0.05;

// Parses the semicolon-separated household power format:
//   Date;Time;Global_active_power;Global_reactive_power;Voltage;
//   Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3
// Rows containing "?" are dropped. Rows with the wrong field count or a
// non-numeric value are malformed; they are dropped too unless they exceed
// kMaxMalformedFraction of the raw rows, in which case IngestError is thrown
// listing their line numbers. Columns are min-max normalized over the
// retained rows; a constant column maps to 0.
std::vector<Sample> ParsePowerCsv(std::istream& in,
                                  MissingPolicy policy = MissingPolicy::kDropRow,
                                  IngestStats* stats = nullptr);

std::vector<Sample> IngestCsv(const std::filesystem::path& path,
                              MissingPolicy policy = MissingPolicy::kDropRow,
                              IngestStats* stats = nullptr);

// Cleaned-data cache. The cache is a CSV whose first line is
//   # ldpfl-cache v1 source_fnv1a64=<16 hex digits> rows=<count>
// followed by the header f0,...,f5,target and one row per Sample written with
// 17 significant digits, so a reload is exact.
std::uint64_t ContentHash(const std::filesystem::path& path);
void WriteCache(const std::filesystem::path& cache_path,
                std::span<const Sample> samples, std::uint64_t source_hash);
// Returns nullopt if the file is absent or keyed by a different hash.
std::optional<std::vector<Sample>> ReadCache(
    const std::filesystem::path& cache_path, std::uint64_t source_hash);
// Ingests `csv_path`, reusing <cache_dir>/<hash>.cache.csv when present.
std::vector<Sample> IngestCached(const std::filesystem::path& csv_path,
                                 const std::filesystem::path& cache_dir,
                                 IngestStats* stats = nullptr);

// Synthetic regression data: six U[0,1) features and a target equal to a
// fixed linear function (range [0.1, 0.9]) plus Gaussian noise of
// `noise_scale`, clamped to [0, 1].
std::vector<Sample> Synthesize(std::size_t n_samples, std::uint64_t seed,
                               double noise_scale = 0.02);
// The noiseless ground truth used by Synthesize.
double SyntheticTruth(const std::array<double, kNumFeatures>& features);

// IID split into `num_nodes` shards whose sizes differ by at most one; the
// first (size mod K) shards get the extra sample. The last round(0.2 * size)
// samples of each shard are its validation set.
std::vector<NodeShard> Partition(std::span<const Sample> data, int num_nodes,
                                 std::uint64_t seed);

inline constexpr double kValidationFraction = 0.20;

struct HoldoutSplit {
  std::vector<Sample> holdout;
  std::vector<Sample> rest;
};
// Random holdout of round(fraction * |data|) samples, disjoint from the rest.
HoldoutSplit SplitHoldout(std::span<const Sample> data, double fraction,
                          std::uint64_t seed);

// Data owned by a federation: K node shards plus a server-held validation
// set used by accuracy detection.
struct FederatedData {
  std::vector<NodeShard> shards;
  std::vector<Sample> server_validation;
};

inline constexpr double kServerHoldoutFraction = 0.02;

FederatedData PrepareFederatedData(std::span<const Sample> data, int num_nodes,
                                   std::uint64_t seed,
                                   double server_fraction = kServerHoldoutFraction);

// Union of every shard's validation set, in shard order.
std::vector<Sample> PooledValidation(std::span<const NodeShard> shards);

// Epoch-based mini-batch sampler over a shard's training set. Each epoch is a
// fresh permutation; every batch has batch_size samples except possibly the
// last of an epoch.
class BatchSampler {
 public:
  BatchSampler(std::span<const Sample> train, std::size_t batch_size,
               Substream stream);

  std::vector<Sample> Next();

 private:
  void Reshuffle();

  std::span<const Sample> train_;
  std::size_t batch_size_;
  Substream stream_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace ldpfl

#endif  // LDPFL_DATA_H_
