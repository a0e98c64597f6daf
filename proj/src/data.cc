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

#include "ldpfl/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string_view>

namespace ldpfl {
namespace {

constexpr std::string_view kHeader =
    "Date;Time;Global_active_power;Global_reactive_power;Voltage;"
    "Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3";
constexpr std::size_t kNumFields = 9;
constexpr std::size_t kNumNumeric = 7;

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n'))
    s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

bool ParseDouble(std::string_view s, double& out) {
  s = Trim(s);
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::vector<std::size_t> Permutation(std::size_t n, Substream& stream) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = stream.Below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

constexpr std::array<double, kNumFeatures> kTruthWeights = {0.25, 0.15, 0.1,
                                                            0.1,  0.12, 0.08};
constexpr double kTruthBias = 0.1;

}  // namespace

std::vector<Sample> ParsePowerCsv(std::istream& in, MissingPolicy policy,
                                  IngestStats* stats) {
  (void)policy;  // kDropRow is the only policy.
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty input: no header row");
  if (Trim(line) != kHeader) {
    throw IngestError("unexpected header: '" + std::string(Trim(line)) + "'");
  }

  IngestStats local;
  std::vector<std::array<double, kNumNumeric>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = Trim(line);
    if (view.empty()) continue;
    ++local.raw_rows;

    std::array<std::string_view, kNumFields> fields;
    std::size_t count = 0;
    std::size_t start = 0;
    bool too_many = false;
    while (true) {
      std::size_t pos = view.find(';', start);
      std::string_view field = view.substr(
          start, pos == std::string_view::npos ? std::string_view::npos
                                               : pos - start);
      if (count == kNumFields) {
        too_many = true;
        break;
      }
      fields[count++] = field;
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    if (too_many || count != kNumFields) {
      ++local.malformed_rows;
      local.malformed_line_numbers.push_back(line_no);
      continue;
    }
    bool missing = false;
    for (std::size_t f = 2; f < kNumFields; ++f) {
      if (Trim(fields[f]) == "?") missing = true;
    }
    if (missing) {
      ++local.missing_rows;
      continue;
    }
    std::array<double, kNumNumeric> values{};
    bool ok = true;
    for (std::size_t f = 0; f < kNumNumeric && ok; ++f) {
      ok = ParseDouble(fields[f + 2], values[f]);
    }
    if (!ok) {
      ++local.malformed_rows;
      local.malformed_line_numbers.push_back(line_no);
      continue;
    }
    rows.push_back(values);
  }

  if (local.raw_rows == 0) throw IngestError("empty input: no data rows");
  if (static_cast<double>(local.malformed_rows) >
      kMaxMalformedFraction * static_cast<double>(local.raw_rows)) {
    std::ostringstream msg;
    msg << local.malformed_rows << " of " << local.raw_rows
        << " rows are malformed; lines:";
    for (std::size_t n : local.malformed_line_numbers) msg << ' ' << n;
    throw IngestError(msg.str());
  }

  std::array<double, kNumNumeric> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < kNumNumeric; ++c) {
      lo[c] = std::min(lo[c], r[c]);
      hi[c] = std::max(hi[c], r[c]);
    }
  }
  auto normalize = [&](double v, std::size_t c) {
    double range = hi[c] - lo[c];
    return range > 0.0 ? (v - lo[c]) / range : 0.0;
  };

  std::vector<Sample> samples;
  samples.reserve(rows.size());
  for (const auto& r : rows) {
    Sample s;
    s.target = normalize(r[0], 0);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      s.features[f] = normalize(r[f + 1], f + 1);
    }
    samples.push_back(s);
  }
  local.retained_rows = samples.size();
  if (stats != nullptr) *stats = std::move(local);
  return samples;
}

std::vector<Sample> IngestCsv(const std::filesystem::path& path,
                              MissingPolicy policy, IngestStats* stats) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  return ParsePowerCsv(in, policy, stats);
}

std::uint64_t ContentHash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void WriteCache(const std::filesystem::path& cache_path,
                std::span<const Sample> samples, std::uint64_t source_hash) {
  std::ofstream out(cache_path);
  if (!out) throw IngestError("cannot write " + cache_path.string());
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(source_hash));
  out << "# ldpfl-cache v1 source_fnv1a64=" << hex
      << " rows=" << samples.size() << '\n';
  out << "f0,f1,f2,f3,f4,f5,target\n";
  char num[32];
  for (const Sample& s : samples) {
    for (double f : s.features) {
      std::snprintf(num, sizeof(num), "%.17g", f);
      out << num << ',';
    }
    std::snprintf(num, sizeof(num), "%.17g", s.target);
    out << num << '\n';
  }
}

std::optional<std::vector<Sample>> ReadCache(
    const std::filesystem::path& cache_path, std::uint64_t source_hash) {
  std::ifstream in(cache_path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(source_hash));
  const std::string prefix =
      std::string("# ldpfl-cache v1 source_fnv1a64=") + hex + " rows=";
  if (line.rfind(prefix, 0) != 0) return std::nullopt;
  std::size_t rows = std::stoull(line.substr(prefix.size()));
  if (!std::getline(in, line)) return std::nullopt;

  std::vector<Sample> samples;
  samples.reserve(rows);
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    std::string_view view = line;
    std::array<double, kNumFeatures + 1> values{};
    for (std::size_t c = 0; c <= kNumFeatures; ++c) {
      std::size_t pos = view.find(',');
      if (!ParseDouble(view.substr(0, pos), values[c])) return std::nullopt;
      view = pos == std::string_view::npos ? std::string_view{}
                                           : view.substr(pos + 1);
    }
    Sample s;
    std::copy_n(values.begin(), kNumFeatures, s.features.begin());
    s.target = values[kNumFeatures];
    samples.push_back(s);
  }
  if (samples.size() != rows) return std::nullopt;
  return samples;
}

std::vector<Sample> IngestCached(const std::filesystem::path& csv_path,
                                 const std::filesystem::path& cache_dir,
                                 IngestStats* stats) {
  const std::uint64_t hash = ContentHash(csv_path);
  char name[40];
  std::snprintf(name, sizeof(name), "%016llx.cache.csv",
                static_cast<unsigned long long>(hash));
  const auto cache_path = cache_dir / name;
  if (auto cached = ReadCache(cache_path, hash)) {
    if (stats != nullptr) {
      *stats = IngestStats{};
      stats->retained_rows = cached->size();
    }
    return *std::move(cached);
  }
  auto samples = IngestCsv(csv_path, MissingPolicy::kDropRow, stats);
  std::filesystem::create_directories(cache_dir);
  WriteCache(cache_path, samples, hash);
  return samples;
}

double SyntheticTruth(const std::array<double, kNumFeatures>& features) {
  double y = kTruthBias;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    y += kTruthWeights[f] * features[f];
  }
  return y;
}

std::vector<Sample> Synthesize(std::size_t n_samples, std::uint64_t seed,
                               double noise_scale) {
  if (n_samples == 0) throw std::invalid_argument("n_samples must be > 0");
  Substream stream(seed, StreamTag::kSynthesize);
  std::vector<Sample> samples(n_samples);
  for (Sample& s : samples) {
    for (double& f : s.features) f = stream.Uniform();
    double noise = stream.Normal();
    double y = SyntheticTruth(s.features);
    if (noise_scale != 0.0) y = std::clamp(y + noise_scale * noise, 0.0, 1.0);
    s.target = y;
  }
  return samples;
}

std::vector<NodeShard> Partition(std::span<const Sample> data, int num_nodes,
                                 std::uint64_t seed) {
  if (num_nodes < 1) throw std::invalid_argument("K must be >= 1");
  if (data.size() < static_cast<std::size_t>(num_nodes)) {
    throw std::invalid_argument("fewer samples than nodes");
  }
  Substream stream(seed, StreamTag::kPartition);
  const auto order = Permutation(data.size(), stream);
  const std::size_t k = static_cast<std::size_t>(num_nodes);
  const std::size_t base = data.size() / k;
  const std::size_t extra = data.size() % k;

  std::vector<NodeShard> shards(k);
  std::size_t cursor = 0;
  for (std::size_t node = 0; node < k; ++node) {
    const std::size_t size = base + (node < extra ? 1 : 0);
    const auto n_val = static_cast<std::size_t>(
        std::lround(kValidationFraction * static_cast<double>(size)));
    NodeShard& shard = shards[node];
    shard.node_id = static_cast<int>(node);
    shard.train.reserve(size - n_val);
    shard.validation.reserve(n_val);
    for (std::size_t i = 0; i < size; ++i) {
      const Sample& s = data[order[cursor++]];
      if (i < size - n_val) {
        shard.train.push_back(s);
      } else {
        shard.validation.push_back(s);
      }
    }
  }
  return shards;
}

HoldoutSplit SplitHoldout(std::span<const Sample> data, double fraction,
                          std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw std::invalid_argument("holdout fraction must be in [0, 1)");
  }
  Substream stream(seed, StreamTag::kServerSplit);
  const auto order = Permutation(data.size(), stream);
  const auto n_hold = static_cast<std::size_t>(
      std::lround(fraction * static_cast<double>(data.size())));
  HoldoutSplit split;
  split.holdout.reserve(n_hold);
  split.rest.reserve(data.size() - n_hold);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_hold ? split.holdout : split.rest).push_back(data[order[i]]);
  }
  return split;
}

FederatedData PrepareFederatedData(std::span<const Sample> data, int num_nodes,
                                   std::uint64_t seed, double server_fraction) {
  HoldoutSplit split = SplitHoldout(data, server_fraction, seed);
  FederatedData fed;
  fed.shards = Partition(split.rest, num_nodes, seed);
  fed.server_validation = std::move(split.holdout);
  return fed;
}

std::vector<Sample> PooledValidation(std::span<const NodeShard> shards) {
  std::vector<Sample> pooled;
  for (const NodeShard& shard : shards) {
    pooled.insert(pooled.end(), shard.validation.begin(),
                  shard.validation.end());
  }
  return pooled;
}

BatchSampler::BatchSampler(std::span<const Sample> train,
                           std::size_t batch_size, Substream stream)
    : train_(train), batch_size_(batch_size), stream_(std::move(stream)) {
  if (train_.empty()) throw std::invalid_argument("empty training set");
  if (batch_size_ == 0) throw std::invalid_argument("batch_size must be > 0");
  Reshuffle();
}

void BatchSampler::Reshuffle() {
  order_ = Permutation(train_.size(), stream_);
  cursor_ = 0;
}

std::vector<Sample> BatchSampler::Next() {
  if (cursor_ >= order_.size()) Reshuffle();
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<Sample> batch;
  batch.reserve(end - cursor_);
  for (; cursor_ < end; ++cursor_) batch.push_back(train_[order_[cursor_]]);
  return batch;
}

}  // namespace ldpfl
