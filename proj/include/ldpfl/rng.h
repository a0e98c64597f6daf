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

#ifndef LDPFL_RNG_H_
#define LDPFL_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace ldpfl {

// Purpose tags for derived random streams. Every random draw in a run comes
// from a stream keyed by (master seed, tag, node, episode), so the values a
// node sees never depend on which thread runs it or in what order.
enum class StreamTag : std::uint64_t {
  kInit = 1,
  kPartition = 2,
  kServerSplit = 3,
  kSelect = 4,
  kCompromise = 5,
  kTrain = 6,
  kNoise = 7,
  kRmd = 8,
  kSynthesize = 9,
  kRdp = 10,
  kPartialStop = 11,
};

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t DeriveSeed(std::uint64_t master, StreamTag tag,
                                   std::uint64_t node, std::uint64_t episode) {
  std::uint64_t h = Mix64(master);
  h = Mix64(h ^ static_cast<std::uint64_t>(tag));
  h = Mix64(h ^ (node + 0x632be59bd9b4e019ULL));
  h = Mix64(h ^ (episode + 0x85157af5a2a6b0e3ULL));
  return h;
}

// A reproducible random stream. Cheap to construct; copying it forks the
// state, so a copy replays the same sequence.
class Substream {
 public:
  explicit Substream(std::uint64_t seed) : engine_(seed) {}
  Substream(std::uint64_t master, StreamTag tag, std::uint64_t node = 0,
            std::uint64_t episode = 0)
      : engine_(DeriveSeed(master, tag, node, episode)) {}

  // Standard normal draw.
  double Normal() { return normal_(engine_); }
  // Uniform on [0, 1).
  double Uniform() { return std::generate_canonical<double, 53>(engine_); }
  // Uniform integer on [0, n).
  std::uint64_t Below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ldpfl

#endif  // LDPFL_RNG_H_
