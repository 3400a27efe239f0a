// Copyright 2026 The Deconfound Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DECONFOUND_RNG_HPP_
#define DECONFOUND_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>

namespace deconfound {

// Counter-based random stream. Every draw is a pure function of
// (seed, stream, index, counter), so a stream can be re-created anywhere and
// parallel consumers never share state. The mixing function is SplitMix64's
// finalizer applied to a Weyl-sequenced key.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
      : key_(Mix(Mix(seed ^ 0x243f6a8885a308d3ULL) ^
                 (stream * 0x9e3779b97f4a7c15ULL)) ^
             Mix(index + 0x13198a2e03707344ULL)) {}

  std::uint64_t NextU64() {
    return Mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). The modulo bias is below 2^-40 for the small
  // n used by the generators.
  std::uint64_t Below(std::uint64_t n) { return NextU64() % n; }

  // Standard normal via Box-Muller. Both uniforms are consumed on every call
  // so the counter advances by a fixed amount per draw.
  double Normal() {
    double u1 = 1.0 - Uniform();  // (0, 1]
    double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  static std::uint64_t Mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stream tags. Distinct tags keep the draws of unrelated purposes apart even
// when they share a seed and an index.
namespace streams {
inline constexpr std::uint64_t kItem = 1;
inline constexpr std::uint64_t kContext = 2;
inline constexpr std::uint64_t kLoadings = 3;
inline constexpr std::uint64_t kFolds = 4;
inline constexpr std::uint64_t kArmNoise = 5;
inline constexpr std::uint64_t kSplit = 6;
}  // namespace streams

}  // namespace deconfound

#endif  // DECONFOUND_RNG_HPP_
