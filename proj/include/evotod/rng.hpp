// Copyright 2026 The evotod Authors.
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

#ifndef EVOTOD_RNG_HPP_
#define EVOTOD_RNG_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace evotod {

struct Draw {
  std::string site;
  double value;
};

// Seedable generator threaded through the engine. Conversions to real and
// integer ranges are done by hand so that sequences are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform(std::string_view site = {}) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (log_draws_) draws_.push_back({std::string(site), u});
    return u;
  }

  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n, std::string_view site = {}) {
    const auto i = static_cast<std::size_t>(uniform(site) * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  bool bernoulli(double p, std::string_view site = {}) { return uniform(site) < p; }

  // Independent stream derived from this generator's seed and a label.
  Rng fork(std::string_view label) const;

  void set_logging(bool on) { log_draws_ = on; }
  const std::vector<Draw>& draws() const { return draws_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool log_draws_ = false;
  std::vector<Draw> draws_;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// splitmix64 finaliser, used to decorrelate derived seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace evotod

#endif  // EVOTOD_RNG_HPP_
