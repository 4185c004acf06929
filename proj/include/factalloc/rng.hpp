// Copyright 2026 The Authors.
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

#ifndef FACTALLOC_RNG_HPP_
#define FACTALLOC_RNG_HPP_

#include <cstdint>
#include <limits>
#include <string_view>

namespace factalloc {

// Counter-based generator: output n of stream s under seed k is
// splitmix64(key(k, s) + n * golden_gamma). Any (seed, stream, position) is
// addressable directly, so replicate r can own stream r and results do not
// depend on the order replicates run in. Satisfies
// UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::string_view kAlgorithm = "splitmix64-counter/1";

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  // Uniform integer in [0, bound) without modulo bias. bound > 0.
  std::uint64_t uniform_below(std::uint64_t bound);

  std::uint64_t position() const { return counter_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace factalloc

#endif  // FACTALLOC_RNG_HPP_
