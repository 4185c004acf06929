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

#ifndef FACTALLOC_ERRORS_HPP_
#define FACTALLOC_ERRORS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace factalloc {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto its exit codes.
class AllocError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: shapes, ranges, schema problems.
class ValidationError : public AllocError {
 public:
  using AllocError::AllocError;
};

// Bounds or capacities admit no allocation.
class InfeasibleError : public AllocError {
 public:
  using AllocError::AllocError;
};

// A closed-form block allocation was requested for D or E but neither of
// the homoscedasticity conditions it needs holds.
class ConditionNotMetError : public AllocError {
 public:
  using AllocError::AllocError;
};

class OracleCapExceededError : public AllocError {
 public:
  OracleCapExceededError(std::uint64_t state_space, std::uint64_t cap)
      : AllocError("exhaustive search refused: " + std::to_string(state_space) +
                   " feasible points exceed the cap of " + std::to_string(cap)),
        state_space_(state_space),
        cap_(cap) {}

  std::uint64_t state_space() const { return state_space_; }
  std::uint64_t cap() const { return cap_; }

 private:
  std::uint64_t state_space_;
  std::uint64_t cap_;
};

}  // namespace factalloc

#endif  // FACTALLOC_ERRORS_HPP_
