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

#ifndef FACTALLOC_CLI_CLI_HPP_
#define FACTALLOC_CLI_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace factalloc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitValidation = 2,
  kExitInfeasible = 3,
  kExitConditionNotMet = 4,
  kExitOracleCap = 5,
};

// Runs the "alloc" command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace factalloc::cli

#endif  // FACTALLOC_CLI_CLI_HPP_
