// Copyright 2026 The vcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VCOMP_CLI_H_
#define VCOMP_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace vcomp {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;

// Environment variable naming a MachineConfig file used when --config is
// absent.
inline constexpr const char* kConfigEnvVar = "VCOMP_CONFIG";

// Runs the `vcomp` command line. args[0] is the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace vcomp

#endif  // VCOMP_CLI_H_
