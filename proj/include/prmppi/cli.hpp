// Copyright 2026 The PRMPPI Authors
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


#ifndef PRMPPI_CLI_HPP_
#define PRMPPI_CLI_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "prmppi/simlab.hpp"

namespace prmppi::cli {

// Flat configuration: dotted key -> JSON-encoded value. Nested objects in a
// config file are flattened, so {"svgd": {"iterations": 5}} and
// {"svgd.iterations": 5} are equivalent.
using FlatConfig = std::map<std::string, std::string>;

// Raised for malformed command lines and missing files (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

FlatConfig load_config_file(const std::filesystem::path& path);
FlatConfig parse_config_text(std::string_view json_text);

// Applies "key=value". The value is read as JSON when it parses, otherwise
// as a string.
void apply_override(FlatConfig& config, std::string_view assignment);
void set_value(FlatConfig& config, const std::string& key,
               const std::string& json_value);
std::string quote(std::string_view text);

struct RunConfig {
  std::string environment;
  std::string controller = "prmppi";
  std::string preset = "desk";
  int trials = 20;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "results";
  int workers = 0;  // 0 = hardware concurrency
  bool timing = false;
  bool log_steps = true;
  bool log_beliefs = true;
  EnvironmentOverrides env_overrides;
};

struct ResolvedRun {
  RunConfig run;
  Environment env;
  ControllerSpec spec;
  FlatConfig config;  // effective keys, including defaults that were applied
};

// The validator shared by `run` and `validate`. Throws ConfigError,
// InsufficientSamples or ContractViolation.
ResolvedRun resolve(const FlatConfig& config);

// Writes through a temporary file in the same directory and renames it into
// place.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

std::string summary_json(const ResolvedRun& run, const BenchmarkResult& result);
std::string trial_csv(const Environment& env, const TrialRecord& record,
                      bool timing);

// Exit codes: 0 success (failed trials are data), 2 usage or configuration
// error, 3 I/O error.
int cmd_run(const FlatConfig& config, std::ostream& out, std::ostream& err);
int cmd_validate(const FlatConfig& config, std::ostream& out,
                 std::ostream& err);
// Renders every summary.json under `dir` as a mean +- std table.
std::string cmd_table(const std::filesystem::path& dir);

}  // namespace prmppi::cli

#endif  // PRMPPI_CLI_HPP_
