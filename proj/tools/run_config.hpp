#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairflow/bnb.hpp"
#include "pairflow/error.hpp"
#include "pairflow/eval.hpp"
#include "pairflow/ipm.hpp"
#include "pairflow/synth.hpp"

namespace pairflow::cli {

// An input or config file is missing or unreadable.
class InputMissing : public Error {
 public:
  using Error::Error;
};

// Every setting a command can read. Resolution order: built-in defaults,
// then the config file, then command-line flags.
struct RunConfig {
  std::string command;
  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<std::string> truth;
  std::string format;  // resolved per command when left empty
  std::optional<std::string> window;
  std::optional<Index> top_k;
  std::optional<Index> m;
  std::vector<Index> m_sweep;
  std::optional<std::string> quote_a;
  std::optional<std::string> quote_b;

  IpmConfig ipm;
  std::uint64_t node_cap = 10'000'000;
  BranchRule branch_rule = BranchRule::LargestValue;
  BoundRule bound_rule = BoundRule::Spanning;
  CoverageWeights weights = CoverageWeights::Realized;
  int threads = 1;
  std::optional<Index> reference_n;

  SynthConfig synth;
  std::uint64_t seed = 0;  // shared by the estimator start and the generator
};

/// Names accepted in config files (underscore form). Flags use the same
/// names with dashes.
const std::vector<std::string>& config_keys();

/// Sets one key from its text form. Throws InfeasibleConfig for unknown keys
/// or unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Reads a flat JSON object or an INI file of `key = value` lines. Returns
/// (key, value) pairs in file order. Throws InputMissing when the file cannot
/// be read, InfeasibleConfig on syntax errors and unknown keys.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

/// Parses "14,20,30" and ranges "a:b" or "a:b:step" (inclusive), in any mix.
std::vector<Index> parse_m_sweep(const std::string& text);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace pairflow::cli
