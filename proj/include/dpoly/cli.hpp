#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpoly/common.hpp"
#include "dpoly/lattice.hpp"

namespace dpoly {

enum class ExperimentKind {
  LatticeInfo,
  Variance,
  Schedule,
  Pool,
  Clt,
  Oracle,
  FreeEnergy,
  Pc,
};

std::string experiment_name(ExperimentKind kind);

// One validated run request.  Optional fields stay unset unless the user
// supplied them, except tau, which validation resolves to the disorder's
// third moment (or 0 without a disorder) so serialization echoes the value
// actually used.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Pc;
  int b = 2;
  std::optional<int> s;
  std::optional<std::int64_t> n;
  std::optional<int> m;
  std::optional<double> eps;
  std::optional<double> tau;
  std::optional<std::string> disorder;
  std::optional<double> beta;
  std::vector<std::int64_t> n_list;
  std::int64_t pool = 100000;
  std::uint64_t seed = 1;
  std::int64_t cap = kDefaultEnumerationCap;
  std::int64_t trials = 1000;
  int threads = 0;
  std::optional<std::string> out;
  std::optional<std::string> report;

  // b for pool-style experiments, 2 otherwise
  int s_or_default() const;
};

// Line-oriented `key = value` text: one pair per line, '#' starts a comment,
// blank lines skipped, value split at the first '='.  Throws ValidationError
// listing every malformed line.
std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text);

// Canonical config-file text; parse_kv_text + validate_config round-trips it.
std::string serialize_config(const ExperimentConfig& c);

// Folds the merged key/value pairs (later entries win) and checks every
// field.  Throws ValidationError whose message lists all problems, one per
// line, not just the first.
ExperimentConfig validate_config(const std::vector<std::pair<std::string, std::string>>& kv);

struct RunReport {
  std::string version;
  double duration_s = 0.0;
  std::map<std::string, std::string> digests;  // output name -> fnv1a64 hex
  std::string summary_json;                    // headline values, one JSON object
};

std::string report_json(const RunReport& rep, const ExperimentConfig& c);

// Executes the experiment, writing primary data to `out` or to the config's
// output path.  Throws ValidationError / ComputeError on failure.
RunReport run(const ExperimentConfig& c, std::ostream& out);

// Full command-line entry point; args excludes the program name.  Returns
// the process exit code: 0 ok, 1 invalid input, 2 runtime failure.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dpoly
