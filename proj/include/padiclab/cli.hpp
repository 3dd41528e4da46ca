#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace padiclab::cli {

/// Config does not match the schema of its subcommand (exit status 2).
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<double> tolerance;
};

const std::vector<std::string>& subcommands();

/// FNV-1a (64 bit) of the canonical dump (sorted keys, no whitespace), hex.
std::string config_hash(const nlohmann::json& config);

/// Validates the config, runs the experiment, writes <out>/<name>.json with
/// {config_hash, results} and, where tabular, <out>/<name>.csv, and prints a
/// one-line summary. Returns 0, 1 on numeric failure or 2 on schema errors;
/// diagnostics go to `err`.
int run(const nlohmann::json& config, const RunOptions& options, std::ostream& summary,
        std::ostream& err);

/// As run(), reading the config from a file.
int run_file(const std::string& path, const RunOptions& options, std::ostream& summary,
             std::ostream& err);

}  // namespace padiclab::cli
