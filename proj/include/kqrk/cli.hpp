#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace kqrk::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

/// A user-supplied level moved to the nearest k/m.
struct Snap {
  std::string flag;
  std::string given;
  std::string resolved;  // exact fraction
};

/// Everything needed to reproduce one invocation. Output paths are relative
/// to the directory holding the manifest.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::vector<Snap> snaps;
  std::map<std::string, std::string> inputs;   // path → checksum
  std::map<std::string, std::string> outputs;  // relative file name → checksum
  /// Scheduling details (thread count) that must not change any output.
  nlohmann::json execution = nlohmann::json::object();
  std::optional<double> wall_seconds;

  nlohmann::json to_json() const;
  /// The reproducibility core embedded in result files: no argv, outputs,
  /// execution details or timings, so equal runs embed equal bytes.
  nlohmann::json embedded() const;
};

/// "kqrk <semver> (build <hash>)".
std::string version_string();

/// Parses a key = value config file. '#' and ';' start comment lines and
/// "[name]" opens a section whose keys only apply to that subcommand.
/// Returns section → (key → value); top-level keys live under "".
std::map<std::string, std::map<std::string, std::string>> parse_config(const std::string& text);

/// Runs one command line (without the program name). Never throws.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Checks every *manifest.json under `dir`. Returns human-readable failures.
std::vector<std::string> verify_directory(const std::filesystem::path& dir, std::ostream& log);

}  // namespace kqrk::cli
