#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace vdn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;

// Default output root when --out is omitted.
inline constexpr const char* kOutRootEnv = "VDN_OUT_ROOT";
inline constexpr const char* kManifestFile = "run_manifest.jsonl";

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config;  // JSON echo
  std::uint64_t seed = 0;
  std::string code_version;
  std::string started;
  std::string finished;
  std::vector<std::string> artifacts;

  std::string to_json_line() const;
};

// One line per invocation, appended to <dir>/run_manifest.jsonl.
void append_manifest(const RunManifest& m, const std::filesystem::path& dir);
std::vector<RunManifest> read_manifests(const std::filesystem::path& dir);

// Runs one subcommand.  Errors are reported on `err` as a single line
//   error: code=<exit> kind=<kind> message="<text>"
// followed, for usage errors, by the help text.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

const char* code_version();

}  // namespace vdn
