#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace squadplan::cli {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string file_digest(const std::filesystem::path& file);

struct RunManifest {
  std::string command;
  nlohmann::json config;  // effective options; feeding it back through --config reruns the command
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> inputs;  // path -> digest
  std::vector<std::string> outputs;
  double wall_clock_seconds = 0.0;
};

nlohmann::json to_json(const RunManifest& m);

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on a runtime failure and 2 on a usage error. Diagnostics go to stderr.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace squadplan::cli
