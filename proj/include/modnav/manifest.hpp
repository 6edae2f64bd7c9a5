// Run manifests: every CLI invocation that produces artifacts drops a JSON
// record (command, full config echo, seed, artifact paths, wall clock,
// version) next to its outputs, written atomically.
#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace modnav::manifest {

inline constexpr const char* kVersion = "0.1.0";

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  double wall_clock_sec = 0.0;
};

void write(const std::filesystem::path& path, const RunManifest& m);

}  // namespace modnav::manifest
