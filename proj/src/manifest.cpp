#include "modnav/manifest.hpp"

#include "modnav/model_io.hpp"

#include <chrono>
#include <ctime>

namespace modnav::manifest {

void write(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["artifacts"] = m.artifacts;
  j["wall_clock_sec"] = m.wall_clock_sec;
  j["version"] = kVersion;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char ts[32];
  std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", &tm);
  j["timestamp"] = ts;
  io::write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace modnav::manifest
