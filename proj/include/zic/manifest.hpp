#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "zic/hash.hpp"

namespace zic {

/// Sidecar record `<output>.manifest` describing the run that produced an
/// output: command line, config digest, seed, content hashes of every file
/// read or written, and wall-clock timestamps.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::pair<std::string, std::string>> consumed;  // path, git blob hash
  std::vector<std::pair<std::string, std::string>> produced;

  void consume(const std::string& path) { consumed.emplace_back(path, git_blob_hash_of_file(path)); }
  void produce(const std::string& path) { produced.emplace_back(path, git_blob_hash_of_file(path)); }

  std::string text() const {
    std::string s = "ZICMANIFEST 1\n";
    s += "command=" + command + "\n";
    std::string args;
    for (const auto& a : argv) args += (args.empty() ? "" : " ") + a;
    s += "argv=" + args + "\n";
    s += "config_digest=" + config_digest + "\n";
    s += "seed=" + std::to_string(seed) + "\n";
    s += "started_utc=" + started_utc + "\n";
    s += "finished_utc=" + finished_utc + "\n";
    for (const auto& [p, h] : consumed) s += "consumed=" + h + " " + p + "\n";
    for (const auto& [p, h] : produced) s += "produced=" + h + " " + p + "\n";
    return s;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << text();
  }
};

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string manifest_path(const std::string& output) { return output + ".manifest"; }

/// File name of the manifest, as referenced from inside the output.
inline std::string manifest_name(const std::string& output) {
  return std::filesystem::path(manifest_path(output)).filename().string();
}

}  // namespace zic
