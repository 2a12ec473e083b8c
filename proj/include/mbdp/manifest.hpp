#pragma once

#include <string>
#include <vector>

#include "mbdp/config.hpp"

namespace mbdp {

inline constexpr const char* kCodeVersion = "mbdp 0.1.0";

/// Snapshot of everything a rerun needs: command line, config and root seed.
/// A run directory holds exactly one manifest; rerunning it with workers = 1
/// reproduces the metrics CSV byte for byte.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  TrainConfig config;
  std::string out_dir;
  std::string created_utc;
  std::string code_version = kCodeVersion;

  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

std::string utc_timestamp();

}  // namespace mbdp
