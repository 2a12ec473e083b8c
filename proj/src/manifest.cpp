#include "mbdp/manifest.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mbdp {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::write(const std::string& path) const {
  nlohmann::json j;
  j["command"] = command;
  j["argv"] = argv;
  j["out_dir"] = out_dir;
  j["created_utc"] = created_utc;
  j["code_version"] = code_version;
  j["root_seed"] = config.seed;
  j["config_ini"] = config_to_ini(config);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot open " + path);
  out << j.dump(2) << "\n";
}

RunManifest RunManifest::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  nlohmann::json j;
  in >> j;
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.out_dir = j.at("out_dir").get<std::string>();
  m.created_utc = j.at("created_utc").get<std::string>();
  m.code_version = j.at("code_version").get<std::string>();
  // Config round-trips through its own file format.
  const std::string ini = j.at("config_ini").get<std::string>();
  const std::string tmp = path + ".cfgtmp";
  {
    std::ofstream out(tmp);
    out << ini;
  }
  const auto errors = apply_config_file(m.config, tmp);
  std::remove(tmp.c_str());
  if (!errors.empty()) throw std::runtime_error("manifest: config snapshot invalid: " + errors[0]);
  return m;
}

}  // namespace mbdp
