#include "mbdp/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mbdp::nn {

void save_mlp(const Mlp& net, const std::string& path_base) {
  {
    std::ofstream manifest(path_base + ".txt");
    if (!manifest) throw std::runtime_error("save_mlp: cannot open " + path_base + ".txt");
    manifest << "mlp v1\n";
    manifest << "widths";
    for (int w : net.widths()) manifest << " " << w;
    manifest << "\n";
    manifest << "params " << net.param_count() << "\n";
    manifest << "layout per-layer: W column-major float64, then b float64\n";
  }
  std::ofstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("save_mlp: cannot open " + path_base + ".bin");
  const Vector theta = net.flatten();
  bin.write(reinterpret_cast<const char*>(theta.data()),
            static_cast<std::streamsize>(sizeof(double) * theta.size()));
  if (!bin) throw std::runtime_error("save_mlp: short write to " + path_base + ".bin");
}

Mlp load_mlp(const std::string& path_base) {
  std::ifstream manifest(path_base + ".txt");
  if (!manifest) throw std::runtime_error("load_mlp: cannot open " + path_base + ".txt");
  std::string line;
  if (!std::getline(manifest, line) || line.rfind("mlp", 0) != 0)
    throw std::runtime_error("load_mlp: bad manifest header in " + path_base + ".txt");
  if (!std::getline(manifest, line) || line.rfind("widths", 0) != 0)
    throw std::runtime_error("load_mlp: missing widths line in " + path_base + ".txt");
  std::istringstream ws(line.substr(6));
  std::vector<int> widths;
  for (int w; ws >> w;) widths.push_back(w);
  if (widths.size() < 2) throw std::runtime_error("load_mlp: bad widths in " + path_base + ".txt");

  Mlp net(widths);
  const std::size_t n = net.param_count();
  std::ifstream bin(path_base + ".bin", std::ios::binary | std::ios::ate);
  if (!bin) throw std::runtime_error("load_mlp: cannot open " + path_base + ".bin");
  const auto bytes = static_cast<std::size_t>(bin.tellg());
  if (bytes != n * sizeof(double))
    throw std::runtime_error("load_mlp: " + path_base + ".bin holds " + std::to_string(bytes) +
                             " bytes, expected " + std::to_string(n * sizeof(double)));
  bin.seekg(0);
  Vector theta(static_cast<Eigen::Index>(n));
  bin.read(reinterpret_cast<char*>(theta.data()), static_cast<std::streamsize>(bytes));
  if (!bin) throw std::runtime_error("load_mlp: short read from " + path_base + ".bin");
  net.unflatten(theta);
  return net;
}

}  // namespace mbdp::nn
