#pragma once

// Parameter payload file: versioned little-endian binary.
//
//   "RBPARAMS" | u32 version | u32 n_nets
//   per net:   u32 name_len | name bytes | u32 n_layers
//   per layer: u32 in | u32 out | u32 activation | f64[in*out] weight | f64[out] bias

#include <filesystem>
#include <string>
#include <vector>

#include "reachbound/mlp.hpp"

namespace reachbound::nn {

inline constexpr std::uint32_t kParameterFileVersion = 1;

struct NamedMlp {
  std::string name;
  Mlp<double> net;
};

void write_parameter_file(const std::filesystem::path& path, const std::vector<NamedMlp>& nets);
std::vector<NamedMlp> read_parameter_file(const std::filesystem::path& path);

}  // namespace reachbound::nn
