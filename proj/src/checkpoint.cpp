#include "reachbound/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace reachbound::nn {

static_assert(std::endian::native == std::endian::little, "payload files assume little-endian hosts");

namespace {

constexpr char kMagic[8] = {'R', 'B', 'P', 'A', 'R', 'A', 'M', 'S'};

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw std::runtime_error("parameter file truncated");
  return v;
}

void get_f64(std::ifstream& in, double* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), std::streamsize(n * sizeof(double)));
  if (!in) throw std::runtime_error("parameter file truncated");
}

}  // namespace

void write_parameter_file(const std::filesystem::path& path, const std::vector<NamedMlp>& nets) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kParameterFileVersion);
  put_u32(out, std::uint32_t(nets.size()));
  for (const auto& n : nets) {
    put_u32(out, std::uint32_t(n.name.size()));
    out.write(n.name.data(), std::streamsize(n.name.size()));
    put_u32(out, std::uint32_t(n.net.layers.size()));
    for (const auto& l : n.net.layers) {
      put_u32(out, std::uint32_t(l.in_dim()));
      put_u32(out, std::uint32_t(l.out_dim()));
      put_u32(out, static_cast<std::uint32_t>(l.activation));
      out.write(reinterpret_cast<const char*>(l.weight.data()), std::streamsize(l.weight.size() * 8));
      out.write(reinterpret_cast<const char*>(l.bias.data()), std::streamsize(l.bias.size() * 8));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<NamedMlp> read_parameter_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a parameter file: " + path.string());
  const auto version = get_u32(in);
  if (version != kParameterFileVersion)
    throw std::runtime_error("unsupported parameter file version " + std::to_string(version));
  const auto n_nets = get_u32(in);
  std::vector<NamedMlp> nets;
  for (std::uint32_t k = 0; k < n_nets; ++k) {
    NamedMlp n;
    n.name.resize(get_u32(in));
    in.read(n.name.data(), std::streamsize(n.name.size()));
    const auto n_layers = get_u32(in);
    for (std::uint32_t l = 0; l < n_layers; ++l) {
      DenseLayer<double> layer;
      const auto rows = get_u32(in), cols = get_u32(in), act = get_u32(in);
      if (act > 2) throw std::runtime_error("parameter file: bad activation code");
      layer.activation = static_cast<Activation>(act);
      layer.weight = Tensor2<double>(rows, cols);
      layer.bias.assign(cols, 0.0);
      get_f64(in, layer.weight.data(), layer.weight.size());
      get_f64(in, layer.bias.data(), layer.bias.size());
      n.net.layers.push_back(std::move(layer));
    }
    nets.push_back(std::move(n));
  }
  return nets;
}

}  // namespace reachbound::nn
