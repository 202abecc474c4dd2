#pragma once

// Versioned binary checkpoint: magic, layer dimension table, then the raw
// 64-bit parameters (weights row-major, then bias, per layer). Identical nets
// produce byte-identical files.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "qstop/errors.hpp"
#include "qstop/net.hpp"

namespace qstop {

namespace detail {
inline constexpr std::array<char, 8> kCheckpointMagic = {'Q', 'S', 'T', 'O',
                                                         'P', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace detail

inline void save_checkpoint(const DenseNet& net, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + file);
  out.write(detail::kCheckpointMagic.data(), detail::kCheckpointMagic.size());
  auto write_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  write_u32(detail::kCheckpointVersion);
  write_u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const Layer& l : net.layers) {
    write_u32(static_cast<std::uint32_t>(l.fan_in()));
    write_u32(static_cast<std::uint32_t>(l.fan_out()));
    write_u32(l.activation == Activation::kRelu ? 0u : 1u);
  }
  for (const Layer& l : net.layers) {
    out.write(reinterpret_cast<const char*>(l.weights.values().data()),
              static_cast<std::streamsize>(sizeof(double) * l.weights.values().size()));
    out.write(reinterpret_cast<const char*>(l.bias.data()),
              static_cast<std::streamsize>(sizeof(double) * l.bias.size()));
  }
  if (!out) throw CheckpointError("checkpoint write failed: " + file);
}

inline DenseNet load_checkpoint(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + file);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != detail::kCheckpointMagic) {
    throw CheckpointError("not a checkpoint file: " + file);
  }
  auto read_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  const std::uint32_t version = read_u32();
  if (version != detail::kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version in " + file);
  }
  const std::uint32_t n_layers = read_u32();
  if (!in || n_layers == 0 || n_layers > 1024) {
    throw CheckpointError("corrupt checkpoint header: " + file);
  }
  DenseNet net;
  net.layers.resize(n_layers);
  int prev_out = -1;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t fan_in = read_u32();
    const std::uint32_t fan_out = read_u32();
    const std::uint32_t act = read_u32();
    if (!in || fan_in == 0 || fan_out == 0 || act > 1) {
      throw CheckpointError("corrupt layer header in " + file);
    }
    if (prev_out >= 0 && static_cast<int>(fan_in) != prev_out) {
      throw CheckpointError("layer dimensions do not chain in " + file);
    }
    prev_out = static_cast<int>(fan_out);
    net.layers[l].weights = Matrix(static_cast<int>(fan_out), static_cast<int>(fan_in));
    net.layers[l].bias.assign(fan_out, 0.0);
    net.layers[l].activation = act == 0 ? Activation::kRelu : Activation::kIdentity;
  }
  for (Layer& l : net.layers) {
    in.read(reinterpret_cast<char*>(l.weights.values().data()),
            static_cast<std::streamsize>(sizeof(double) * l.weights.values().size()));
    in.read(reinterpret_cast<char*>(l.bias.data()),
            static_cast<std::streamsize>(sizeof(double) * l.bias.size()));
  }
  if (!in) throw CheckpointError("truncated checkpoint payload: " + file);
  return net;
}

// The architecture the run configuration implies; used to reject stale
// checkpoints before pricing.
inline bool checkpoint_matches(const DenseNet& net, int input_dim,
                               const std::vector<int>& hidden, int output_dim) {
  if (net.layers.size() != hidden.size() + 1) return false;
  if (net.input_dim() != input_dim || net.output_dim() != output_dim) return false;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    if (net.layers[l].fan_out() != hidden[l]) return false;
    if (net.layers[l].activation != Activation::kRelu) return false;
  }
  return net.layers.back().activation == Activation::kIdentity;
}

}  // namespace qstop
