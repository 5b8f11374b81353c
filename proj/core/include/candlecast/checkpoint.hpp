#pragma once

#include <filesystem>
#include <iosfwd>

#include "candlecast/network.hpp"

namespace candlecast::nn {

// Weight checkpoints: magic "CFW1", then one record per parameter tensor in
// network order (u64 name length, name bytes, u64 rank, u64 dims, f32 data,
// all little endian). Loading verifies magic, names and shapes against the
// target network before touching any weight, so a failed load leaves the
// network untouched.

void write_weights(const Network& net, std::ostream& out);
void read_weights(Network& net, std::istream& in);
void save_weights(const Network& net, const std::filesystem::path& path);
void load_weights(Network& net, const std::filesystem::path& path);

// Single-tensor dumps: magic "CFT1", u64 rank, u64 dims, f32 data.
void write_tensor(const Tensor& t, std::ostream& out);
Tensor read_tensor(std::istream& in);
void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

} // namespace candlecast::nn
