#pragma once

// Weight snapshot: a text manifest followed by raw little-endian doubles.
//
//   INPAINT-SNAPSHOT <count>\n
//   <name> <d0> <d1> ...\n          (one line per tensor)
//   <payload: every tensor's values in manifest order>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<std::uint8_t> encode_snapshot(const NamedTensors& tensors);
NamedTensors decode_snapshot(std::span<const std::uint8_t> bytes);

void save_snapshot(const NamedTensors& tensors, const std::filesystem::path& path);
NamedTensors load_snapshot(const std::filesystem::path& path);

/// Copies values from `source` into the same-named tensors of `target`.
/// Names and shapes must match exactly.
void assign_snapshot(const NamedTensors& source, NamedTensors& target);

}  // namespace inpaint
