#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "teprompt/tensor.hpp"

namespace teprompt {

/// A named 1-D or 2-D tensor read from or written to a safetensors file.
/// Values are always widened to double in memory.
struct NamedTensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  Matrix as_matrix() const;
};

enum class TensorDtype { F64, F32 };

/// Writes tensors in the safetensors container layout: an 8-byte
/// little-endian header length, a JSON header with dtype/shape/offsets, then
/// the raw little-endian payload. Keys are written in sorted order.
void write_safetensors(const std::filesystem::path& path, const std::map<std::string, const Matrix*>& tensors,
                       TensorDtype dtype = TensorDtype::F64,
                       const std::map<std::string, std::string>& metadata = {});

/// Reads F64, F32, F16 and BF16 tensors. Throws DataError on malformed files.
std::map<std::string, NamedTensor> read_safetensors(const std::filesystem::path& path);

}  // namespace teprompt
