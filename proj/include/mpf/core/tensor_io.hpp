#pragma once

#include <filesystem>

#include "mpf/core/tensor.hpp"

namespace mpf {

// MEF1 container: magic "MEF1" (the version tag doubles as the float32-LE
// dtype tag), u32 n_dims, per dim a u32 size plus a 16-byte zero-padded
// ASCII axis name, then the raw little-endian float32 payload, row-major.
void write_tensor(const TensorF& t, const std::filesystem::path& path);
TensorF read_tensor(const std::filesystem::path& path);

}  // namespace mpf
