#pragma once

#include <filesystem>

#include "dehaze/tensor.hpp"

namespace dehaze {

/// 8-bit RGB file -> H×W×3 in [0,1]. Throws IoError naming the path.
Tensor read_image_rgb8(const std::filesystem::path& path);
void write_image_rgb8(const std::filesystem::path& path, const Tensor& image01);

/// 16-bit single-channel file -> H×W×1 in [0,1] (value / 65535).
Tensor read_depth_u16(const std::filesystem::path& path);
void write_depth_u16(const std::filesystem::path& path, const Tensor& depth01);

}  // namespace dehaze
