// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "discond/tensor.hpp"

namespace discond {

/// 8-bit grayscale PNG bytes.
std::string encode_png_gray(std::size_t width, std::size_t height, std::span<const std::uint8_t> pixels);
void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels);

/// Tiles images [rows, cols, H, W] with values in [0, 1] into one PNG, with
/// `gap` pixels of black between tiles.
void write_image_grid(const std::filesystem::path& path, const Tensor& grid, std::size_t gap = 1);

}  // namespace discond
