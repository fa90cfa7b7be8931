#pragma once

#include <filesystem>

#include "bonelayer/image.hpp"

namespace bonelayer {

enum class BitDepth { k8 = 8, k16 = 16 };

/// Reads an 8- or 16-bit grayscale PNG, mapping stored integers to [0,1] by
/// dividing by 2^depth - 1. Colour, alpha, palette and sub-byte depths are
/// rejected with IoError.
GrayImage load_raster(const std::filesystem::path& path);

/// Writes a grayscale PNG. Values are quantised with round-half-up:
/// q = floor(v * (2^depth - 1) + 0.5).
void save_raster(const GrayImage& img, const std::filesystem::path& path,
                 BitDepth depth = BitDepth::k16);

/// Reads a mask PNG whose pixels are either 0 or full scale (255 / 65535).
/// Any other value is an error.
BinaryMask load_mask(const std::filesystem::path& path);

/// Writes an 8-bit PNG with values {0, 255}.
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace bonelayer
