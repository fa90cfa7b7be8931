#pragma once

#include <filesystem>
#include <string>

#include "bonelayer/synthesizer.hpp"

namespace bonelayer {

inline constexpr int kSampleSchemaVersion = 1;

/// File stem for bone i: "upper", "lower", then "bone3", "bone4", ...
std::string bone_name(std::size_t i);

/// Writes image.png, mask_<bone>.png, gt_<bone>.png (16-bit) and meta.json.
/// Creates the directory if needed.
void write_sample(const std::filesystem::path& dir, const SyntheticSample& sample);

/// JSON text of meta.json, terminated by a newline.
std::string sample_meta_json(const SyntheticSample& sample);

struct StoredSample {
  GrayImage image;
  MaskSet masks;
  LayerSet gt_layers;  ///< empty when the directory holds no gt_*.png
  double k_used = 0.0;
  bool has_meta = false;
};

/// Reads a sample directory. Masks are read as mask_upper, mask_lower, ...
/// until the next one is missing; at least two are required.
StoredSample read_sample(const std::filesystem::path& dir);

}  // namespace bonelayer
