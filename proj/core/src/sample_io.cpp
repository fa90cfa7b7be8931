#include "bonelayer/sample_io.hpp"

#include <fstream>
#include <json.hpp>

#include "bonelayer/raster_io.hpp"

namespace bonelayer {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string bone_name(std::size_t i) {
  if (i == 0) return "upper";
  if (i == 1) return "lower";
  return "bone" + std::to_string(i + 1);
}

std::string sample_meta_json(const SyntheticSample& s) {
  ordered_json meta;
  meta["schema_version"] = kSampleSchemaVersion;
  meta["width"] = s.image.width();
  meta["height"] = s.image.height();
  meta["seed"] = s.seed;
  meta["k_used"] = s.k_used.value();
  meta["k_provenance"] = s.k_used.provenance() == Provenance::kEstimated ? "estimated" : "supplied";
  meta["k_clamped"] = s.k_used.clamped();
  meta["k_no_overlap_fallback"] = s.k_used.no_overlap_fallback();
  ordered_json shifts = ordered_json::array();
  for (std::size_t i = 0; i < s.shifts.size(); ++i) {
    shifts.push_back({{"bone", bone_name(i)}, {"dx", s.shifts[i].dx}, {"dy", s.shifts[i].dy}});
  }
  meta["shifts"] = shifts;
  meta["overlap_area"] = s.overlap_area;
  meta["saturated_count"] = s.saturated_count;
  meta["attempts"] = s.attempts;
  return meta.dump(2) + "\n";
}

void write_sample(const fs::path& dir, const SyntheticSample& s) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());

  save_raster(s.image, dir / "image.png");
  for (std::size_t i = 0; i < s.masks.size(); ++i) {
    save_mask(s.masks[i], dir / ("mask_" + bone_name(i) + ".png"));
    save_raster(s.gt_layers[i], dir / ("gt_" + bone_name(i) + ".png"));
  }
  const fs::path meta = dir / "meta.json";
  std::ofstream out(meta, std::ios::binary);
  out << sample_meta_json(s);
  if (!out) throw IoError(meta.string(), "write failed");
}

StoredSample read_sample(const fs::path& dir) {
  StoredSample s;
  s.image = load_raster(dir / "image.png");
  std::vector<BinaryMask> masks;
  for (std::size_t i = 0;; ++i) {
    const fs::path p = dir / ("mask_" + bone_name(i) + ".png");
    if (!fs::exists(p)) break;
    masks.push_back(load_mask(p));
  }
  if (masks.size() < 2) {
    throw IoError(dir.string(), "sample directory needs mask_upper.png and mask_lower.png");
  }
  s.masks = MaskSet(std::move(masks));
  require_same_shape(s.image.shape(), s.masks.shape(), "sample directory");

  std::vector<GrayImage> gt;
  for (std::size_t i = 0; i < s.masks.size(); ++i) {
    const fs::path p = dir / ("gt_" + bone_name(i) + ".png");
    if (!fs::exists(p)) break;
    gt.push_back(load_raster(p));
  }
  if (gt.size() == s.masks.size()) s.gt_layers = LayerSet(std::move(gt), s.masks);

  const fs::path meta_path = dir / "meta.json";
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    try {
      const auto meta = nlohmann::json::parse(in);
      s.k_used = meta.at("k_used").get<double>();
      s.has_meta = true;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(meta_path.string(), std::string("invalid meta.json: ") + e.what());
    }
  }
  return s;
}

}  // namespace bonelayer
