#include "trial_io.hpp"

#include <algorithm>
#include <fstream>

#include "bonelayer/raster_io.hpp"
#include "bonelayer/sample_io.hpp"
#include "config.hpp"
#include "manifest.hpp"

namespace bonelayer::cli {

namespace fs = std::filesystem;

void write_trial(const fs::path& dir, const RegistrationTrial& trial) {
  fs::create_directories(dir);
  save_raster(trial.fixed, dir / "fixed.png");
  save_raster(trial.moving, dir / "moving.png");
  Json truth = Json::array();
  for (std::size_t i = 0; i < trial.fixed_masks.size(); ++i) {
    save_mask(trial.fixed_masks[i], dir / ("fixed_mask_" + bone_name(i) + ".png"));
    save_mask(trial.moving_masks[i], dir / ("moving_mask_" + bone_name(i) + ".png"));
    truth.push_back({{"bone", bone_name(i)}, {"dx", trial.truth[i].dx}, {"dy", trial.truth[i].dy}});
  }
  Json meta;
  meta["schema_version"] = 1;
  meta["seed"] = trial.seed;
  meta["search_radius"] = trial.search_radius;
  meta["truth"] = truth;
  write_text(dir / "trial.json", meta.dump(2) + "\n");
}

RegistrationTrial read_trial(const fs::path& dir) {
  const fs::path meta_path = dir / "trial.json";
  std::ifstream in(meta_path);
  if (!in) throw IoError(meta_path.string(), "cannot open trial description");
  Json meta;
  try {
    meta = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError(meta_path.string(), std::string("malformed JSON: ") + e.what());
  }

  RegistrationTrial t;
  try {
    t.seed = meta.at("seed").get<std::uint64_t>();
    t.search_radius = meta.at("search_radius").get<int>();
    for (const auto& row : meta.at("truth")) {
      t.truth.push_back(Offset{row.at("dx").get<int>(), row.at("dy").get<int>()});
    }
  } catch (const Json::exception& e) {
    throw IoError(meta_path.string(), std::string("invalid trial description: ") + e.what());
  }
  if (t.truth.size() < 2) throw IoError(meta_path.string(), "a trial needs at least two bones");

  t.fixed = load_raster(dir / "fixed.png");
  t.moving = load_raster(dir / "moving.png");
  std::vector<BinaryMask> fixed_masks;
  std::vector<BinaryMask> moving_masks;
  for (std::size_t i = 0; i < t.truth.size(); ++i) {
    fixed_masks.push_back(load_mask(dir / ("fixed_mask_" + bone_name(i) + ".png")));
    moving_masks.push_back(load_mask(dir / ("moving_mask_" + bone_name(i) + ".png")));
  }
  t.fixed_masks = MaskSet(std::move(fixed_masks));
  t.moving_masks = MaskSet(std::move(moving_masks));
  require_same_shape(t.fixed.shape(), t.fixed_masks.shape(), "trial fixed image and masks");
  require_same_shape(t.moving.shape(), t.moving_masks.shape(), "trial moving image and masks");
  return t;
}

std::vector<RegistrationTrial> read_trials(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError(root.string(), "not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "trial.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError(root.string(), "no trial directories found");
  std::vector<RegistrationTrial> trials;
  for (const auto& d : dirs) trials.push_back(read_trial(d));
  return trials;
}

}  // namespace bonelayer::cli
