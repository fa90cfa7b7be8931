#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bonelayer/image.hpp"
#include "bonelayer/laplace.hpp"
#include "bonelayer/reconstructor.hpp"

namespace bonelayer {

/// Stadium shape: all points within `radius` of a segment of length
/// 2 * half_length centred at (cx, cy) and oriented at `angle` radians from
/// the +x axis.
struct Capsule {
  double cx = 0.0;
  double cy = 0.0;
  double half_length = 0.0;
  double radius = 0.0;
  double angle = 0.0;

  /// Distance from (x, y) to the core segment.
  double axis_distance(double x, double y) const noexcept;
  bool contains(double x, double y) const noexcept { return axis_distance(x, y) <= radius; }
};

/// Parametric finger-joint phantom: two bones over a smooth soft-tissue
/// field. Absorptions are per-layer values, i.e. soft tissue plus bone.
struct PhantomSpec {
  int side = 256;
  std::array<Capsule, 2> bones{};
  double rim_width = 3.0;
  double rim_absorption = 0.45;
  double interior_absorption = 0.36;
  double texture_amplitude = 0.03;
  double texture_scale = 2.0;  ///< Gaussian sigma (pixels) band-limiting the texture
  double soft_tissue_absorption = 0.25;
  double soft_tissue_variation = 0.03;
  std::uint64_t seed = 0;

  /// Upper and lower bone facing each other across a joint gap, scaled to
  /// `side`.
  static PhantomSpec with_side(int side);

  void validate() const;
};

struct Phantom {
  GrayImage image;       ///< composed joint image J
  GrayImage background;  ///< soft tissue alone
  MaskSet masks;
  LayerSet layers;       ///< exact ground truth
  CorrectionParameter k = CorrectionParameter::supplied(1.0);
  std::size_t saturated_count = 0;
};

Phantom make_phantom(const PhantomSpec& spec);

struct OverlapSpec {
  int shift_min = 2;
  int shift_max = 20;
  std::uint64_t seed = 0;
  bool require_overlap = true;
  int max_retries = 20;
  SolverConfig solver{};

  void validate(int side) const;
};

struct SyntheticSample {
  GrayImage image;       ///< S
  GrayImage background;  ///< harmonic soft-tissue estimate B
  MaskSet masks;         ///< post-shift
  LayerSet gt_layers;    ///< L_g
  CorrectionParameter k_used = CorrectionParameter::supplied(1.0);
  std::vector<Offset> shifts;
  std::size_t overlap_area = 0;
  std::size_t saturated_count = 0;
  std::uint64_t seed = 0;
  int attempts = 1;
};

/// Translates bones of a non-overlapping image and recomposes the joint.
/// The soft-tissue background and the per-bone extended layers are computed
/// once at construction, so many shift configurations can be composed from
/// one base image.
class BoneShifter {
 public:
  /// Throws InvalidInput when the masks already intersect.
  BoneShifter(const GrayImage& joint, const MaskSet& masks, const SolverConfig& cfg = {});

  /// Unit direction from each bone centroid towards the mean centroid.
  const std::vector<std::array<double, 2>>& axes() const noexcept { return axes_; }
  const GrayImage& background() const noexcept { return background_; }
  const MaskSet& masks() const noexcept { return masks_; }

  /// Integer shift of magnitude `s` along bone i's axis.
  Offset along_axis(std::size_t bone, int s) const;

  /// Composes the shifted configuration; nullopt if a shifted mask leaves
  /// the frame.
  std::optional<SyntheticSample> compose(std::span<const Offset> shifts) const;

 private:
  MaskSet masks_;
  GrayImage background_;
  std::vector<ScalarField> extended_;
  std::vector<std::array<double, 2>> axes_;
  SolverConfig cfg_;
};

/// Shifts the bones of a non-overlapping image towards each other by random
/// integer amounts in [shift_min, shift_max] and recomposes the overlap
/// with the superposition model.
SyntheticSample synthesize_overlap(const GrayImage& joint, const MaskSet& masks,
                                   const OverlapSpec& spec);

/// Sample view of a phantom: zero shifts, k = soft-tissue base absorption.
SyntheticSample to_sample(const Phantom& phantom, std::uint64_t seed);

}  // namespace bonelayer
