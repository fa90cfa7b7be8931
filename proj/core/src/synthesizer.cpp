#include "bonelayer/synthesizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace bonelayer {

double Capsule::axis_distance(double x, double y) const noexcept {
  const double ux = std::cos(angle);
  const double uy = std::sin(angle);
  const double rx = x - cx;
  const double ry = y - cy;
  const double t = std::clamp(rx * ux + ry * uy, -half_length, half_length);
  const double px = rx - t * ux;
  const double py = ry - t * uy;
  return std::hypot(px, py);
}

// ------------------------------------------------------------------ phantom

PhantomSpec PhantomSpec::with_side(int side) {
  PhantomSpec spec;
  spec.side = side;
  const double s = side / 256.0;
  spec.bones[0] = Capsule{128.0 * s, 62.0 * s, 30.0 * s, 30.0 * s, std::numbers::pi / 2};
  spec.bones[1] = Capsule{128.0 * s, 194.0 * s, 30.0 * s, 30.0 * s, std::numbers::pi / 2};
  spec.rim_width = std::max(1.0, 3.0 * s);
  spec.texture_scale = std::max(1.0, 2.0 * s);
  return spec;
}

void PhantomSpec::validate() const {
  if (side < 16) throw InvalidInput("phantom side must be at least 16");
  for (const auto& b : bones) {
    if (!(b.radius > 0.0) || b.half_length < 0.0) {
      throw InvalidInput("capsule radius must be > 0 and half-length >= 0");
    }
    const double ex = std::abs(std::cos(b.angle)) * b.half_length + b.radius;
    const double ey = std::abs(std::sin(b.angle)) * b.half_length + b.radius;
    if (b.cx - ex < -0.5 || b.cy - ey < -0.5 || b.cx + ex > side - 0.5 || b.cy + ey > side - 0.5) {
      throw InvalidInput("capsule does not fit inside the frame");
    }
  }
  auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_open_unit(soft_tissue_absorption) || !in_open_unit(rim_absorption) ||
      !in_open_unit(interior_absorption)) {
    throw InvalidInput("absorptions must lie in (0,1)");
  }
  if (soft_tissue_absorption < kMinCorrection) {
    throw InvalidInput("soft-tissue absorption below the correction floor");
  }
  if (rim_width < 0.0 || texture_amplitude < 0.0 || soft_tissue_variation < 0.0 ||
      !(texture_scale > 0.0)) {
    throw InvalidInput("rim width, texture and variation must be non-negative");
  }
  if (soft_tissue_absorption - soft_tissue_variation <= 0.0 ||
      soft_tissue_absorption + soft_tissue_variation >= 1.0) {
    throw InvalidInput("soft-tissue variation leaves (0,1)");
  }
}

namespace {

ScalarField gaussian_blur(const ScalarField& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;

  const int w = in.width();
  const int h = in.height();
  ScalarField tmp(in.shape(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * in(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = s;
    }
  }
  ScalarField out(in.shape(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = s;
    }
  }
  return out;
}

// Zero-mean, unit-variance band-limited noise.
ScalarField band_limited_noise(Shape shape, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ScalarField white(shape, 0.0);
  for (double& v : white.values()) v = normal(rng);
  ScalarField field = gaussian_blur(white, sigma);
  double mean = 0.0;
  for (double v : field.values()) mean += v;
  mean /= static_cast<double>(field.size());
  double var = 0.0;
  for (double v : field.values()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(field.size()));
  for (double& v : field.values()) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return field;
}

ScalarField soft_tissue_field(const PhantomSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(0.3, 1.2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  struct Wave {
    double fx, fy, phi;
  };
  std::array<Wave, 3> waves{};
  for (auto& wv : waves) wv = Wave{freq(rng), freq(rng), phase(rng)};

  ScalarField soft(Shape{spec.side, spec.side}, 0.0);
  for (int y = 0; y < spec.side; ++y) {
    for (int x = 0; x < spec.side; ++x) {
      double s = 0.0;
      for (const auto& wv : waves) {
        s += std::cos(2.0 * std::numbers::pi * (wv.fx * x + wv.fy * y) / spec.side + wv.phi);
      }
      soft(x, y) = spec.soft_tissue_absorption + spec.soft_tissue_variation * s / 3.0;
    }
  }
  return soft;
}

}  // namespace

Phantom make_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Shape shape{spec.side, spec.side};

  const ScalarField soft = soft_tissue_field(spec, rng);

  std::vector<BinaryMask> masks;
  std::vector<GrayImage> layers;
  for (const auto& bone : spec.bones) {
    const ScalarField texture = band_limited_noise(shape, spec.texture_scale, rng);
    Raster<std::uint8_t> bits(shape, 0);
    ScalarField layer(shape, 0.0);
    for (int y = 0; y < spec.side; ++y) {
      for (int x = 0; x < spec.side; ++x) {
        const double depth = bone.radius - bone.axis_distance(x, y);
        if (depth < 0.0) continue;
        bits(x, y) = 1;
        const double bone_abs =
            depth < spec.rim_width ? spec.rim_absorption
                                   : spec.interior_absorption + spec.texture_amplitude * texture(x, y);
        // Layer absorption = local soft tissue plus bone excess over the base.
        const double a = soft(x, y) + (bone_abs - spec.soft_tissue_absorption);
        layer(x, y) = 1.0 - std::clamp(a, 0.01, 0.99);
      }
    }
    masks.emplace_back(std::move(bits));
    layers.emplace_back(std::move(layer));
  }

  Phantom out;
  out.masks = MaskSet(std::move(masks));
  out.layers = LayerSet(std::move(layers), out.masks);
  out.k = CorrectionParameter::supplied(spec.soft_tissue_absorption);

  ScalarField bg(shape, 0.0);
  for (std::size_t i = 0; i < bg.size(); ++i) bg[i] = 1.0 - soft[i];
  out.background = GrayImage(bg);

  const ReconstructionOutput rec = reconstruct(out.layers, out.k);
  out.saturated_count = rec.saturated_count;
  const BinaryMask uni = out.masks.union_mask();
  ScalarField joint = bg;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (uni[i]) joint[i] = rec.image[i];
  }
  out.image = GrayImage(std::move(joint));
  return out;
}

SyntheticSample to_sample(const Phantom& phantom, std::uint64_t seed) {
  SyntheticSample s;
  s.image = phantom.image;
  s.background = phantom.background;
  s.masks = phantom.masks;
  s.gt_layers = phantom.layers;
  s.k_used = phantom.k;
  s.shifts.assign(phantom.masks.size(), Offset{});
  s.overlap_area = phantom.masks.intersection_mask().count();
  s.saturated_count = phantom.saturated_count;
  s.seed = seed;
  return s;
}

// ------------------------------------------------------------- BoneShifter

void OverlapSpec::validate(int side) const {
  if (shift_min < 0 || shift_min > shift_max || 4 * shift_max >= side) {
    throw InvalidInput("shift range must satisfy 0 <= min <= max < side/4, got [" +
                       std::to_string(shift_min) + ", " + std::to_string(shift_max) + "]");
  }
  if (max_retries < 0) throw InvalidInput("max_retries must be >= 0");
  solver.validate();
}

namespace {

std::array<double, 2> centroid(const BinaryMask& m) {
  double sx = 0.0;
  double sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      sx += x;
      sy += y;
      ++n;
    }
  }
  if (n == 0) throw InvalidInput("bone mask is empty");
  return {sx / n, sy / n};
}

ScalarField shift_field(const ScalarField& in, Offset v, const ScalarField& fill) {
  ScalarField out = fill;
  const Shape s = in.shape();
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const int sx = x - v.dx;
      const int sy = y - v.dy;
      if (s.contains(sx, sy)) out(x, y) = in(sx, sy);
    }
  }
  return out;
}

}  // namespace

BoneShifter::BoneShifter(const GrayImage& joint, const MaskSet& masks, const SolverConfig& cfg)
    : masks_(masks), cfg_(cfg) {
  require_same_shape(joint.shape(), masks.shape(), "BoneShifter");
  if (!masks.pairwise_disjoint()) {
    throw InvalidInput("overlap synthesis needs a non-overlapping input (masks intersect)");
  }
  const BinaryMask uni = masks.union_mask();
  background_ = inpaint_laplace(joint, uni, cfg);

  std::vector<std::array<double, 2>> centres;
  for (const auto& m : masks) {
    centres.push_back(centroid(m));
    ScalarField ext = background_.field();
    for (std::size_t p = 0; p < ext.size(); ++p) {
      if (m[p]) ext[p] = joint[p];
    }
    extended_.push_back(std::move(ext));
  }
  std::array<double, 2> mean{0.0, 0.0};
  for (const auto& c : centres) {
    mean[0] += c[0] / centres.size();
    mean[1] += c[1] / centres.size();
  }
  for (const auto& c : centres) {
    const double dx = mean[0] - c[0];
    const double dy = mean[1] - c[1];
    const double len = std::hypot(dx, dy);
    if (len < 1e-9) throw InvalidInput("bone centroids coincide; shift axis undefined");
    axes_.push_back({dx / len, dy / len});
  }
}

Offset BoneShifter::along_axis(std::size_t bone, int s) const {
  return Offset{static_cast<int>(std::lround(s * axes_[bone][0])),
                static_cast<int>(std::lround(s * axes_[bone][1]))};
}

std::optional<SyntheticSample> BoneShifter::compose(std::span<const Offset> shifts) const {
  if (shifts.size() != masks_.size()) {
    throw InvalidInput("expected one shift per bone");
  }
  const Shape shape = masks_.shape();
  std::vector<BinaryMask> moved;
  for (std::size_t i = 0; i < masks_.size(); ++i) {
    std::size_t lost = 0;
    moved.push_back(masks_[i].shifted(shifts[i].dx, shifts[i].dy, &lost));
    if (lost > 0) return std::nullopt;
  }
  MaskSet moved_set(std::move(moved));

  std::vector<GrayImage> layers;
  for (std::size_t i = 0; i < masks_.size(); ++i) {
    const ScalarField shifted = shift_field(extended_[i], shifts[i], background_.field());
    ScalarField layer(shape, 0.0);
    for (std::size_t p = 0; p < layer.size(); ++p) {
      if (moved_set[i][p]) layer[p] = shifted[p];
    }
    layers.emplace_back(std::move(layer));
  }

  SyntheticSample s;
  s.background = background_;
  s.masks = moved_set;
  s.gt_layers = LayerSet(std::move(layers), moved_set);
  s.shifts.assign(shifts.begin(), shifts.end());
  s.overlap_area = moved_set.intersection_mask().count();
  // Off the union the synthetic image equals B, so estimating on B is the
  // same as estimating on S.
  s.k_used = estimate_k(background_, moved_set, cfg_);

  const ReconstructionOutput rec = reconstruct(s.gt_layers, s.k_used);
  s.saturated_count = rec.saturated_count;
  const BinaryMask uni = moved_set.union_mask();
  ScalarField img = background_.field();
  for (std::size_t p = 0; p < img.size(); ++p) {
    if (uni[p]) img[p] = rec.image[p];
  }
  s.image = GrayImage(std::move(img));
  return s;
}

SyntheticSample synthesize_overlap(const GrayImage& joint, const MaskSet& masks,
                                   const OverlapSpec& spec) {
  spec.validate(std::min(joint.width(), joint.height()));
  const BoneShifter shifter(joint, masks, spec.solver);
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> magnitude(spec.shift_min, spec.shift_max);

  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
    std::vector<Offset> shifts;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      shifts.push_back(shifter.along_axis(i, magnitude(rng)));
    }
    auto sample = shifter.compose(shifts);
    if (!sample) {
      last_failure = "shifted mask left the frame";
      continue;
    }
    if (spec.require_overlap && sample->overlap_area == 0) {
      last_failure = "shifted masks do not overlap";
      continue;
    }
    sample->seed = spec.seed;
    sample->attempts = attempt + 1;
    return std::move(*sample);
  }
  throw InvalidInput("overlap synthesis failed after " + std::to_string(spec.max_retries + 1) +
                     " attempts: " + last_failure);
}

}  // namespace bonelayer
