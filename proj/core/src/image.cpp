#include "bonelayer/image.hpp"

#include <algorithm>
#include <cmath>

namespace bonelayer {

std::string to_string(const Shape& s) {
  return std::to_string(s.width) + "x" + std::to_string(s.height);
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw InvalidInput(std::string(what) + ": shape mismatch " + to_string(a) + " vs " +
                       to_string(b));
  }
}

// ---------------------------------------------------------------- GrayImage

GrayImage::GrayImage(ScalarField pixels) : pixels_(std::move(pixels)) {
  const auto v = pixels_.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw InvalidInput("intensity " + std::to_string(v[i]) + " at index " + std::to_string(i) +
                         " is outside [0,1]");
    }
  }
}

GrayImage::GrayImage(Shape shape, double fill) : GrayImage(ScalarField(shape, fill)) {}

GrayImage GrayImage::clamped(ScalarField pixels, std::size_t* clamped_count) {
  std::size_t n = 0;
  for (double& v : pixels.values()) {
    if (std::isnan(v)) {
      throw InvalidInput("NaN intensity cannot be clamped");
    }
    if (v < 0.0) {
      v = 0.0;
      ++n;
    } else if (v > 1.0) {
      v = 1.0;
      ++n;
    }
  }
  if (clamped_count != nullptr) *clamped_count = n;
  return GrayImage(std::move(pixels), Unchecked{});
}

// --------------------------------------------------------------- BinaryMask

BinaryMask::BinaryMask(Raster<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (std::uint8_t b : bits_.values()) {
    if (b > 1) throw InvalidInput("mask values must be 0 or 1");
  }
}

BinaryMask::BinaryMask(Shape shape, bool fill)
    : bits_(shape, static_cast<std::uint8_t>(fill ? 1 : 0)) {}

std::size_t BinaryMask::count() const noexcept {
  const auto v = bits_.values();
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::shifted(int dx, int dy, std::size_t* lost) const {
  Raster<std::uint8_t> out(shape(), 0);
  std::size_t dropped = 0;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (!(*this)(x, y)) continue;
      const int nx = x + dx;
      const int ny = y + dy;
      if (shape().contains(nx, ny)) {
        out(nx, ny) = 1;
      } else {
        ++dropped;
      }
    }
  }
  if (lost != nullptr) *lost = dropped;
  return BinaryMask(std::move(out));
}

// ------------------------------------------------------------------ MaskSet

MaskSet::MaskSet(std::vector<BinaryMask> masks) : masks_(std::move(masks)) {
  if (masks_.size() < 2) {
    throw InvalidInput("a mask set needs at least two masks, got " +
                       std::to_string(masks_.size()));
  }
  for (const auto& m : masks_) {
    require_same_shape(masks_.front().shape(), m.shape(), "mask set");
  }
}

Raster<std::uint8_t> MaskSet::coverage() const {
  Raster<std::uint8_t> cov(shape(), 0);
  for (const auto& m : masks_) {
    const auto v = m.values();
    for (std::size_t i = 0; i < v.size(); ++i) cov[i] = static_cast<std::uint8_t>(cov[i] + v[i]);
  }
  return cov;
}

BinaryMask MaskSet::union_mask() const { return mask_union(*this); }
BinaryMask MaskSet::intersection_mask() const { return mask_intersection(*this); }

BinaryMask MaskSet::multi_coverage_mask() const {
  auto cov = coverage();
  for (auto& c : cov.values()) c = c >= 2 ? 1 : 0;
  return BinaryMask(std::move(cov));
}

bool MaskSet::pairwise_disjoint() const {
  const Raster<std::uint8_t> cov = coverage();
  for (auto c : cov.values()) {
    if (c > 1) return false;
  }
  return true;
}

// ----------------------------------------------------------------- LayerSet

LayerSet::LayerSet(std::vector<GrayImage> layers, MaskSet masks)
    : layers_(std::move(layers)), masks_(std::move(masks)) {
  if (layers_.size() != masks_.size()) {
    throw InvalidInput("layer count " + std::to_string(layers_.size()) +
                       " does not match mask count " + std::to_string(masks_.size()));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    require_same_shape(layers_[i].shape(), masks_.shape(), "layer set");
    const auto& m = masks_[i];
    const auto& l = layers_[i];
    for (std::size_t p = 0; p < l.size(); ++p) {
      if (!m[p] && l[p] != 0.0) {
        throw InvalidInput("layer " + std::to_string(i) + " is nonzero outside its mask");
      }
    }
  }
}

// ------------------------------------------------------------- mask algebra

namespace {

template <class Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op, const char* what) {
  require_same_shape(a.shape(), b.shape(), what);
  Raster<std::uint8_t> out(a.shape(), 0);
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = op(va[i], vb[i]) ? 1 : 0;
  return BinaryMask(std::move(out));
}

}  // namespace

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto x, auto y) { return x || y; }, "mask_union");
}

BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto x, auto y) { return x && y; }, "mask_intersection");
}

BinaryMask mask_subtract(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](auto x, auto y) { return x && !y; }, "mask_subtract");
}

BinaryMask mask_complement(const BinaryMask& a) {
  Raster<std::uint8_t> out(a.shape(), 0);
  const auto v = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] ? 0 : 1;
  return BinaryMask(std::move(out));
}

BinaryMask mask_union(const MaskSet& ms) {
  BinaryMask acc = ms[0];
  for (std::size_t i = 1; i < ms.size(); ++i) acc = mask_union(acc, ms[i]);
  return acc;
}

BinaryMask mask_intersection(const MaskSet& ms) {
  BinaryMask acc = ms[0];
  for (std::size_t i = 1; i < ms.size(); ++i) acc = mask_intersection(acc, ms[i]);
  return acc;
}

GrayImage apply_mask(const GrayImage& img, const BinaryMask& m) {
  require_same_shape(img.shape(), m.shape(), "apply_mask");
  ScalarField out(img.shape(), 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = m[i] ? img[i] : 0.0;
  return GrayImage(std::move(out));
}

double masked_mean(const GrayImage& img, const BinaryMask& support) {
  require_same_shape(img.shape(), support.shape(), "masked_mean");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (support[i]) {
      sum += img[i];
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

// ------------------------------------------------------------------ resize

namespace {

// Source coordinate of destination sample `i` on a corner-aligned grid.
double source_coord(int i, int dst, int src) {
  if (dst == 1 || src == 1) return 0.0;
  return static_cast<double>(i) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
}

void check_side(int side) {
  if (side <= 0) throw InvalidInput("working side must be positive, got " + std::to_string(side));
}

}  // namespace

GrayImage resize_to_working(const GrayImage& img, int side) {
  check_side(side);
  if (img.width() == side && img.height() == side) return img;
  ScalarField out(Shape{side, side}, 0.0);
  for (int y = 0; y < side; ++y) {
    const double sy = source_coord(y, side, img.height());
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < side; ++x) {
      const double sx = source_coord(x, side, img.width());
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - x0;
      const double top = img(x0, y0) + fx * (img(x1, y0) - img(x0, y0));
      const double bottom = img(x0, y1) + fx * (img(x1, y1) - img(x0, y1));
      out(x, y) = top + fy * (bottom - top);
    }
  }
  return GrayImage::clamped(std::move(out));
}

BinaryMask resize_to_working(const BinaryMask& mask, int side) {
  check_side(side);
  if (mask.width() == side && mask.height() == side) return mask;
  Raster<std::uint8_t> out(Shape{side, side}, 0);
  for (int y = 0; y < side; ++y) {
    const int sy = std::min(mask.height() - 1,
                            static_cast<int>(std::lround(source_coord(y, side, mask.height()))));
    for (int x = 0; x < side; ++x) {
      const int sx = std::min(mask.width() - 1,
                              static_cast<int>(std::lround(source_coord(x, side, mask.width()))));
      out(x, y) = mask(sx, sy) ? 1 : 0;
    }
  }
  return BinaryMask(std::move(out));
}

}  // namespace bonelayer
