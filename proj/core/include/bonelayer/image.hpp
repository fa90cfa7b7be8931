#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bonelayer/error.hpp"

namespace bonelayer {

struct Shape {
  int width = 0;
  int height = 0;

  std::size_t area() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Integer pixel translation.
struct Offset {
  int dx = 0;
  int dy = 0;

  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Row-major 2-D grid. Mutable scratch container used for intermediate
/// fields (gradients, solver state) and as the storage behind the validated
/// image types.
template <class T>
class Raster {
 public:
  Raster() = default;
  Raster(Shape shape, T fill = T{}) : shape_(checked(shape)), data_(shape.area(), fill) {}
  Raster(Shape shape, std::vector<T> data) : shape_(checked(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.area()) {
      throw InvalidInput("raster data length " + std::to_string(data_.size()) +
                         " does not match " + to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  int width() const noexcept { return shape_.width; }
  int height() const noexcept { return shape_.height; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(shape_.width) +
           static_cast<std::size_t>(x);
  }

  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }

  std::span<const T> values() const noexcept { return data_; }
  std::span<T> values() noexcept { return data_; }

  std::vector<T> release() && { return std::move(data_); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static Shape checked(Shape s) {
    if (s.width <= 0 || s.height <= 0) {
      throw InvalidInput("raster dimensions must be positive, got " + to_string(s));
    }
    return s;
  }

  Shape shape_{};
  std::vector<T> data_;
};

using ScalarField = Raster<double>;

/// Single-channel image with intensities in [0,1]. Immutable once built.
class GrayImage {
 public:
  GrayImage() = default;
  explicit GrayImage(ScalarField pixels);
  GrayImage(Shape shape, double fill);

  /// Clamps every value into [0,1]; `clamped_count` receives the number of
  /// pixels that had to be moved.
  static GrayImage clamped(ScalarField pixels, std::size_t* clamped_count = nullptr);

  const Shape& shape() const noexcept { return pixels_.shape(); }
  int width() const noexcept { return pixels_.width(); }
  int height() const noexcept { return pixels_.height(); }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.size() == 0; }

  double operator()(int x, int y) const noexcept { return pixels_(x, y); }
  double operator[](std::size_t i) const noexcept { return pixels_[i]; }
  std::span<const double> values() const noexcept { return pixels_.values(); }
  const ScalarField& field() const noexcept { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  struct Unchecked {};
  GrayImage(ScalarField pixels, Unchecked) : pixels_(std::move(pixels)) {}

  ScalarField pixels_;
};

/// Region indicator with values in {0,1}.
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Raster<std::uint8_t> bits);
  BinaryMask(Shape shape, bool fill);

  /// Builds a mask from a predicate over pixel coordinates.
  template <class Pred>
  static BinaryMask from_predicate(Shape shape, Pred&& inside) {
    Raster<std::uint8_t> bits(shape, 0);
    for (int y = 0; y < shape.height; ++y)
      for (int x = 0; x < shape.width; ++x) bits(x, y) = inside(x, y) ? 1 : 0;
    return BinaryMask(std::move(bits));
  }

  const Shape& shape() const noexcept { return bits_.shape(); }
  int width() const noexcept { return bits_.width(); }
  int height() const noexcept { return bits_.height(); }
  std::size_t size() const noexcept { return bits_.size(); }

  bool operator()(int x, int y) const noexcept { return bits_(x, y) != 0; }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  std::span<const std::uint8_t> values() const noexcept { return bits_.values(); }

  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }

  /// Translates by (dx, dy). Pixels pushed out of frame are dropped and
  /// counted in `lost`.
  BinaryMask shifted(int dx, int dy, std::size_t* lost = nullptr) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Raster<std::uint8_t> bits_;
};

/// Ordered per-bone masks M_1..M_n (n >= 2) sharing one shape.
class MaskSet {
 public:
  MaskSet() = default;
  explicit MaskSet(std::vector<BinaryMask> masks);

  std::size_t size() const noexcept { return masks_.size(); }
  const BinaryMask& operator[](std::size_t i) const noexcept { return masks_[i]; }
  const Shape& shape() const noexcept { return masks_.front().shape(); }
  auto begin() const noexcept { return masks_.begin(); }
  auto end() const noexcept { return masks_.end(); }
  const std::vector<BinaryMask>& masks() const noexcept { return masks_; }

  BinaryMask union_mask() const;
  BinaryMask intersection_mask() const;
  /// Pixels covered by at least two masks. Equals the intersection for n == 2.
  BinaryMask multi_coverage_mask() const;
  /// Number of masks covering each pixel.
  Raster<std::uint8_t> coverage() const;

  bool pairwise_disjoint() const;

  friend bool operator==(const MaskSet&, const MaskSet&) = default;

 private:
  std::vector<BinaryMask> masks_;
};

/// Per-bone layer images L_i, each zero outside its mask.
class LayerSet {
 public:
  LayerSet() = default;
  LayerSet(std::vector<GrayImage> layers, MaskSet masks);

  std::size_t size() const noexcept { return layers_.size(); }
  const GrayImage& operator[](std::size_t i) const noexcept { return layers_[i]; }
  const std::vector<GrayImage>& layers() const noexcept { return layers_; }
  const MaskSet& masks() const noexcept { return masks_; }
  const Shape& shape() const noexcept { return masks_.shape(); }

  friend bool operator==(const LayerSet&, const LayerSet&) = default;

 private:
  std::vector<GrayImage> layers_;
  MaskSet masks_;
};

BinaryMask mask_union(const MaskSet& ms);
BinaryMask mask_intersection(const MaskSet& ms);
BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b);
/// a AND NOT b.
BinaryMask mask_subtract(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_complement(const BinaryMask& a);

GrayImage apply_mask(const GrayImage& img, const BinaryMask& m);

/// Bilinear resample to side x side (corner-aligned sampling grid).
GrayImage resize_to_working(const GrayImage& img, int side);
/// Nearest-neighbour resample, keeps the mask binary.
BinaryMask resize_to_working(const BinaryMask& mask, int side);

/// Mean of `img` over `support`; 0 for an empty support.
double masked_mean(const GrayImage& img, const BinaryMask& support);

void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace bonelayer
