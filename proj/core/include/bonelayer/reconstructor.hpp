#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bonelayer/image.hpp"
#include "bonelayer/laplace.hpp"

namespace bonelayer {

/// Lower bound on k; keeps the per-layer quotient a_i / k finite.
inline constexpr double kMinCorrection = 1e-3;

enum class Provenance { kEstimated, kSupplied };

/// Soft-tissue correction parameter k, an absorption value in
/// [kMinCorrection, 1].
class CorrectionParameter {
 public:
  /// Throws InvalidInput when k is outside [kMinCorrection, 1].
  static CorrectionParameter supplied(double k);

  /// Clamps `raw` into range. `no_overlap` records that the estimate was
  /// taken over the union because the masks do not overlap.
  static CorrectionParameter estimated(double raw, bool no_overlap);

  double value() const noexcept { return k_; }
  Provenance provenance() const noexcept { return provenance_; }
  /// The raw estimate fell outside the admissible range and was clamped.
  bool clamped() const noexcept { return clamped_; }
  bool no_overlap_fallback() const noexcept { return no_overlap_; }
  bool flagged() const noexcept { return clamped_ || no_overlap_; }

 private:
  CorrectionParameter(double k, Provenance p, bool clamped, bool no_overlap)
      : k_(k), provenance_(p), clamped_(clamped), no_overlap_(no_overlap) {}

  double k_ = 1.0;
  Provenance provenance_ = Provenance::kSupplied;
  bool clamped_ = false;
  bool no_overlap_ = false;
};

struct ReconstructionOutput {
  GrayImage image;    ///< R, zero outside the mask union
  GrayImage overlap;  ///< R restricted to the mask intersection
  std::size_t saturated_count = 0;
};

struct ReconstructionGradient {
  std::vector<ScalarField> d_layers;  ///< dR/dL_i per pixel
  ScalarField d_k;                    ///< dR/dk per pixel
};

/// Absorption views a_i = 1 - L_i on each mask, zero elsewhere.
LayerSet to_absorption(const LayerSet& layers);

/// Superposition model. With a_i = 1 - L_i and the set A of masks covering a
/// pixel:
///
///   |A| == 0 : R = 0
///   |A| == 1 : R = L_i (returned verbatim)
///   |A| >= 2 : R = 1 - k * prod_{i in A} (a_i / k)
///
/// which is `(1 - k * prod_i (1 - (1 - a_i/k) M_i)) * M_union` evaluated
/// without the trivial unit factors. Values below 0 are clamped and counted.
ReconstructionOutput reconstruct(const LayerSet& layers, const CorrectionParameter& k);

/// Analytic partial derivatives of the unclamped model. Zero at clamped
/// pixels and outside the union.
ReconstructionGradient reconstruct_gradient(const LayerSet& layers, const CorrectionParameter& k);

/// k = 1 - mean(B) over the overlap, where B is the harmonic inpainting of J
/// over the mask union. Falls back to the union mean (flagged) when the masks
/// do not overlap.
CorrectionParameter estimate_k(const GrayImage& joint, const MaskSet& masks,
                               const SolverConfig& cfg = {});

namespace detail {

/// Unclamped model value for one pixel given the intensities of the covering
/// layers.
inline double compose_pixel(std::span<const double> intensities, double k) noexcept {
  if (intensities.empty()) return 0.0;
  if (intensities.size() == 1) return intensities[0];
  double prod = 1.0;
  for (double l : intensities) prod *= (1.0 - l) / k;
  return 1.0 - k * prod;
}

/// Unclamped model value and its partials for one pixel covered by two or
/// more layers. `d_layers[j]` receives dR/dL_j; returns dR/dk through `d_k`.
///   R = 1 - k prod(a_i/k),  dR/dL_j = prod_{i != j}(a_i/k),  dR/dk = (m-1) prod(a_i/k)
inline double compose_pixel_gradient(std::span<const double> intensities, double k,
                                     std::span<double> d_layers, double& d_k) noexcept {
  const std::size_t m = intensities.size();
  double prod = 1.0;
  for (double l : intensities) prod *= (1.0 - l) / k;
  for (std::size_t j = 0; j < m; ++j) {
    double others = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i != j) others *= (1.0 - intensities[i]) / k;
    }
    d_layers[j] = others;
  }
  d_k = static_cast<double>(m - 1) * prod;
  return 1.0 - k * prod;
}

}  // namespace detail

}  // namespace bonelayer
