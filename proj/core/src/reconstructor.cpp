#include "bonelayer/reconstructor.hpp"

#include <algorithm>
#include <string>

namespace bonelayer {

CorrectionParameter CorrectionParameter::supplied(double k) {
  if (!(k >= kMinCorrection && k <= 1.0)) {
    throw InvalidInput("correction parameter k=" + std::to_string(k) + " outside [" +
                       std::to_string(kMinCorrection) + ", 1]");
  }
  return CorrectionParameter(k, Provenance::kSupplied, false, false);
}

CorrectionParameter CorrectionParameter::estimated(double raw, bool no_overlap) {
  const double k = std::clamp(raw, kMinCorrection, 1.0);
  return CorrectionParameter(k, Provenance::kEstimated, k != raw, no_overlap);
}

LayerSet to_absorption(const LayerSet& layers) {
  std::vector<GrayImage> out;
  out.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& mask = layers.masks()[i];
    const auto& layer = layers[i];
    ScalarField a(layer.shape(), 0.0);
    for (std::size_t p = 0; p < a.size(); ++p) a[p] = mask[p] ? 1.0 - layer[p] : 0.0;
    out.emplace_back(std::move(a));
  }
  return LayerSet(std::move(out), layers.masks());
}

namespace {

// Gathers the intensities of the layers covering pixel p; returns the count.
std::size_t gather(const LayerSet& layers, std::size_t p, std::vector<double>& buf,
                   std::vector<std::size_t>& which) {
  buf.clear();
  which.clear();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers.masks()[i][p]) {
      buf.push_back(layers[i][p]);
      which.push_back(i);
    }
  }
  return buf.size();
}

}  // namespace

ReconstructionOutput reconstruct(const LayerSet& layers, const CorrectionParameter& k) {
  const double kv = k.value();
  const BinaryMask inter = layers.masks().intersection_mask();
  ScalarField r(layers.shape(), 0.0);
  std::vector<double> buf;
  std::vector<std::size_t> which;
  for (std::size_t p = 0; p < r.size(); ++p) {
    gather(layers, p, buf, which);
    r[p] = detail::compose_pixel(buf, kv);
  }
  ReconstructionOutput out;
  out.image = GrayImage::clamped(std::move(r), &out.saturated_count);
  out.overlap = apply_mask(out.image, inter);
  return out;
}

ReconstructionGradient reconstruct_gradient(const LayerSet& layers, const CorrectionParameter& k) {
  const double kv = k.value();
  const Shape shape = layers.shape();
  ReconstructionGradient g;
  g.d_layers.assign(layers.size(), ScalarField(shape, 0.0));
  g.d_k = ScalarField(shape, 0.0);

  std::vector<double> buf;
  std::vector<double> partials;
  std::vector<std::size_t> which;
  for (std::size_t p = 0; p < shape.area(); ++p) {
    const std::size_t m = gather(layers, p, buf, which);
    if (m == 0) continue;
    if (m == 1) {
      g.d_layers[which[0]][p] = 1.0;
      continue;
    }
    partials.resize(m);
    double d_k = 0.0;
    const double value = detail::compose_pixel_gradient(buf, kv, partials, d_k);
    if (value < 0.0 || value > 1.0) continue;  // clamped: flat
    for (std::size_t j = 0; j < m; ++j) g.d_layers[which[j]][p] = partials[j];
    g.d_k[p] = d_k;
  }
  return g;
}

CorrectionParameter estimate_k(const GrayImage& joint, const MaskSet& masks,
                               const SolverConfig& cfg) {
  require_same_shape(joint.shape(), masks.shape(), "estimate_k");
  const BinaryMask uni = masks.union_mask();
  if (uni.empty()) throw InvalidInput("estimate_k: mask union is empty");
  const GrayImage background = inpaint_laplace(joint, uni, cfg);
  const BinaryMask overlap = masks.multi_coverage_mask();
  const bool fallback = overlap.empty();
  const double mean = masked_mean(background, fallback ? uni : overlap);
  return CorrectionParameter::estimated(1.0 - mean, fallback);
}

}  // namespace bonelayer
