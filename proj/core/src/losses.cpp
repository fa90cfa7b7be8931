#include "bonelayer/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bonelayer {

void LossWeights::validate() const {
  for (double v : {alpha0, beta0, alpha1, beta1}) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("loss weights must lie in [0,1]");
  }
}

SupervisorTargets build_supervisor_targets(const MaskSet& masks) {
  const BinaryMask inter = masks.intersection_mask();
  const BinaryMask zero(masks.shape(), false);
  SupervisorTargets t;
  for (const auto& m : masks) t.real.push_back(mask_subtract(m, inter));
  for (const auto& m : masks) t.real.push_back(m);
  for (const auto& m : masks) t.fake.push_back(m);
  for (std::size_t i = 0; i < masks.size(); ++i) t.fake.push_back(zero);
  for (int rep = 0; rep < 2; ++rep) {
    for (const auto& m : masks) t.pretrain.push_back(m);
  }
  return t;
}

double rmse_loss(const GrayImage& x, const GrayImage& y, const BinaryMask& support) {
  require_same_shape(x.shape(), y.shape(), "rmse_loss");
  require_same_shape(x.shape(), support.shape(), "rmse_loss");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!support[i]) continue;
    const double d = x[i] - y[i];
    sum += d * d;
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(n));
}

BceDiceTerms bce_dice_terms(const GrayImage& pred, const BinaryMask& target) {
  require_same_shape(pred.shape(), target.shape(), "bce_dice_loss");
  double bce = 0.0;
  double intersection = 0.0;
  double pred_sum = 0.0;
  double target_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kBceEpsilon, 1.0 - kBceEpsilon);
    const double t = target[i] ? 1.0 : 0.0;
    bce -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    intersection += pred[i] * t;
    pred_sum += pred[i];
    target_sum += t;
  }
  BceDiceTerms out;
  out.bce = bce / static_cast<double>(pred.size());
  out.dice = (2.0 * intersection + kDiceSmoothing) / (pred_sum + target_sum + kDiceSmoothing);
  out.loss = 0.5 * out.bce + 0.5 * (1.0 - out.dice);
  return out;
}

double bce_dice_loss(const GrayImage& pred, const BinaryMask& target) {
  return bce_dice_terms(pred, target).loss;
}

double bce_dice_loss(std::span<const GrayImage> preds, std::span<const BinaryMask> targets) {
  if (preds.size() != targets.size() || preds.empty()) {
    throw InvalidInput("bce_dice_loss: " + std::to_string(preds.size()) +
                       " prediction channels vs " + std::to_string(targets.size()) + " targets");
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < preds.size(); ++c) sum += bce_dice_loss(preds[c], targets[c]);
  return sum / static_cast<double>(preds.size());
}

double loss_gr(std::span<const GrayImage> predicted_masks, const MaskSet& masks,
               const GrayImage& reconstruction, const GrayImage& joint, const LossWeights& w) {
  w.validate();
  require_same_shape(reconstruction.shape(), masks.shape(), "loss_gr");
  require_same_shape(joint.shape(), masks.shape(), "loss_gr");
  const BinaryMask uni = masks.union_mask();
  const BinaryMask inter = masks.intersection_mask();
  const double mask_term = bce_dice_loss(predicted_masks, masks.masks());
  const double recon_term = rmse_loss(reconstruction, joint, uni);
  const double overlap_term =
      rmse_loss(apply_mask(reconstruction, inter), apply_mask(joint, inter), inter);
  return w.alpha0 * mask_term + w.beta0 * recon_term + overlap_term;
}

double loss_d(std::span<const GrayImage> pred_real, std::span<const GrayImage> pred_fake,
              const SupervisorTargets& targets, const LossWeights& w) {
  w.validate();
  return w.alpha1 * bce_dice_loss(pred_real, targets.real) +
         w.beta1 * bce_dice_loss(pred_fake, targets.fake);
}

double loss_gr_pretrain(std::span<const GrayImage> predicted_masks, const MaskSet& masks,
                        const GrayImage& reconstruction, const GrayImage& joint,
                        const LayerSet& layers, const LayerSet& gt_layers, const LossWeights& w) {
  if (layers.size() != masks.size() || gt_layers.size() != masks.size()) {
    throw InvalidInput("loss_gr_pretrain: layer count does not match mask count");
  }
  double layer_term = 0.0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    layer_term += rmse_loss(layers[i], gt_layers[i], masks[i]);
  }
  layer_term /= static_cast<double>(masks.size());
  return loss_gr(predicted_masks, masks, reconstruction, joint, w) + layer_term;
}

double loss_d_pretrain(std::span<const GrayImage> pred_real, std::span<const GrayImage> pred_fake,
                       std::span<const GrayImage> pred_gt_layers, const SupervisorTargets& targets,
                       const LossWeights& w) {
  return loss_d(pred_real, pred_fake, targets, w) +
         bce_dice_loss(pred_gt_layers, targets.pretrain);
}

}  // namespace bonelayer
