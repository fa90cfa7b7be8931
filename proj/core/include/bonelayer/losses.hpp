#pragma once

#include <span>
#include <vector>

#include "bonelayer/image.hpp"

namespace bonelayer {

inline constexpr double kBceEpsilon = 1e-7;
inline constexpr double kDiceSmoothing = 1.0;

/// Weights of the generator/reconstructor loss (alpha0, beta0) and the
/// supervisor loss (alpha1, beta1).
struct LossWeights {
  double alpha0 = 0.5;
  double beta0 = 0.5;
  double alpha1 = 0.5;
  double beta1 = 0.5;

  void validate() const;
};

/// Supervisor ground truth, each a stack of 2n channels:
///   real     = {M_i - M_cap}_i ++ {M_i}_i
///   fake     = {M_i}_i         ++ {0}_i
///   pretrain = {M_i}_i         ++ {M_i}_i
struct SupervisorTargets {
  std::vector<BinaryMask> real;
  std::vector<BinaryMask> fake;
  std::vector<BinaryMask> pretrain;
};

SupervisorTargets build_supervisor_targets(const MaskSet& masks);

/// sqrt(mean over support of (x - y)^2); 0 on an empty support.
double rmse_loss(const GrayImage& x, const GrayImage& y, const BinaryMask& support);

struct BceDiceTerms {
  double bce = 0.0;
  double dice = 0.0;  ///< smoothed Dice coefficient, not the loss
  double loss = 0.0;  ///< 0.5 * bce + 0.5 * (1 - dice)
};

/// Binary cross-entropy (probabilities clamped to [eps, 1-eps]) combined
/// with the smoothed Dice coefficient of the unclamped prediction.
BceDiceTerms bce_dice_terms(const GrayImage& pred, const BinaryMask& target);
double bce_dice_loss(const GrayImage& pred, const BinaryMask& target);
/// Channel-wise mean of bce_dice_loss over a stack.
double bce_dice_loss(std::span<const GrayImage> preds, std::span<const BinaryMask> targets);

/// alpha0 * Lb(M', M) + beta0 * Lr(R, J | M_union) + Lr(R * M_cap, J * M_cap | M_cap).
double loss_gr(std::span<const GrayImage> predicted_masks, const MaskSet& masks,
               const GrayImage& reconstruction, const GrayImage& joint,
               const LossWeights& w = {});

/// alpha1 * Lb(D(J_r), M_r) + beta1 * Lb(D(J_f), M_f).
double loss_d(std::span<const GrayImage> pred_real, std::span<const GrayImage> pred_fake,
              const SupervisorTargets& targets, const LossWeights& w = {});

/// loss_gr plus the layer term, the mean over i of Lr(L_i, L_g,i | M_i).
double loss_gr_pretrain(std::span<const GrayImage> predicted_masks, const MaskSet& masks,
                        const GrayImage& reconstruction, const GrayImage& joint,
                        const LayerSet& layers, const LayerSet& gt_layers,
                        const LossWeights& w = {});

/// loss_d plus Lb(D(L_g), M_g).
double loss_d_pretrain(std::span<const GrayImage> pred_real, std::span<const GrayImage> pred_fake,
                       std::span<const GrayImage> pred_gt_layers, const SupervisorTargets& targets,
                       const LossWeights& w = {});

}  // namespace bonelayer
