#pragma once

#include <cstddef>
#include <vector>

#include "bonelayer/image.hpp"
#include "bonelayer/laplace.hpp"
#include "bonelayer/reconstructor.hpp"

namespace bonelayer {

inline constexpr double kTvEpsilon = 1e-8;

struct SeparatorConfig {
  double step_size = 0.5;        ///< first trial step; halves on rejection, doubles on acceptance
  int max_iterations = 2000;
  double relative_decrease = 1e-6;
  int decrease_window = 10;      ///< iterations over which the decrease is measured
  double w_rec = 1.0;            ///< reconstruction RMSE over the union
  double w_cap = 1.0;            ///< reconstruction RMSE over the intersection
  double w_tv = 5e-3;            ///< total-variation prior, summed over layers
  SolverConfig init_solver{};

  void validate() const;
};

struct SeparationResult {
  LayerSet layers;
  ReconstructionOutput reconstruction;
  std::vector<double> energy_trace;  ///< initial energy, then one entry per accepted step
  bool converged = false;
  int iterations = 0;
  std::size_t free_variables = 0;
};

/// Smoothed isotropic TV: mean over `support` of sqrt(dx^2 + dy^2 + eps^2)
/// with forward differences; a difference whose far pixel leaves the support
/// counts as zero. Zero for an empty support.
double total_variation(const GrayImage& img, const BinaryMask& support);

/// Starting point for separation. Each layer equals J on the pixels only it
/// covers; on pixels covered by several bones it is the harmonic extension
/// of its own exclusive values (Laplace inside the bone mask). A layer with
/// no exclusive pixels bordering the overlap is filled with 1 - k.
LayerSet initialize_layers(const GrayImage& joint, const MaskSet& masks,
                           const CorrectionParameter& k, const SolverConfig& cfg = {});

/// w_rec * Lr(R, J | M_union) + w_cap * Lr(R_cap, J_cap | M_cap) + w_tv * sum_i TV(L_i | M_i)
double separation_energy(const LayerSet& layers, const GrayImage& joint,
                         const CorrectionParameter& k, const SeparatorConfig& cfg);

/// Recovers per-bone layers from an overlapped image by projected gradient
/// descent on separation_energy. Only pixels covered by two or more bones
/// are free; everything else stays equal to the observed image. Iterates are
/// kept in [0,1]. Never throws on non-convergence; check `converged`.
SeparationResult separate(const GrayImage& joint, const MaskSet& masks,
                          const CorrectionParameter& k, const SeparatorConfig& cfg = {});

}  // namespace bonelayer
