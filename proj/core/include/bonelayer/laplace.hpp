#pragma once

#include "bonelayer/image.hpp"

namespace bonelayer {

enum class SweepOrder { kForward, kReverse };

struct SolverConfig {
  double tolerance = 1e-5;     ///< max |u - mean(4-neighbours)| over the region
  int max_iterations = 20000;  ///< SOR sweeps
  double relaxation = 1.9;     ///< SOR factor, 0 < w < 2
  SweepOrder order = SweepOrder::kForward;

  void validate() const;
};

struct LaplaceSolution {
  ScalarField field;  ///< input values with the region replaced by the solution
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Solves the discrete Laplace equation (5-point stencil) on `region` with
/// Dirichlet data taken from the adjacent pixels outside the region.
///
/// When `domain` is given, pixels outside it are treated like the area past
/// the image border: they are neither unknowns nor boundary data, and the
/// stencil averages over the remaining neighbours only. Region pixels outside
/// the domain are left untouched.
///
/// Throws SolverError if some 4-connected component of the region has no
/// boundary data at all. Non-convergence is reported through the returned
/// flag, not thrown.
LaplaceSolution solve_laplace(const ScalarField& values, const BinaryMask& region,
                              const SolverConfig& cfg, const BinaryMask* domain = nullptr);

/// Harmonic inpainting of `region` from its surroundings. Throws SolverError
/// when the solver does not reach `cfg.tolerance`.
GrayImage inpaint_laplace(const GrayImage& img, const BinaryMask& region,
                          const SolverConfig& cfg = {});

/// Max over region pixels of |pixel - mean(in-frame 4-neighbours)|. Zero for
/// an empty region.
double residual(const GrayImage& img, const BinaryMask& region);

}  // namespace bonelayer
