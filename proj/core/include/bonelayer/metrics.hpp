#pragma once

#include <limits>
#include <optional>

#include "bonelayer/image.hpp"

namespace bonelayer {

/// SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03 and
/// unit dynamic range, averaged over all fully in-frame windows.
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

double mse(const GrayImage& x, const GrayImage& y);
/// Mean over `support` only; 0 when the support is empty.
double mse(const GrayImage& x, const GrayImage& y, const BinaryMask& support);

/// 10 log10(peak^2 / mse); +inf when mse is zero.
double psnr_from_mse(double mse_value, double peak = 1.0);
double psnr(const GrayImage& x, const GrayImage& y, double peak = 1.0);

/// Local SSIM values at every window centre, (W-10) x (H-10) for the default
/// window. Throws InvalidInput if either side is smaller than the window.
ScalarField ssim_map(const GrayImage& x, const GrayImage& y, const SsimParams& params = {});

double ssim(const GrayImage& x, const GrayImage& y, const SsimParams& params = {});
/// Mean of the local SSIM map over windows whose centre lies in `support`.
double ssim(const GrayImage& x, const GrayImage& y, const BinaryMask& support,
            const SsimParams& params = {});

}  // namespace bonelayer
