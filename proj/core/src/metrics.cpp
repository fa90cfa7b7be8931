#include "bonelayer/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace bonelayer {

double mse(const GrayImage& x, const GrayImage& y) {
  require_same_shape(x.shape(), y.shape(), "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return sum / static_cast<double>(x.size());
}

double mse(const GrayImage& x, const GrayImage& y, const BinaryMask& support) {
  require_same_shape(x.shape(), y.shape(), "mse");
  require_same_shape(x.shape(), support.shape(), "mse");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!support[i]) continue;
    const double d = x[i] - y[i];
    sum += d * d;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double psnr_from_mse(double mse_value, double peak) {
  if (mse_value <= 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(peak * peak / mse_value);
}

double psnr(const GrayImage& x, const GrayImage& y, double peak) {
  return psnr_from_mse(mse(x, y), peak);
}

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - c;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "valid" correlation: output is (W-n+1) x (H-n+1).
ScalarField filter_valid(const ScalarField& in, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int w = in.width();
  const int h = in.height();
  ScalarField rows(Shape{w - n + 1, h}, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + n <= w; ++x) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[t] * in(x + t, y);
      rows(x, y) = s;
    }
  }
  ScalarField out(Shape{w - n + 1, h - n + 1}, 0.0);
  for (int y = 0; y + n <= h; ++y) {
    for (int x = 0; x < w - n + 1; ++x) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[t] * rows(x, y + t);
      out(x, y) = s;
    }
  }
  return out;
}

}  // namespace

ScalarField ssim_map(const GrayImage& x, const GrayImage& y, const SsimParams& params) {
  require_same_shape(x.shape(), y.shape(), "ssim");
  if (x.width() < params.window || x.height() < params.window) {
    throw InvalidInput("ssim needs images of at least " + std::to_string(params.window) +
                       " pixels per side, got " + to_string(x.shape()));
  }
  const auto kernel = gaussian_kernel(params.window, params.sigma);

  ScalarField xx(x.shape(), 0.0);
  ScalarField yy(x.shape(), 0.0);
  ScalarField xy(x.shape(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const ScalarField mu_x = filter_valid(x.field(), kernel);
  const ScalarField mu_y = filter_valid(y.field(), kernel);
  const ScalarField e_xx = filter_valid(xx, kernel);
  const ScalarField e_yy = filter_valid(yy, kernel);
  const ScalarField e_xy = filter_valid(xy, kernel);

  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  ScalarField out(mu_x.shape(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    const double vx = e_xx[i] - mx * mx;
    const double vy = e_yy[i] - my * my;
    const double cov = e_xy[i] - mx * my;
    out[i] = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
             ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return out;
}

double ssim(const GrayImage& x, const GrayImage& y, const SsimParams& params) {
  const ScalarField map = ssim_map(x, y, params);
  double sum = 0.0;
  for (double v : map.values()) sum += v;
  return sum / static_cast<double>(map.size());
}

double ssim(const GrayImage& x, const GrayImage& y, const BinaryMask& support,
            const SsimParams& params) {
  require_same_shape(x.shape(), support.shape(), "ssim");
  const ScalarField map = ssim_map(x, y, params);
  const int half = params.window / 2;
  double sum = 0.0;
  std::size_t n = 0;
  for (int j = 0; j < map.height(); ++j) {
    for (int i = 0; i < map.width(); ++i) {
      if (!support(i + half, j + half)) continue;
      sum += map(i, j);
      ++n;
    }
  }
  if (n == 0) throw InvalidInput("ssim: no window centre lies inside the support");
  return sum / static_cast<double>(n);
}

}  // namespace bonelayer
