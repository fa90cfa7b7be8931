#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace bonelayer::testing {

ScalarField dense_laplace(const ScalarField& values, const BinaryMask& region,
                          const BinaryMask* domain) {
  const Shape s = values.shape();
  std::vector<int> id(s.area(), -1);
  int n = 0;
  for (std::size_t p = 0; p < s.area(); ++p) {
    if (region[p]) id[p] = n++;
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  const int dxs[4] = {1, -1, 0, 0};
  const int dys[4] = {0, 0, 1, -1};
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const std::size_t p = values.index(x, y);
      if (id[p] < 0) continue;
      for (int d = 0; d < 4; ++d) {
        const int nx = x + dxs[d];
        const int ny = y + dys[d];
        if (!s.contains(nx, ny)) continue;
        const std::size_t q = values.index(nx, ny);
        if (domain != nullptr && !(*domain)[q]) continue;
        a(id[p], id[p]) += 1.0;
        if (id[q] >= 0) {
          a(id[p], id[q]) -= 1.0;
        } else {
          b(id[p]) += values[q];
        }
      }
    }
  }
  const Eigen::VectorXd u = a.fullPivLu().solve(b);
  ScalarField out = values;
  for (std::size_t p = 0; p < s.area(); ++p) {
    if (id[p] >= 0) out[p] = u(id[p]);
  }
  return out;
}

double naive_ssim(const GrayImage& x, const GrayImage& y) {
  constexpr int kSize = 11;
  constexpr double kSigma = 1.5;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double w[kSize][kSize];
  double total = 0.0;
  for (int i = 0; i < kSize; ++i) {
    for (int j = 0; j < kSize; ++j) {
      const double di = i - kSize / 2;
      const double dj = j - kSize / 2;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2 * kSigma * kSigma));
      total += w[i][j];
    }
  }
  double sum = 0.0;
  int windows = 0;
  for (int oy = 0; oy + kSize <= x.height(); ++oy) {
    for (int ox = 0; ox + kSize <= x.width(); ++ox) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kSize; ++i) {
        for (int j = 0; j < kSize; ++j) {
          const double ww = w[i][j] / total;
          const double a = x(ox + j, oy + i);
          const double b = y(ox + j, oy + i);
          mx += ww * a;
          my += ww * b;
          sxx += ww * a * a;
          syy += ww * b * b;
          sxy += ww * a * b;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cxy = sxy - mx * my;
      sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return sum / windows;
}

double naive_sign_test(std::size_t positives, std::size_t negatives) {
  const std::size_t n = positives + negatives;
  if (n == 0) return 1.0;
  const std::size_t k = std::min(positives, negatives);
  // Pascal's triangle row n in long double, then scale by 2^-n.
  std::vector<long double> row(n + 1, 0.0L);
  row[0] = 1.0L;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = i; j > 0; --j) row[j] += row[j - 1];
  }
  long double tail = 0.0L;
  for (std::size_t i = 0; i <= k; ++i) tail += row[i];
  const long double p = 2.0L * tail / std::pow(2.0L, static_cast<long double>(n));
  return static_cast<double>(std::min(1.0L, p));
}

long double compose_reference(std::span<const double> intensities, double k) {
  long double prod = 1.0L;
  for (double l : intensities) prod *= (1.0L - l) / static_cast<long double>(k);
  return 1.0L - static_cast<long double>(k) * prod;
}

GrayImage random_image(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  ScalarField f(shape, 0.0);
  for (double& v : f.values()) v = u(rng);
  return GrayImage(std::move(f));
}

BinaryMask random_blob(Shape shape, std::mt19937_64& rng, double fill) {
  // Random disc union: a few circles of random centre and radius.
  std::uniform_real_distribution<double> ux(0.0, shape.width - 1.0);
  std::uniform_real_distribution<double> uy(0.0, shape.height - 1.0);
  const double rmax = std::sqrt(fill * shape.area() / 3.14159 / 3.0) + 1.0;
  std::uniform_real_distribution<double> ur(1.0, rmax);
  std::vector<std::array<double, 3>> discs(3);
  for (auto& d : discs) d = {ux(rng), uy(rng), ur(rng)};
  return BinaryMask::from_predicate(shape, [&](int x, int y) {
    for (const auto& d : discs) {
      if (std::hypot(x - d[0], y - d[1]) <= d[2]) return true;
    }
    return false;
  });
}

}  // namespace bonelayer::testing
