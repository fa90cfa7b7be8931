#include "bonelayer/laplace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bonelayer {

void SolverConfig::validate() const {
  if (!(tolerance > 0.0)) throw InvalidInput("solver tolerance must be > 0");
  if (max_iterations <= 0) throw InvalidInput("solver max_iterations must be > 0");
  if (!(relaxation > 0.0 && relaxation < 2.0)) {
    throw InvalidInput("SOR relaxation must lie in (0,2), got " + std::to_string(relaxation));
  }
}

namespace {

constexpr std::array<std::array<int, 2>, 4> kNeighbours{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

// Unknown u_j is updated towards (data_sum + sum of unknown neighbours) / degree.
struct Stencil {
  std::vector<std::size_t> pixel;          // frame index of each unknown
  std::vector<std::array<int, 4>> links;   // neighbouring unknowns, -1 padded
  std::vector<double> data_sum;
  std::vector<double> degree;
};

Stencil build_stencil(const ScalarField& values, const BinaryMask& region,
                      const BinaryMask* domain) {
  const Shape shape = values.shape();
  auto in_domain = [&](int x, int y) { return domain == nullptr || (*domain)(x, y); };

  std::vector<int> unknown_id(shape.area(), -1);
  Stencil s;
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      if (region(x, y) && in_domain(x, y)) {
        unknown_id[values.index(x, y)] = static_cast<int>(s.pixel.size());
        s.pixel.push_back(values.index(x, y));
      }
    }
  }

  const std::size_t n = s.pixel.size();
  s.links.assign(n, {-1, -1, -1, -1});
  s.data_sum.assign(n, 0.0);
  s.degree.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const int x = static_cast<int>(s.pixel[j] % static_cast<std::size_t>(shape.width));
    const int y = static_cast<int>(s.pixel[j] / static_cast<std::size_t>(shape.width));
    int k = 0;
    for (const auto& d : kNeighbours) {
      const int nx = x + d[0];
      const int ny = y + d[1];
      if (!shape.contains(nx, ny) || !in_domain(nx, ny)) continue;
      s.degree[j] += 1.0;
      const int id = unknown_id[values.index(nx, ny)];
      if (id >= 0) {
        s.links[j][k++] = id;
      } else {
        s.data_sum[j] += values(nx, ny);
      }
    }
  }
  return s;
}

// Every 4-connected component of unknowns must touch at least one data pixel.
void require_boundary_data(const Stencil& s) {
  const std::size_t n = s.pixel.size();
  std::vector<char> seen(n, 0);
  std::vector<int> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (seen[start]) continue;
    bool anchored = false;
    stack.assign(1, static_cast<int>(start));
    seen[start] = 1;
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      int unknown_links = 0;
      for (int l : s.links[j]) {
        if (l < 0) continue;
        ++unknown_links;
        if (!seen[l]) {
          seen[l] = 1;
          stack.push_back(l);
        }
      }
      if (s.degree[j] > unknown_links) anchored = true;
    }
    if (!anchored) {
      throw SolverError("Laplace region component has no boundary data (unsolvable)",
                        std::numeric_limits<double>::infinity(), 0);
    }
  }
}

double stencil_residual(const Stencil& s, const std::vector<double>& u) {
  double worst = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    double sum = s.data_sum[j];
    for (int l : s.links[j]) {
      if (l >= 0) sum += u[l];
    }
    worst = std::max(worst, std::abs(u[j] - sum / s.degree[j]));
  }
  return worst;
}

}  // namespace

LaplaceSolution solve_laplace(const ScalarField& values, const BinaryMask& region,
                              const SolverConfig& cfg, const BinaryMask* domain) {
  cfg.validate();
  require_same_shape(values.shape(), region.shape(), "solve_laplace");
  if (domain != nullptr) require_same_shape(values.shape(), domain->shape(), "solve_laplace");

  LaplaceSolution out;
  out.field = values;
  const Stencil s = build_stencil(values, region, domain);
  const std::size_t n = s.pixel.size();
  if (n == 0) {
    out.converged = true;
    return out;
  }
  require_boundary_data(s);

  // Start from the mean of the Dirichlet ring.
  double ring_sum = 0.0;
  double ring_count = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    int unknown_links = 0;
    for (int l : s.links[j]) unknown_links += l >= 0 ? 1 : 0;
    ring_sum += s.data_sum[j];
    ring_count += s.degree[j] - unknown_links;
  }
  std::vector<double> u(n, ring_sum / ring_count);

  const double w = cfg.relaxation;
  const bool forward = cfg.order == SweepOrder::kForward;
  out.residual = stencil_residual(s, u);
  while (out.residual > cfg.tolerance && out.iterations < cfg.max_iterations) {
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t j = forward ? t : n - 1 - t;
      double sum = s.data_sum[j];
      for (int l : s.links[j]) {
        if (l >= 0) sum += u[l];
      }
      u[j] += w * (sum / s.degree[j] - u[j]);
    }
    ++out.iterations;
    out.residual = stencil_residual(s, u);
  }
  out.converged = out.residual <= cfg.tolerance;

  for (std::size_t j = 0; j < n; ++j) out.field[s.pixel[j]] = u[j];
  return out;
}

GrayImage inpaint_laplace(const GrayImage& img, const BinaryMask& region, const SolverConfig& cfg) {
  LaplaceSolution sol = solve_laplace(img.field(), region, cfg);
  if (!sol.converged) {
    throw SolverError("Laplace solver did not converge in " + std::to_string(sol.iterations) +
                          " sweeps (residual " + std::to_string(sol.residual) + ")",
                      sol.residual, sol.iterations);
  }
  // The maximum principle keeps the solution inside the data range; the clamp
  // only absorbs round-off at the ends of [0,1].
  return GrayImage::clamped(std::move(sol.field));
}

double residual(const GrayImage& img, const BinaryMask& region) {
  require_same_shape(img.shape(), region.shape(), "residual");
  double worst = 0.0;
  const Shape shape = img.shape();
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      if (!region(x, y)) continue;
      double sum = 0.0;
      int deg = 0;
      for (const auto& d : kNeighbours) {
        if (!shape.contains(x + d[0], y + d[1])) continue;
        sum += img(x + d[0], y + d[1]);
        ++deg;
      }
      if (deg > 0) worst = std::max(worst, std::abs(img(x, y) - sum / deg));
    }
  }
  return worst;
}

}  // namespace bonelayer
