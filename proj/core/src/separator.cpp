#include "bonelayer/separator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "bonelayer/losses.hpp"

namespace bonelayer {

void SeparatorConfig::validate() const {
  if (!(step_size > 0.0)) throw InvalidInput("separator step size must be > 0");
  if (max_iterations < 0) throw InvalidInput("separator max_iterations must be >= 0");
  if (decrease_window < 1) throw InvalidInput("separator decrease window must be >= 1");
  if (!(relative_decrease >= 0.0)) throw InvalidInput("relative decrease must be >= 0");
  if (!(w_rec >= 0.0 && w_cap >= 0.0 && w_tv >= 0.0)) {
    throw InvalidInput("separator weights must be >= 0");
  }
  init_solver.validate();
}

// ----------------------------------------------------------------------- TV

namespace {

double tv_term(const ScalarField& f, const BinaryMask& support, int x, int y) {
  const Shape s = f.shape();
  double dx = 0.0;
  double dy = 0.0;
  if (x + 1 < s.width && support(x + 1, y)) dx = f(x + 1, y) - f(x, y);
  if (y + 1 < s.height && support(x, y + 1)) dy = f(x, y + 1) - f(x, y);
  return std::sqrt(dx * dx + dy * dy + kTvEpsilon * kTvEpsilon);
}

}  // namespace

double total_variation(const GrayImage& img, const BinaryMask& support) {
  require_same_shape(img.shape(), support.shape(), "total_variation");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!support(x, y)) continue;
      sum += tv_term(img.field(), support, x, y);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

// -------------------------------------------------------------- init layers

LayerSet initialize_layers(const GrayImage& joint, const MaskSet& masks,
                           const CorrectionParameter& k, const SolverConfig& cfg) {
  require_same_shape(joint.shape(), masks.shape(), "initialize_layers");
  const BinaryMask shared = masks.multi_coverage_mask();
  std::vector<GrayImage> layers;
  for (const auto& m : masks) {
    ScalarField base(joint.shape(), 0.0);
    for (std::size_t p = 0; p < base.size(); ++p) base[p] = m[p] ? joint[p] : 0.0;
    const BinaryMask region = mask_intersection(m, shared);

    ScalarField filled = base;
    if (!region.empty()) {
      try {
        filled = solve_laplace(base, region, cfg, &m).field;
      } catch (const SolverError&) {
        for (std::size_t p = 0; p < filled.size(); ++p) {
          if (region[p]) filled[p] = 1.0 - k.value();
        }
      }
    }
    layers.push_back(GrayImage::clamped(std::move(filled)));
  }
  return LayerSet(std::move(layers), masks);
}

// ------------------------------------------------------------------ problem

namespace {

/// Energy and gradient restricted to the free variables. Layer fields are
/// kept as full frames so the TV stencil can read frozen neighbours.
class SeparationProblem {
 public:
  SeparationProblem(const GrayImage& joint, const MaskSet& masks, double k,
                    const SeparatorConfig& cfg, const LayerSet& init)
      : joint_(joint), masks_(masks), k_(k), cfg_(cfg) {
    const Shape shape = joint.shape();
    const BinaryMask shared = masks.multi_coverage_mask();
    const BinaryMask inter = masks.intersection_mask();
    union_count_ = static_cast<double>(masks.union_mask().count());
    cap_count_ = static_cast<double>(inter.count());

    for (const auto& l : init.layers()) fields_.push_back(l.field());
    var_of_.assign(masks.size(), std::vector<int>(shape.area(), -1));

    for (std::size_t p = 0; p < shape.area(); ++p) {
      if (!shared[p]) continue;
      FreePixel fp;
      fp.pixel = p;
      fp.in_cap = inter[p];
      fp.first_var = static_cast<int>(var_layer_.size());
      for (std::size_t i = 0; i < masks.size(); ++i) {
        if (!masks[i][p]) continue;
        var_of_[i][p] = static_cast<int>(var_layer_.size());
        var_layer_.push_back(i);
        var_pixel_.push_back(p);
      }
      fp.count = static_cast<int>(var_layer_.size()) - fp.first_var;
      free_.push_back(fp);
    }

    // TV terms that can change are those touching a free pixel of the layer.
    tv_active_.resize(masks.size());
    tv_constant_.assign(masks.size(), 0.0);
    mask_count_.assign(masks.size(), 0.0);
    for (std::size_t i = 0; i < masks.size(); ++i) {
      const auto& m = masks[i];
      mask_count_[i] = static_cast<double>(m.count());
      for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
          if (!m(x, y)) continue;
          const std::size_t p = joint.field().index(x, y);
          const bool touches = var_of_[i][p] >= 0 ||
                               (x + 1 < shape.width && var_of_[i][p + 1] >= 0) ||
                               (y + 1 < shape.height && var_of_[i][p + shape.width] >= 0);
          if (touches) {
            tv_active_[i].push_back(p);
          } else {
            tv_constant_[i] += tv_term(fields_[i], m, x, y);
          }
        }
      }
    }
  }

  std::size_t size() const noexcept { return var_layer_.size(); }

  std::vector<double> variables() const {
    std::vector<double> x(size());
    for (std::size_t v = 0; v < x.size(); ++v) x[v] = fields_[var_layer_[v]][var_pixel_[v]];
    return x;
  }

  /// Energy at x; fills `grad` when non-null.
  double evaluate(const std::vector<double>& x, std::vector<double>* grad) {
    load(x);
    if (grad != nullptr) grad->assign(x.size(), 0.0);

    // Data terms: residuals vanish off the free set by construction.
    residual_.resize(free_.size());
    double sum_all = 0.0;
    double sum_cap = 0.0;
    std::array<double, 8> vals{};
    std::array<double, 8> partials{};
    slope_.resize(size());
    for (std::size_t f = 0; f < free_.size(); ++f) {
      const FreePixel& fp = free_[f];
      const std::size_t m = static_cast<std::size_t>(fp.count);
      for (std::size_t j = 0; j < m; ++j) vals[j] = x[fp.first_var + j];
      double d_k = 0.0;
      const double raw = detail::compose_pixel_gradient(
          std::span<const double>(vals.data(), m), k_, std::span<double>(partials.data(), m), d_k);
      const bool saturated = raw < 0.0 || raw > 1.0;
      const double r = std::clamp(raw, 0.0, 1.0);
      const double e = r - joint_[fp.pixel];
      residual_[f] = e;
      for (std::size_t j = 0; j < m; ++j) slope_[fp.first_var + j] = saturated ? 0.0 : partials[j];
      sum_all += e * e;
      if (fp.in_cap) sum_cap += e * e;
    }
    const double rmse_all = union_count_ > 0 ? std::sqrt(sum_all / union_count_) : 0.0;
    const double rmse_cap = cap_count_ > 0 ? std::sqrt(sum_cap / cap_count_) : 0.0;
    double energy = cfg_.w_rec * rmse_all + cfg_.w_cap * rmse_cap;

    if (grad != nullptr) {
      const double c_all = rmse_all > 0.0 ? cfg_.w_rec / (union_count_ * rmse_all) : 0.0;
      const double c_cap = rmse_cap > 0.0 ? cfg_.w_cap / (cap_count_ * rmse_cap) : 0.0;
      for (std::size_t f = 0; f < free_.size(); ++f) {
        const FreePixel& fp = free_[f];
        const double c = (c_all + (fp.in_cap ? c_cap : 0.0)) * residual_[f];
        for (int j = 0; j < fp.count; ++j) (*grad)[fp.first_var + j] += c * slope_[fp.first_var + j];
      }
    }

    if (cfg_.w_tv > 0.0) energy += tv(grad);
    return energy;
  }

  LayerSet layers(const std::vector<double>& x) {
    load(x);
    std::vector<GrayImage> out;
    for (const auto& f : fields_) out.emplace_back(f);
    return LayerSet(std::move(out), masks_);
  }

 private:
  struct FreePixel {
    std::size_t pixel = 0;
    bool in_cap = false;
    int first_var = 0;
    int count = 0;
  };

  void load(const std::vector<double>& x) {
    for (std::size_t v = 0; v < x.size(); ++v) fields_[var_layer_[v]][var_pixel_[v]] = x[v];
  }

  double tv(std::vector<double>* grad) const {
    const Shape shape = joint_.shape();
    const auto width = static_cast<std::size_t>(shape.width);
    double total = 0.0;
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      const ScalarField& f = fields_[i];
      const BinaryMask& m = masks_[i];
      const std::vector<int>& var = var_of_[i];
      const double scale = cfg_.w_tv / mask_count_[i];
      double sum = tv_constant_[i];
      for (std::size_t p : tv_active_[i]) {
        const int x = static_cast<int>(p % width);
        const int y = static_cast<int>(p / width);
        const bool right = x + 1 < shape.width && m[p + 1];
        const bool down = y + 1 < shape.height && m[p + width];
        const double dx = right ? f[p + 1] - f[p] : 0.0;
        const double dy = down ? f[p + width] - f[p] : 0.0;
        const double t = std::sqrt(dx * dx + dy * dy + kTvEpsilon * kTvEpsilon);
        sum += t;
        if (grad == nullptr) continue;
        if (var[p] >= 0) (*grad)[var[p]] -= scale * (dx + dy) / t;
        if (right && var[p + 1] >= 0) (*grad)[var[p + 1]] += scale * dx / t;
        if (down && var[p + width] >= 0) (*grad)[var[p + width]] += scale * dy / t;
      }
      total += scale * sum;
    }
    return total;
  }

  const GrayImage& joint_;
  const MaskSet& masks_;
  double k_;
  const SeparatorConfig& cfg_;

  double union_count_ = 0.0;
  double cap_count_ = 0.0;
  std::vector<ScalarField> fields_;
  std::vector<std::vector<int>> var_of_;
  std::vector<std::size_t> var_layer_;
  std::vector<std::size_t> var_pixel_;
  std::vector<FreePixel> free_;
  std::vector<std::vector<std::size_t>> tv_active_;
  std::vector<double> tv_constant_;
  std::vector<double> mask_count_;

  std::vector<double> residual_;
  std::vector<double> slope_;
};

}  // namespace

double separation_energy(const LayerSet& layers, const GrayImage& joint,
                         const CorrectionParameter& k, const SeparatorConfig& cfg) {
  require_same_shape(layers.shape(), joint.shape(), "separation_energy");
  const MaskSet& masks = layers.masks();
  const ReconstructionOutput rec = reconstruct(layers, k);
  const BinaryMask inter = masks.intersection_mask();
  double e = cfg.w_rec * rmse_loss(rec.image, joint, masks.union_mask()) +
             cfg.w_cap * rmse_loss(rec.overlap, apply_mask(joint, inter), inter);
  double tv = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) tv += total_variation(layers[i], masks[i]);
  return e + cfg.w_tv * tv;
}

SeparationResult separate(const GrayImage& joint, const MaskSet& masks,
                          const CorrectionParameter& k, const SeparatorConfig& cfg) {
  cfg.validate();
  require_same_shape(joint.shape(), masks.shape(), "separate");
  const LayerSet init = initialize_layers(joint, masks, k, cfg.init_solver);
  SeparationProblem problem(joint, masks, k.value(), cfg, init);

  SeparationResult result;
  result.free_variables = problem.size();
  std::vector<double> x = problem.variables();
  std::vector<double> grad;
  double energy = problem.evaluate(x, &grad);
  result.energy_trace.push_back(energy);

  if (problem.size() == 0) {
    result.converged = true;
    result.layers = init;
    result.reconstruction = reconstruct(init, k);
    return result;
  }

  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-20;
  double step = cfg.step_size;
  std::vector<double> trial(x.size());
  while (result.iterations < cfg.max_iterations) {
    if (energy == 0.0) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    double trial_energy = energy;
    while (step >= kMinStep) {
      double decrease = 0.0;
      for (std::size_t v = 0; v < x.size(); ++v) {
        trial[v] = std::clamp(x[v] - step * grad[v], 0.0, 1.0);
        decrease += grad[v] * (x[v] - trial[v]);
      }
      if (decrease <= 0.0) break;  // projected gradient vanished
      trial_energy = problem.evaluate(trial, nullptr);
      if (trial_energy <= energy - kArmijo * decrease && trial_energy < energy) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent direction left at working precision: stationary point.
      result.converged = true;
      break;
    }
    x.swap(trial);
    energy = problem.evaluate(x, &grad);
    result.energy_trace.push_back(energy);
    ++result.iterations;
    step *= 2.0;

    const auto n = result.energy_trace.size();
    const auto window = static_cast<std::size_t>(cfg.decrease_window);
    if (n > window) {
      const double before = result.energy_trace[n - 1 - window];
      if (before - energy < cfg.relative_decrease * before) {
        result.converged = true;
        break;
      }
    }
  }

  result.layers = problem.layers(x);
  result.reconstruction = reconstruct(result.layers, k);
  return result;
}

}  // namespace bonelayer
