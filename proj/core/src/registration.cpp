#include "bonelayer/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bonelayer/metrics.hpp"
#include "bonelayer/parallel.hpp"

namespace bonelayer {

GrayImage translate(const GrayImage& img, Offset d, double fill) {
  ScalarField out(img.shape(), fill);
  const Shape s = img.shape();
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (s.contains(x - d.dx, y - d.dy)) out(x, y) = img(x - d.dx, y - d.dy);
    }
  }
  return GrayImage(std::move(out));
}

RegistrationResult register_translation(const GrayImage& moving, const GrayImage& fixed,
                                        const BinaryMask& support, int radius) {
  require_same_shape(moving.shape(), fixed.shape(), "register_translation");
  require_same_shape(fixed.shape(), support.shape(), "register_translation");
  if (radius < 0) throw InvalidInput("search radius must be >= 0");

  struct Sample {
    int x, y;
    double value;
  };
  std::vector<Sample> samples;
  for (int y = 0; y < fixed.height(); ++y) {
    for (int x = 0; x < fixed.width(); ++x) {
      if (support(x, y)) samples.push_back({x, y, fixed(x, y)});
    }
  }
  if (samples.empty()) throw InvalidInput("register_translation: empty support");
  const std::size_t min_count = (samples.size() + 1) / 2;
  const Shape shape = fixed.shape();

  RegistrationResult best;
  best.mse = std::numeric_limits<double>::infinity();
  long best_norm = std::numeric_limits<long>::max();
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const Sample& s : samples) {
        const int mx = s.x - dx;
        const int my = s.y - dy;
        if (!shape.contains(mx, my)) continue;
        const double diff = moving(mx, my) - s.value;
        sum += diff * diff;
        ++n;
      }
      if (n < min_count) continue;
      const double value = sum / static_cast<double>(n);
      const long norm = static_cast<long>(dx) * dx + static_cast<long>(dy) * dy;
      // Scan order is lexicographic in (dy, dx), so an equal (mse, norm)
      // pair found later never wins.
      if (value < best.mse || (value == best.mse && norm < best_norm)) {
        best.mse = value;
        best.displacement = Offset{dx, dy};
        best.compared_pixels = n;
        best_norm = norm;
      }
    }
  }
  if (!std::isfinite(best.mse)) {
    throw InvalidInput("register_translation: no displacement compares enough pixels");
  }
  return best;
}

// ------------------------------------------------------------------- trials

void TrialSpec::validate() const {
  if (side < 64) throw InvalidInput("trial side must be at least 64");
  if (shift_max < 0 || lateral_max < 0) throw InvalidInput("shift ranges must be >= 0");
  if (search_radius < 0) throw InvalidInput("search radius must be >= 0");
  if (noise_sigma < 0.0) throw InvalidInput("noise sigma must be >= 0");
  solver.validate();
}

namespace {

GrayImage add_noise(const GrayImage& img, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return img;
  std::normal_distribution<double> normal(0.0, sigma);
  ScalarField f = img.field();
  for (double& v : f.values()) v += normal(rng);
  return GrayImage::clamped(std::move(f));
}

Offset operator+(Offset a, Offset b) { return Offset{a.dx + b.dx, a.dy + b.dy}; }
Offset operator-(Offset a, Offset b) { return Offset{a.dx - b.dx, a.dy - b.dy}; }

double norm(Offset o) { return std::hypot(static_cast<double>(o.dx), static_cast<double>(o.dy)); }

}  // namespace

RegistrationTrial make_trial(const GrayImage& base, const MaskSet& base_masks,
                             std::span<const Offset> fixed_shifts,
                             std::span<const Offset> moving_shifts, int search_radius,
                             const SolverConfig& solver) {
  const BoneShifter shifter(base, base_masks, solver);
  auto fixed = shifter.compose(fixed_shifts);
  auto moving = shifter.compose(moving_shifts);
  if (!fixed || !moving) throw InvalidInput("trial shifts move a bone out of frame");
  RegistrationTrial t;
  t.fixed = fixed->image;
  t.fixed_masks = fixed->masks;
  t.moving = moving->image;
  t.moving_masks = moving->masks;
  t.search_radius = search_radius;
  for (std::size_t i = 0; i < fixed_shifts.size(); ++i) {
    t.truth.push_back(fixed_shifts[i] - moving_shifts[i]);
  }
  return t;
}

RegistrationTrial generate_trial(std::uint64_t seed, const TrialSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  PhantomSpec ps = PhantomSpec::with_side(spec.side);
  const double s = spec.side / 256.0;
  ps.seed = rng();
  for (auto& bone : ps.bones) {
    bone.cx += 6.0 * s * unit(rng);
    bone.radius = (29.0 + 2.0 * unit(rng)) * s;
    bone.angle = std::numbers::pi / 2 + 0.1 * unit(rng);
  }
  const Phantom phantom = make_phantom(ps);
  const BoneShifter shifter(phantom.image, phantom.masks, spec.solver);

  std::uniform_int_distribution<int> along(0, spec.shift_max);
  std::uniform_int_distribution<int> across(-spec.lateral_max, spec.lateral_max);
  auto draw = [&] {
    std::vector<Offset> v;
    for (std::size_t i = 0; i < phantom.masks.size(); ++i) {
      v.push_back(shifter.along_axis(i, along(rng)) + Offset{across(rng), 0});
    }
    return v;
  };

  constexpr int kMaxDraws = 200;
  for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
    const std::vector<Offset> a = draw();
    const std::vector<Offset> b = draw();
    bool ok = true;
    std::vector<Offset> truth;
    for (std::size_t i = 0; i < a.size(); ++i) {
      truth.push_back(a[i] - b[i]);
      if (norm(truth.back()) > spec.search_radius) ok = false;
    }
    if (spec.require_unequal && truth[0] == truth[1]) ok = false;
    if (!ok) continue;
    auto fixed = shifter.compose(a);
    if (!fixed || (spec.require_overlap && fixed->overlap_area == 0)) continue;
    auto moving = shifter.compose(b);
    if (!moving) continue;

    RegistrationTrial t;
    t.fixed = add_noise(fixed->image, spec.noise_sigma, rng);
    t.fixed_masks = fixed->masks;
    t.moving = add_noise(moving->image, spec.noise_sigma, rng);
    t.moving_masks = moving->masks;
    t.truth = std::move(truth);
    t.search_radius = spec.search_radius;
    t.seed = seed;
    return t;
  }
  throw InvalidInput("could not draw a valid registration trial for seed " + std::to_string(seed));
}

// --------------------------------------------------------------- evaluation

TrialOutcome evaluate_trial(const RegistrationTrial& trial, const EvalConfig& cfg) {
  TrialOutcome out;
  out.seed = trial.seed;
  out.truth = trial.truth;
  out.fixed_overlap = trial.fixed_masks.intersection_mask().count();
  out.moving_overlap = trial.moving_masks.intersection_mask().count();

  const BinaryMask fixed_union = trial.fixed_masks.union_mask();
  const RegistrationResult whole =
      register_translation(trial.moving, trial.fixed, fixed_union, trial.search_radius);
  out.without_displacement = whole.displacement;
  out.without_mse = whole.mse;
  for (const Offset& t : trial.truth) out.without_errors.push_back(norm(whole.displacement - t));

  if (!cfg.with_separation) return out;
  out.separated = true;

  const CorrectionParameter k_fixed = estimate_k(trial.fixed, trial.fixed_masks, cfg.solver);
  const CorrectionParameter k_moving = estimate_k(trial.moving, trial.moving_masks, cfg.solver);
  const SeparationResult sep_fixed = separate(trial.fixed, trial.fixed_masks, k_fixed, cfg.separator);
  const SeparationResult sep_moving =
      separate(trial.moving, trial.moving_masks, k_moving, cfg.separator);
  out.separation_converged = sep_fixed.converged && sep_moving.converged;
  if (!out.separation_converged) {
    out.excluded = true;
    out.note = "separation did not converge";
    return out;
  }

  std::vector<GrayImage> registered;
  std::vector<BinaryMask> registered_masks;
  for (std::size_t i = 0; i < trial.truth.size(); ++i) {
    const RegistrationResult r = register_translation(
        sep_moving.layers[i], sep_fixed.layers[i], trial.fixed_masks[i], trial.search_radius);
    out.with_displacements.push_back(r.displacement);
    out.with_errors.push_back(norm(r.displacement - trial.truth[i]));
    registered.push_back(translate(sep_moving.layers[i], r.displacement));
    registered_masks.push_back(
        trial.moving_masks[i].shifted(r.displacement.dx, r.displacement.dy));
  }
  // Recompose the registered layers and compare with the fixed joint.
  const LayerSet moved(std::move(registered), MaskSet(std::move(registered_masks)));
  const ReconstructionOutput composite = reconstruct(moved, k_fixed);
  out.with_mse = mse(composite.image, trial.fixed, fixed_union);
  return out;
}

double sign_test_p_value(std::size_t positives, std::size_t negatives) {
  const std::size_t n = positives + negatives;
  if (n == 0) return 1.0;
  const std::size_t tail = std::min(positives, negatives);
  // P(X <= tail), X ~ Binomial(n, 1/2), summed in log space.
  const double log_half_n = -static_cast<double>(n) * std::numbers::ln2;
  double cdf = 0.0;
  for (std::size_t i = 0; i <= tail; ++i) {
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    cdf += std::exp(log_choose + log_half_n);
  }
  return std::min(1.0, 2.0 * cdf);
}

PipelineSummary summarize(std::span<const TrialOutcome> outcomes) {
  PipelineSummary s;
  s.trials = outcomes.size();
  std::vector<double> error_diff;
  std::size_t exact_with = 0;
  std::size_t exact_without = 0;
  for (const auto& o : outcomes) {
    if (o.excluded) {
      ++s.excluded;
      continue;
    }
    const bool all_zero_without =
        std::all_of(o.without_errors.begin(), o.without_errors.end(), [](double e) { return e == 0.0; });
    if (all_zero_without) ++exact_without;
    s.mean_mse_without += o.without_mse;
    if (!o.separated) continue;
    ++s.paired;
    const bool all_zero_with =
        std::all_of(o.with_errors.begin(), o.with_errors.end(), [](double e) { return e == 0.0; });
    if (all_zero_with) ++exact_with;
    s.mean_mse_with += o.with_mse;
    const double d = o.without_mse - o.with_mse;
    s.mean_difference += d;
    if (d > 0.0) {
      ++s.with_better;
    } else if (d < 0.0) {
      ++s.without_better;
    } else {
      ++s.ties;
    }
    double ew = 0.0;
    double eo = 0.0;
    for (std::size_t i = 0; i < o.with_errors.size(); ++i) {
      ew += o.with_errors[i];
      eo += o.without_errors[i];
    }
    error_diff.push_back((eo - ew) / static_cast<double>(o.with_errors.size()));
  }
  const std::size_t used = s.trials - s.excluded;
  if (used > 0) {
    s.mean_mse_without /= static_cast<double>(used);
    s.exact_fraction_without = static_cast<double>(exact_without) / static_cast<double>(used);
  }
  if (s.paired > 0) {
    s.mean_mse_with /= static_cast<double>(s.paired);
    s.mean_difference /= static_cast<double>(s.paired);
    s.exact_fraction_with = static_cast<double>(exact_with) / static_cast<double>(s.paired);
    std::sort(error_diff.begin(), error_diff.end());
    const std::size_t m = error_diff.size();
    s.median_error_difference =
        m % 2 == 1 ? error_diff[m / 2] : 0.5 * (error_diff[m / 2 - 1] + error_diff[m / 2]);
    s.sign_test_p = sign_test_p_value(s.with_better, s.without_better);
  }
  return s;
}

PipelineReport evaluate_pipeline(std::span<const RegistrationTrial> trials, const EvalConfig& cfg) {
  PipelineReport report;
  report.trials.resize(trials.size());
  parallel_for(trials.size(), cfg.jobs, [&](std::size_t i) {
    report.trials[i] = evaluate_trial(trials[i], cfg);
    report.trials[i].index = i;
  });
  report.summary = summarize(report.trials);
  return report;
}

PipelineReport evaluate_generated(std::size_t count, std::uint64_t seed, const TrialSpec& spec,
                                  const EvalConfig& cfg) {
  PipelineReport report;
  report.trials.resize(count);
  parallel_for(count, cfg.jobs, [&](std::size_t i) {
    const RegistrationTrial trial = generate_trial(seed + i, spec);
    report.trials[i] = evaluate_trial(trial, cfg);
    report.trials[i].index = i;
  });
  report.summary = summarize(report.trials);
  return report;
}

// ------------------------------------------------------------------ reports

namespace {

nlohmann::ordered_json offset_json(Offset o) { return {{"dx", o.dx}, {"dy", o.dy}}; }

}  // namespace

std::string report_json(const PipelineReport& report) {
  using nlohmann::ordered_json;
  ordered_json root;
  root["schema_version"] = kReportSchemaVersion;
  ordered_json rows = ordered_json::array();
  for (const auto& t : report.trials) {
    ordered_json row;
    row["index"] = t.index;
    row["seed"] = t.seed;
    ordered_json truth = ordered_json::array();
    for (const auto& o : t.truth) truth.push_back(offset_json(o));
    row["truth"] = truth;
    row["fixed_overlap"] = t.fixed_overlap;
    row["moving_overlap"] = t.moving_overlap;
    row["without"] = {{"displacement", offset_json(t.without_displacement)},
                      {"errors", t.without_errors},
                      {"mse", t.without_mse}};
    if (t.separated) {
      ordered_json disp = ordered_json::array();
      for (const auto& o : t.with_displacements) disp.push_back(offset_json(o));
      row["with"] = {{"converged", t.separation_converged},
                     {"displacements", disp},
                     {"errors", t.with_errors},
                     {"mse", t.with_mse}};
    }
    row["excluded"] = t.excluded;
    if (!t.note.empty()) row["note"] = t.note;
    rows.push_back(row);
  }
  root["trials"] = rows;
  const auto& s = report.summary;
  root["summary"] = {{"trials", s.trials},
                     {"excluded", s.excluded},
                     {"paired", s.paired},
                     {"mean_mse_without", s.mean_mse_without},
                     {"mean_mse_with", s.mean_mse_with},
                     {"mean_difference", s.mean_difference},
                     {"with_better", s.with_better},
                     {"without_better", s.without_better},
                     {"ties", s.ties},
                     {"sign_test_p", s.sign_test_p},
                     {"exact_fraction_with", s.exact_fraction_with},
                     {"exact_fraction_without", s.exact_fraction_without},
                     {"median_error_difference", s.median_error_difference}};
  return root.dump(2) + "\n";
}

std::string report_csv(const PipelineReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "index,seed,fixed_overlap,moving_overlap,without_dx,without_dy,without_mse,"
         "without_max_error,with_converged,with_mse,with_max_error,excluded\n";
  for (const auto& t : report.trials) {
    const double max_without = t.without_errors.empty()
                                   ? 0.0
                                   : *std::max_element(t.without_errors.begin(), t.without_errors.end());
    out << t.index << ',' << t.seed << ',' << t.fixed_overlap << ',' << t.moving_overlap << ','
        << t.without_displacement.dx << ',' << t.without_displacement.dy << ',' << t.without_mse
        << ',' << max_without << ',';
    if (t.separated && !t.with_errors.empty()) {
      out << (t.separation_converged ? 1 : 0) << ',' << t.with_mse << ','
          << *std::max_element(t.with_errors.begin(), t.with_errors.end());
    } else {
      out << (t.separated && t.separation_converged ? 1 : 0) << ",,";
    }
    out << ',' << (t.excluded ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace bonelayer
