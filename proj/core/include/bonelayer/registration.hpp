#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bonelayer/image.hpp"
#include "bonelayer/separator.hpp"
#include "bonelayer/synthesizer.hpp"

namespace bonelayer {

struct RegistrationResult {
  Offset displacement;
  double mse = 0.0;
  std::size_t compared_pixels = 0;
};

/// out(p) = img(p - d); pixels with no source become `fill`.
GrayImage translate(const GrayImage& img, Offset d, double fill = 0.0);

/// Exhaustive integer search over d in [-radius, radius]^2 minimising
///   mean over p in support, p - d in frame, of (moving(p - d) - fixed(p))^2.
/// A candidate must compare at least half of the support. Ties go to the
/// smaller |d|, then to the lexicographically smaller (dy, dx).
RegistrationResult register_translation(const GrayImage& moving, const GrayImage& fixed,
                                        const BinaryMask& support, int radius);

/// Baseline (fixed) and follow-up (moving) joints built from one base image
/// with independent per-bone shifts. `truth[i]` maps moving bone i onto its
/// fixed position.
struct RegistrationTrial {
  GrayImage fixed;
  MaskSet fixed_masks;
  GrayImage moving;
  MaskSet moving_masks;
  std::vector<Offset> truth;
  int search_radius = 24;
  std::uint64_t seed = 0;
};

struct TrialSpec {
  int side = 256;
  int shift_max = 14;       ///< along-axis shift magnitude range [0, shift_max]
  int lateral_max = 2;      ///< extra shift across the axis, [-lateral_max, lateral_max]
  int search_radius = 24;
  double noise_sigma = 0.0; ///< additive Gaussian noise on both images
  bool require_unequal = true;
  bool require_overlap = true;  ///< the fixed image must contain an overlap
  SolverConfig solver{};

  void validate() const;
};

/// Deterministic in `seed`.
RegistrationTrial generate_trial(std::uint64_t seed, const TrialSpec& spec = {});

/// Builds a trial with explicit per-bone shifts applied to a base image with
/// disjoint masks.
RegistrationTrial make_trial(const GrayImage& base, const MaskSet& base_masks,
                             std::span<const Offset> fixed_shifts,
                             std::span<const Offset> moving_shifts, int search_radius,
                             const SolverConfig& solver = {});

struct TrialOutcome {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::vector<Offset> truth;
  std::size_t fixed_overlap = 0;
  std::size_t moving_overlap = 0;

  Offset without_displacement;
  std::vector<double> without_errors;  ///< per bone, Euclidean pixels
  double without_mse = 0.0;

  bool separated = false;               ///< the with-separation pipeline ran
  bool separation_converged = false;
  std::vector<Offset> with_displacements;
  std::vector<double> with_errors;
  double with_mse = 0.0;

  bool excluded = false;
  std::string note;
};

struct PipelineSummary {
  std::size_t trials = 0;
  std::size_t excluded = 0;
  std::size_t paired = 0;
  double mean_mse_without = 0.0;
  double mean_mse_with = 0.0;
  double mean_difference = 0.0;   ///< without - with, over paired trials
  std::size_t with_better = 0;    ///< without_mse > with_mse
  std::size_t without_better = 0;
  std::size_t ties = 0;
  double sign_test_p = 1.0;       ///< two-sided exact binomial
  double exact_fraction_with = 0.0;     ///< trials with every bone error 0
  double exact_fraction_without = 0.0;
  double median_error_difference = 0.0; ///< median of (mean error without - with)
};

struct PipelineReport {
  std::vector<TrialOutcome> trials;
  PipelineSummary summary;
};

struct EvalConfig {
  bool with_separation = true;
  SeparatorConfig separator{};
  SolverConfig solver{};
  unsigned jobs = 1;
};

TrialOutcome evaluate_trial(const RegistrationTrial& trial, const EvalConfig& cfg);

PipelineReport evaluate_pipeline(std::span<const RegistrationTrial> trials, const EvalConfig& cfg);

/// Generates trial i from seed + i and evaluates it, fanning out over
/// cfg.jobs worker threads. Output order and content do not depend on the
/// number of jobs.
PipelineReport evaluate_generated(std::size_t count, std::uint64_t seed, const TrialSpec& spec,
                                  const EvalConfig& cfg);

PipelineSummary summarize(std::span<const TrialOutcome> outcomes);

/// Two-sided exact sign test p-value.
double sign_test_p_value(std::size_t positives, std::size_t negatives);

inline constexpr int kReportSchemaVersion = 1;
std::string report_json(const PipelineReport& report);
std::string report_csv(const PipelineReport& report);

}  // namespace bonelayer
