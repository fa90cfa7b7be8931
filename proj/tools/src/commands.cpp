#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bonelayer/error.hpp"
#include "bonelayer/metrics.hpp"
#include "bonelayer/parallel.hpp"
#include "bonelayer/raster_io.hpp"
#include "bonelayer/reconstructor.hpp"
#include "bonelayer/registration.hpp"
#include "bonelayer/sample_io.hpp"
#include "bonelayer/separator.hpp"
#include "bonelayer/synthesizer.hpp"
#include "bonelayer/version.hpp"
#include "cli.hpp"
#include "config.hpp"
#include "manifest.hpp"
#include "trial_io.hpp"

namespace bonelayer::cli {

namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------------ helpers

struct JointInput {
  GrayImage image;
  MaskSet masks;
  std::vector<fs::path> paths;
};

struct InputFlags {
  std::optional<fs::path> image;
  std::vector<fs::path> masks;
  std::optional<fs::path> sample;

  void attach(CLI::App* app) {
    auto* img = app->add_option("--image", image, "joint image PNG");
    auto* msk = app->add_option("--masks", masks, "bone mask PNGs, upper first")->expected(2, -1);
    auto* smp = app->add_option("--sample", sample, "sample directory (image.png, mask_*.png)");
    smp->excludes(img)->excludes(msk);
  }

  JointInput load() const {
    JointInput in;
    if (sample) {
      StoredSample s = read_sample(*sample);
      in.image = std::move(s.image);
      in.masks = std::move(s.masks);
      in.paths.push_back(*sample);
      return in;
    }
    if (!image || masks.size() < 2) {
      throw InvalidInput("provide --sample DIR, or --image and at least two --masks");
    }
    in.image = load_raster(*image);
    in.paths.push_back(*image);
    std::vector<BinaryMask> ms;
    for (const auto& p : masks) {
      ms.push_back(load_mask(p));
      in.paths.push_back(p);
      if (ms.back().shape() != in.image.shape()) {
        throw IoError(p.string(), "mask size " + to_string(ms.back().shape()) +
                                      " differs from image size " + to_string(in.image.shape()));
      }
    }
    in.masks = MaskSet(std::move(ms));
    return in;
  }
};

Json k_json(const CorrectionParameter& k) {
  return {{"value", k.value()},
          {"provenance", k.provenance() == Provenance::kEstimated ? "estimated" : "supplied"},
          {"clamped", k.clamped()},
          {"no_overlap_fallback", k.no_overlap_fallback()}};
}

/// JSON numbers cannot hold infinities; +inf is written as the string "inf".
Json finite_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? Json("inf") : Json("-inf");
  return Json(v);
}

void record_sample_outputs(Manifest& m, const fs::path& dir, std::size_t bones) {
  m.add_output(dir / "image.png");
  for (std::size_t i = 0; i < bones; ++i) {
    m.add_output(dir / ("mask_" + bone_name(i) + ".png"));
    m.add_output(dir / ("gt_" + bone_name(i) + ".png"));
  }
  m.add_output(dir / "meta.json");
}

// ------------------------------------------------------------------ phantom

struct PhantomCmd {
  std::optional<fs::path> config;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> side;
  std::optional<double> texture_amplitude;

  void attach(CLI::App& app) {
    auto* c = app.add_subcommand("phantom", "Generate a two-bone phantom with exact ground truth");
    c->add_option("--config", config, "phantom spec JSON")->check(CLI::ExistingFile);
    c->add_option("--out-dir", out_dir, "output sample directory")->required();
    c->add_option("--seed", seed, "RNG seed (falls back to BONELAYER_SEED)");
    c->add_option("--side", side, "image side in pixels");
    c->add_option("--texture-amplitude", texture_amplitude, "bone texture amplitude");
    c->callback([this] { run(); });
  }

  void run() {
    Json file = read_config(config);
    const std::uint64_t s = resolve_seed(seed, file);
    if (side) file["side"] = *side;
    if (texture_amplitude) file["texture_amplitude"] = *texture_amplitude;
    file["seed"] = s;
    const PhantomSpec spec = phantom_from_json(file);

    Manifest m("phantom");
    m.set_seed(s);
    m.set_config(to_json(spec));
    if (config) m.add_input(*config);

    const Phantom ph = make_phantom(spec);
    write_sample(out_dir, to_sample(ph, s));
    record_sample_outputs(m, out_dir, ph.masks.size());
    m.set_result({{"k", ph.k.value()}, {"saturated_count", ph.saturated_count}});
    m.write(out_dir);
  }
};

// --------------------------------------------------------------- synthesize

struct SynthesizeCmd {
  InputFlags input;
  std::optional<fs::path> config;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> shift_min;
  std::optional<int> shift_max;
  bool allow_no_overlap = false;
  std::size_t count = 1;
  unsigned jobs = default_jobs();

  void attach(CLI::App& app) {
    auto* c = app.add_subcommand("synthesize", "Shift the bones of a non-overlap image into overlap");
    input.attach(c);
    c->add_option("--config", config, "overlap spec JSON")->check(CLI::ExistingFile);
    c->add_option("--out-dir", out_dir, "output directory")->required();
    c->add_option("--seed", seed, "RNG seed (falls back to BONELAYER_SEED)");
    c->add_option("--shift-min", shift_min, "smallest shift magnitude, pixels");
    c->add_option("--shift-max", shift_max, "largest shift magnitude, pixels");
    c->add_flag("--allow-no-overlap", allow_no_overlap, "accept samples without overlap");
    c->add_option("--count", count, "number of samples; sample i uses seed + i")
        ->check(CLI::PositiveNumber);
    c->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    c->callback([this] { run(); });
  }

  void run() {
    Json file = read_config(config);
    const std::uint64_t s = resolve_seed(seed, file);
    if (shift_min) file["shift_min"] = *shift_min;
    if (shift_max) file["shift_max"] = *shift_max;
    if (allow_no_overlap) file["require_overlap"] = false;
    file["seed"] = s;
    const OverlapSpec spec = overlap_from_json(file);
    const JointInput in = input.load();
    spec.validate(in.image.width());

    Manifest m("synthesize");
    m.set_seed(s);
    Json snapshot = to_json(spec);
    snapshot["count"] = count;
    m.set_config(snapshot);
    for (const auto& p : in.paths) m.add_input(p);
    if (config) m.add_input(*config);

    auto dir_for = [&](std::size_t i) {
      if (count == 1) return out_dir;
      char name[32];
      std::snprintf(name, sizeof name, "sample_%04zu", i);
      return out_dir / name;
    };
    std::vector<SyntheticSample> samples(count);
    parallel_for(count, jobs, [&](std::size_t i) {
      OverlapSpec si = spec;
      si.seed = s + i;
      samples[i] = synthesize_overlap(in.image, in.masks, si);
      write_sample(dir_for(i), samples[i]);
    });

    Json rows = Json::array();
    for (std::size_t i = 0; i < count; ++i) {
      record_sample_outputs(m, dir_for(i), samples[i].masks.size());
      rows.push_back({{"seed", samples[i].seed},
                      {"overlap_area", samples[i].overlap_area},
                      {"k_used", samples[i].k_used.value()},
                      {"attempts", samples[i].attempts}});
    }
    m.set_result({{"samples", rows}});
    m.write(out_dir);
  }
};

// --------------------------------------------------------------- estimate-k

struct EstimateKCmd {
  InputFlags input;
  std::optional<fs::path> out_dir;
  std::ostream* out = nullptr;

  void attach(CLI::App& app, std::ostream& o) {
    out = &o;
    auto* c = app.add_subcommand("estimate-k", "Estimate the soft-tissue correction parameter");
    input.attach(c);
    c->add_option("--out-dir", out_dir, "also write k.json and a manifest here");
    c->callback([this] { run(); });
  }

  void run() {
    const JointInput in = input.load();
    const SolverConfig solver;
    const CorrectionParameter k = estimate_k(in.image, in.masks, solver);
    Json j;
    j["schema_version"] = 1;
    j["k"] = k_json(k);
    j["overlap_area"] = in.masks.multi_coverage_mask().count();
    const std::string text = j.dump(2) + "\n";
    *out << text;
    if (out_dir) {
      write_text(*out_dir / "k.json", text);
      Manifest m("estimate-k");
      m.set_config({{"solver", to_json(solver)}});
      for (const auto& p : in.paths) m.add_input(p);
      m.add_output(*out_dir / "k.json");
      m.set_result({{"k", k.value()}});
      m.write(*out_dir);
    }
  }
};

// ----------------------------------------------------------------- separate

struct SeparateCmd {
  InputFlags input;
  std::optional<double> k;
  std::optional<fs::path> config;
  fs::path out_dir;
  std::optional<int> max_iterations;
  std::optional<double> w_tv;
  int* exit_code = nullptr;

  void attach(CLI::App& app, int& code) {
    exit_code = &code;
    auto* c = app.add_subcommand("separate", "Recover per-bone layer images from a joint image");
    input.attach(c);
    c->add_option("--k", k, "correction parameter; estimated from the image when omitted");
    c->add_option("--config", config, "separator config JSON")->check(CLI::ExistingFile);
    c->add_option("--out-dir", out_dir, "output directory")->required();
    c->add_option("--max-iterations", max_iterations, "gradient iterations");
    c->add_option("--w-tv", w_tv, "total-variation weight");
    c->callback([this] { run(); });
  }

  void run() {
    Json file = read_config(config);
    if (max_iterations) file["max_iterations"] = *max_iterations;
    if (w_tv) file["w_tv"] = *w_tv;
    const SeparatorConfig cfg = separator_from_json(file);
    const JointInput in = input.load();
    const CorrectionParameter kp = k ? CorrectionParameter::supplied(*k)
                                     : estimate_k(in.image, in.masks, cfg.init_solver);

    Manifest m("separate");
    Json snapshot = to_json(cfg);
    snapshot["k"] = k ? Json(*k) : Json(nullptr);
    m.set_config(snapshot);
    for (const auto& p : in.paths) m.add_input(p);
    if (config) m.add_input(*config);

    const SeparationResult r = separate(in.image, in.masks, kp, cfg);
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
      const fs::path p = out_dir / ("layer_" + bone_name(i) + ".png");
      save_raster(r.layers[i], p);
      m.add_output(p);
    }
    save_raster(r.reconstruction.image, out_dir / "reconstruction.png");
    m.add_output(out_dir / "reconstruction.png");

    const BinaryMask uni = in.masks.union_mask();
    const BinaryMask overlap = in.masks.multi_coverage_mask();
    double worst = 0.0;
    for (std::size_t p = 0; p < overlap.size(); ++p) {
      const double rv = r.reconstruction.image[p];
      if (!overlap[p] || rv <= 0.0) continue;
      worst = std::max(worst, std::abs(rv - in.image[p]));
    }
    Json d;
    d["schema_version"] = 1;
    d["k"] = k_json(kp);
    d["converged"] = r.converged;
    d["iterations"] = r.iterations;
    d["free_variables"] = r.free_variables;
    d["overlap_area"] = overlap.count();
    d["saturated_count"] = r.reconstruction.saturated_count;
    d["reconstruction_mse_union"] = mse(r.reconstruction.image, in.image, uni);
    d["overlap_residual_max"] = worst;
    d["energy_initial"] = r.energy_trace.front();
    d["energy_final"] = r.energy_trace.back();
    d["energy_trace"] = r.energy_trace;
    write_text(out_dir / "diagnostics.json", d.dump(2) + "\n");
    m.add_output(out_dir / "diagnostics.json");
    m.set_result({{"converged", r.converged}, {"iterations", r.iterations}});
    m.write(out_dir);
    if (!r.converged) *exit_code = kExitNotConverged;
  }
};

// -------------------------------------------------------------- reconstruct

struct ReconstructCmd {
  std::vector<fs::path> layers;
  std::vector<fs::path> masks;
  double k = 1.0;
  fs::path out_dir;

  void attach(CLI::App& app) {
    auto* c = app.add_subcommand("reconstruct", "Compose layer images into a joint image");
    c->add_option("--layers", layers, "layer PNGs")->expected(2, -1)->required();
    c->add_option("--masks", masks, "bone mask PNGs, one per layer")->expected(2, -1)->required();
    c->add_option("--k", k, "correction parameter")->required();
    c->add_option("--out-dir", out_dir, "output directory")->required();
    c->callback([this] { run(); });
  }

  void run() {
    if (layers.size() != masks.size()) {
      throw InvalidInput("--layers and --masks must have the same count");
    }
    const CorrectionParameter kp = CorrectionParameter::supplied(k);
    Manifest m("reconstruct");
    m.set_config({{"k", k}});
    std::vector<GrayImage> ls;
    std::vector<BinaryMask> ms;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      ls.push_back(load_raster(layers[i]));
      ms.push_back(load_mask(masks[i]));
      m.add_input(layers[i]);
      m.add_input(masks[i]);
    }
    const LayerSet set(std::move(ls), MaskSet(std::move(ms)));
    const ReconstructionOutput r = reconstruct(set, kp);
    fs::create_directories(out_dir);
    save_raster(r.image, out_dir / "reconstruction.png");
    m.add_output(out_dir / "reconstruction.png");
    m.set_result({{"saturated_count", r.saturated_count}});
    m.write(out_dir);
  }
};

// ------------------------------------------------------------------ metrics

struct MetricsCmd {
  fs::path a;
  fs::path b;
  std::optional<fs::path> mask;
  std::optional<fs::path> out_dir;
  std::ostream* out = nullptr;

  void attach(CLI::App& app, std::ostream& o) {
    out = &o;
    auto* c = app.add_subcommand("metrics", "MSE, SSIM and PSNR between two images");
    c->add_option("a", a, "first image")->required();
    c->add_option("b", b, "second image")->required();
    c->add_option("--mask", mask, "restrict the metrics to this mask");
    c->add_option("--out-dir", out_dir, "also write metrics.json and a manifest here");
    c->callback([this] { run(); });
  }

  void run() {
    const GrayImage x = load_raster(a);
    const GrayImage y = load_raster(b);
    if (x.shape() != y.shape()) {
      throw IoError(b.string(), "size " + to_string(y.shape()) + " differs from " + a.string() +
                                    " size " + to_string(x.shape()));
    }
    double e = 0.0;
    double s = 0.0;
    if (mask) {
      const BinaryMask m = load_mask(*mask);
      require_same_shape(m.shape(), x.shape(), "metrics mask");
      e = bonelayer::mse(x, y, m);
      s = ssim(x, y, m);
    } else {
      e = bonelayer::mse(x, y);
      s = ssim(x, y);
    }
    Json j;
    j["mse"] = e;
    j["ssim"] = s;
    j["psnr"] = finite_or_inf(psnr_from_mse(e));
    const std::string text = j.dump(2) + "\n";
    *out << text;
    if (out_dir) {
      write_text(*out_dir / "metrics.json", text);
      Manifest m("metrics");
      m.set_config({{"masked", mask.has_value()}});
      m.add_input(a);
      m.add_input(b);
      if (mask) m.add_input(*mask);
      m.add_output(*out_dir / "metrics.json");
      m.write(*out_dir);
    }
  }
};

// ------------------------------------------------------------------ regeval

struct RegevalCmd {
  std::optional<fs::path> trials_dir;
  std::optional<std::size_t> generate;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> config;
  fs::path out;
  std::optional<fs::path> csv;
  std::optional<fs::path> save_trials;
  bool no_separation = false;
  unsigned jobs = default_jobs();

  void attach(CLI::App& app) {
    auto* c = app.add_subcommand("regeval", "Compare registration with and without separation");
    auto* t = c->add_option("--trials", trials_dir, "directory of trial subdirectories");
    auto* g = c->add_option("--generate", generate, "generate this many seeded trials")
                  ->check(CLI::PositiveNumber);
    t->excludes(g);
    c->add_option("--seed", seed, "base seed; trial i uses seed + i");
    c->add_option("--config", config, "regeval config JSON")->check(CLI::ExistingFile);
    c->add_option("--out", out, "report JSON path")->required();
    c->add_option("--csv", csv, "also write a CSV table");
    c->add_option("--save-trials", save_trials, "write generated trials here")->needs(g);
    c->add_flag("--no-separation", no_separation, "run only the whole-image pipeline");
    c->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    c->callback([this] { run(); });
  }

  void run() {
    if (!trials_dir && !generate) throw InvalidInput("provide --trials DIR or --generate N");
    const Json file = read_config(config);
    const std::uint64_t s = resolve_seed(seed, file);
    TrialSpec spec;
    EvalConfig cfg;
    cfg.jobs = jobs;
    for (const auto& item : file.items()) {
      const std::string& key = item.key();
      if (key == "trial") {
        spec = trial_from_json(item.value());
      } else if (key == "separator") {
        cfg.separator = separator_from_json(item.value());
      } else if (key == "solver") {
        cfg.solver = solver_from_json(item.value());
      } else if (key == "with_separation") {
        if (!item.value().is_boolean()) throw InvalidInput("regeval: \"with_separation\" must be a boolean");
        cfg.with_separation = item.value().get<bool>();
      } else if (key != "seed") {
        throw InvalidInput("regeval: unknown key \"" + key + "\"");
      }
    }
    if (no_separation) cfg.with_separation = false;

    Manifest m("regeval");
    Json snapshot;
    snapshot["with_separation"] = cfg.with_separation;
    snapshot["separator"] = to_json(cfg.separator);
    snapshot["solver"] = to_json(cfg.solver);

    PipelineReport report;
    if (generate) {
      m.set_seed(s);
      snapshot["generate"] = *generate;
      snapshot["trial"] = to_json(spec);
      if (save_trials) {
        std::vector<RegistrationTrial> trials(*generate);
        parallel_for(*generate, jobs, [&](std::size_t i) { trials[i] = generate_trial(s + i, spec); });
        for (std::size_t i = 0; i < trials.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof name, "trial_%04zu", i);
          write_trial(*save_trials / name, trials[i]);
          m.add_output(*save_trials / name);
        }
      }
      report = evaluate_generated(*generate, s, spec, cfg);
    } else {
      m.add_input(*trials_dir);
      const std::vector<RegistrationTrial> trials = read_trials(*trials_dir);
      report = evaluate_pipeline(trials, cfg);
    }
    m.set_config(snapshot);

    write_text(out, report_json(report));
    m.add_output(out);
    if (csv) {
      write_text(*csv, report_csv(report));
      m.add_output(*csv);
    }
    const auto& sm = report.summary;
    m.set_result({{"trials", sm.trials},
                  {"excluded", sm.excluded},
                  {"mean_mse_without", sm.mean_mse_without},
                  {"mean_mse_with", sm.mean_mse_with},
                  {"sign_test_p", sm.sign_test_p}});
    m.write(out.has_parent_path() ? out.parent_path() : fs::path("."));
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bone layer separation toolkit", "bonelayer"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  int exit_code = kExitOk;
  PhantomCmd phantom;
  SynthesizeCmd synthesize;
  EstimateKCmd estimate;
  SeparateCmd separate_cmd;
  ReconstructCmd reconstruct_cmd;
  MetricsCmd metrics;
  RegevalCmd regeval;
  phantom.attach(app);
  synthesize.attach(app);
  estimate.attach(app, out);
  separate_cmd.attach(app, exit_code);
  reconstruct_cmd.attach(app);
  metrics.attach(app, out);
  regeval.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInvalid;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << " (residual " << e.residual() << " after " << e.iterations()
        << " iterations)\n";
    return kExitNotConverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return exit_code;
}

}  // namespace bonelayer::cli
