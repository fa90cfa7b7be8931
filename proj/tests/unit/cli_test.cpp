#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "bonelayer/raster_io.hpp"
#include "bonelayer/sample_io.hpp"
#include "bonelayer/version.hpp"
#include "cli_runner.hpp"

namespace bonelayer {
namespace {

using testing::run_cli;
using testing::snapshot_dir;
namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv("BONELAYER_SEED");
    ASSERT_EQ(run_cli({"phantom", "--out-dir", (tmp / "phantom").string(), "--side", "128", "--seed", "3"}).code, 0);
  }
  void TearDown() override { ::unsetenv("BONELAYER_SEED"); }

  fs::path phantom() const { return tmp / "phantom"; }

  fs::path overlapped() {
    const fs::path dir = tmp / "overlap";
    if (!fs::exists(dir)) {
      const auto r = run_cli({"synthesize", "--sample", phantom().string(), "--out-dir", dir.string(),
                              "--seed", "5", "--shift-min", "6", "--shift-max", "10"});
      EXPECT_EQ(r.code, 0) << r.err;
    }
    return dir;
  }

  static nlohmann::json read_json(const fs::path& p) {
    const auto bytes = testing::read_bytes(p);
    return nlohmann::json::parse(std::string(bytes.begin(), bytes.end()));
  }

  testing::TempDir tmp{"cli"};
};

TEST_F(Cli, VersionAndHelp) {
  const auto v = run_cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
}

TEST_F(Cli, PhantomWritesASampleAndManifest) {
  for (const char* name : {"image.png", "mask_upper.png", "mask_lower.png", "gt_upper.png", "gt_lower.png", "meta.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(phantom() / name)) << name;
  }
  const auto m = read_json(phantom() / "manifest.json");
  EXPECT_EQ(m.at("command"), "phantom");
  EXPECT_EQ(m.at("seed"), 3);
  EXPECT_EQ(m.at("tool_version"), kVersion);
  EXPECT_EQ(m.at("config").at("side"), 128);
  EXPECT_TRUE(m.at("timing").contains("wall_seconds"));
}

TEST_F(Cli, SeedPrecedence) {
  const fs::path cfg = tmp / "seed.json";
  std::ofstream(cfg) << R"({"seed": 11})";
  ::setenv("BONELAYER_SEED", "22", 1);
  auto seed_of = [&](const std::vector<std::string>& extra) {
    std::vector<std::string> args{"phantom", "--side", "64", "--out-dir", (tmp / "s").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return read_json(tmp / "s" / "manifest.json").at("seed").get<std::uint64_t>();
  };
  EXPECT_EQ(seed_of({"--seed", "33", "--config", cfg.string()}), 33u);
  EXPECT_EQ(seed_of({"--config", cfg.string()}), 11u);
  EXPECT_EQ(seed_of({}), 22u);
  ::unsetenv("BONELAYER_SEED");
  EXPECT_EQ(seed_of({}), 0u);
  ::setenv("BONELAYER_SEED", "not-a-number", 1);
  EXPECT_EQ(run_cli({"phantom", "--side", "64", "--out-dir", (tmp / "s").string()}).code, 1);
}

TEST_F(Cli, MetricsOfAnImageWithItself) {
  const std::string img = (phantom() / "image.png").string();
  const auto r = run_cli({"metrics", img, img});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("mse").get<double>(), 0.0);
  EXPECT_EQ(j.at("ssim").get<double>(), 1.0);
  EXPECT_EQ(j.at("psnr"), "inf");

  const auto masked = run_cli({"metrics", img, (phantom() / "gt_upper.png").string(), "--mask",
                               (phantom() / "mask_upper.png").string(), "--out-dir", (tmp / "m").string()});
  ASSERT_EQ(masked.code, 0) << masked.err;
  const auto mj = nlohmann::json::parse(masked.out);
  EXPECT_EQ(mj.at("mse").get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(tmp / "m" / "metrics.json"));
  EXPECT_TRUE(fs::exists(tmp / "m" / "manifest.json"));
}

TEST_F(Cli, SeparateLeavesANonOverlapImageUntouched) {
  const auto r = run_cli({"separate", "--sample", phantom().string(), "--out-dir", (tmp / "sep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const GrayImage j = load_raster(phantom() / "image.png");
  for (const char* bone : {"upper", "lower"}) {
    const BinaryMask m = load_mask(phantom() / ("mask_" + std::string(bone) + ".png"));
    const fs::path expect = tmp / ("expect_" + std::string(bone) + ".png");
    save_raster(apply_mask(j, m), expect);
    EXPECT_EQ(testing::read_bytes(tmp / "sep" / ("layer_" + std::string(bone) + ".png")), testing::read_bytes(expect));
  }
  const auto d = read_json(tmp / "sep" / "diagnostics.json");
  EXPECT_EQ(d.at("converged"), true);
  EXPECT_EQ(d.at("free_variables"), 0);
  EXPECT_EQ(d.at("overlap_area"), 0);
  EXPECT_EQ(d.at("k").at("no_overlap_fallback"), true);
}

TEST_F(Cli, SeparateAnOverlappedSample) {
  const fs::path in = overlapped();
  const auto r = run_cli({"separate", "--sample", in.string(), "--out-dir", (tmp / "sep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto d = read_json(tmp / "sep" / "diagnostics.json");
  EXPECT_EQ(d.at("converged"), true);
  EXPECT_GT(d.at("overlap_area").get<int>(), 0);
  EXPECT_LE(d.at("reconstruction_mse_union").get<double>(), 1e-3);
  EXPECT_LE(d.at("energy_final").get<double>(), d.at("energy_initial").get<double>());
  EXPECT_TRUE(fs::exists(tmp / "sep" / "reconstruction.png"));
}

TEST_F(Cli, NonConvergenceExitsWithTwo) {
  const auto r = run_cli({"separate", "--sample", overlapped().string(), "--out-dir", (tmp / "sep").string(),
                          "--max-iterations", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(read_json(tmp / "sep" / "diagnostics.json").at("converged"), false);
}

TEST_F(Cli, MissingFileNamesThePath) {
  const std::string missing = (tmp / "nope.png").string();
  const auto r = run_cli({"metrics", missing, (phantom() / "image.png").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.png"), std::string::npos);

  const auto s = run_cli({"estimate-k", "--image", (phantom() / "image.png").string(), "--masks",
                          (phantom() / "mask_upper.png").string(), missing});
  EXPECT_EQ(s.code, 1);
  EXPECT_NE(s.err.find("nope.png"), std::string::npos);
}

TEST_F(Cli, MismatchedMaskSizeIsRejected) {
  const fs::path small = tmp / "small_mask.png";
  save_mask(BinaryMask(Shape{10, 10}, true), small);
  const auto r = run_cli({"estimate-k", "--image", (phantom() / "image.png").string(), "--masks",
                          (phantom() / "mask_upper.png").string(), small.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("small_mask.png"), std::string::npos);
}

TEST_F(Cli, InvalidConfigsExitWithOne) {
  const fs::path bad = tmp / "bad.json";
  std::ofstream(bad) << R"({"w_tv": 0.01, "mystery": 1})";
  const auto r = run_cli({"separate", "--sample", phantom().string(), "--out-dir", (tmp / "sep").string(),
                          "--config", bad.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("mystery"), std::string::npos);

  const fs::path typed = tmp / "typed.json";
  std::ofstream(typed) << R"({"shift_min": "four"})";
  EXPECT_EQ(run_cli({"synthesize", "--sample", phantom().string(), "--out-dir", (tmp / "x").string(),
                     "--config", typed.string()}).code, 1);

  const fs::path broken = tmp / "broken.json";
  std::ofstream(broken) << "{";
  EXPECT_EQ(run_cli({"phantom", "--out-dir", (tmp / "x").string(), "--config", broken.string()}).code, 1);

  EXPECT_EQ(run_cli({"separate", "--sample", phantom().string(), "--out-dir", (tmp / "x").string(), "--k", "0"}).code, 1);
}

TEST_F(Cli, EstimateKReportsProvenance) {
  const auto r = run_cli({"estimate-k", "--sample", overlapped().string(), "--out-dir", (tmp / "k").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("k").at("provenance"), "estimated");
  EXPECT_GT(j.at("overlap_area").get<int>(), 0);
  const double k = j.at("k").at("value").get<double>();
  EXPECT_GT(k, 0.0);
  EXPECT_LE(k, 1.0);
  EXPECT_TRUE(fs::exists(tmp / "k" / "k.json"));
}

TEST_F(Cli, ReconstructComposesLayers) {
  const fs::path in = overlapped();
  const auto r = run_cli({"reconstruct", "--layers", (in / "gt_upper.png").string(), (in / "gt_lower.png").string(),
                          "--masks", (in / "mask_upper.png").string(), (in / "mask_lower.png").string(),
                          "--k", read_json(in / "meta.json").at("k_used").dump(), "--out-dir", (tmp / "rec").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const GrayImage rec = load_raster(tmp / "rec" / "reconstruction.png");
  const StoredSample smp = read_sample(in);
  const BinaryMask uni = smp.masks.union_mask();
  // Half-step quantization on each layer scaled by |dR/dL| <= 1/k, plus the
  // two output quantizations.
  const double tol = (1.0 / smp.k_used + 1.0) / 65535.0;
  for (std::size_t q = 0; q < uni.size(); ++q) {
    if (uni[q]) EXPECT_NEAR(rec[q], smp.image[q], tol);
  }
}

TEST_F(Cli, SynthesizeBatch) {
  const auto r = run_cli({"synthesize", "--sample", phantom().string(), "--out-dir", (tmp / "batch").string(),
                          "--seed", "9", "--count", "3", "--shift-min", "6", "--shift-max", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int i = 0; i < 3; ++i) {
    const fs::path d = tmp / "batch" / ("sample_000" + std::to_string(i));
    EXPECT_EQ(read_json(d / "meta.json").at("seed"), 9 + i);
  }
  EXPECT_TRUE(fs::exists(tmp / "batch" / "manifest.json"));
}

TEST_F(Cli, RegevalRoundTripsSavedTrials) {
  const fs::path cfg = tmp / "regeval.json";
  std::ofstream(cfg) << R"({"trial": {"side": 128, "shift_max": 8, "search_radius": 12}})";
  const auto gen = run_cli({"regeval", "--generate", "2", "--seed", "4", "--config", cfg.string(), "--out",
                            (tmp / "gen" / "report.json").string(), "--csv", (tmp / "gen" / "report.csv").string(),
                            "--save-trials", (tmp / "trials").string()});
  ASSERT_EQ(gen.code, 0) << gen.err;
  EXPECT_TRUE(fs::exists(tmp / "gen" / "manifest.json"));
  EXPECT_TRUE(fs::exists(tmp / "gen" / "report.csv"));
  const auto read = run_cli({"regeval", "--trials", (tmp / "trials").string(), "--out", (tmp / "read" / "report.json").string()});
  ASSERT_EQ(read.code, 0) << read.err;
  const auto a = read_json(tmp / "gen" / "report.json");
  const auto b = read_json(tmp / "read" / "report.json");
  ASSERT_EQ(a.at("trials").size(), 2u);
  ASSERT_EQ(b.at("trials").size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.at("trials")[i].at("truth"), b.at("trials")[i].at("truth"));
    EXPECT_EQ(a.at("trials")[i].at("seed"), b.at("trials")[i].at("seed"));
  }
  EXPECT_EQ(run_cli({"regeval", "--out", (tmp / "x.json").string()}).code, 1);
  EXPECT_EQ(run_cli({"regeval", "--trials", (tmp / "trials").string(), "--generate", "2", "--out",
                     (tmp / "x.json").string()}).code, 1);
}

TEST_F(Cli, EveryCommandIsDeterministic) {
  const fs::path in = overlapped();
  const std::string layers_u = (in / "gt_upper.png").string(), layers_l = (in / "gt_lower.png").string();
  const std::string mask_u = (in / "mask_upper.png").string(), mask_l = (in / "mask_lower.png").string();
  const std::vector<std::vector<std::string>> commands{
      {"phantom", "--side", "96", "--seed", "8", "--out-dir", (tmp / "d_phantom").string()},
      {"synthesize", "--sample", phantom().string(), "--seed", "8", "--out-dir", (tmp / "d_synth").string()},
      {"estimate-k", "--sample", in.string(), "--out-dir", (tmp / "d_k").string()},
      {"separate", "--sample", in.string(), "--out-dir", (tmp / "d_sep").string()},
      {"reconstruct", "--layers", layers_u, layers_l, "--masks", mask_u, mask_l, "--k", "0.25", "--out-dir", (tmp / "d_rec").string()},
      {"metrics", (in / "image.png").string(), layers_u, "--out-dir", (tmp / "d_metrics").string()},
      {"regeval", "--generate", "1", "--seed", "2", "--out", (tmp / "d_reg" / "report.json").string()},
  };
  const std::vector<fs::path> dirs{tmp / "d_phantom", tmp / "d_synth", tmp / "d_k", tmp / "d_sep",
                                   tmp / "d_rec", tmp / "d_metrics", tmp / "d_reg"};
  for (std::size_t c = 0; c < commands.size(); ++c) {
    const auto first = run_cli(commands[c]);
    ASSERT_EQ(first.code, 0) << commands[c][0] << ": " << first.err;
    const auto snap1 = snapshot_dir(dirs[c]);
    const auto second = run_cli(commands[c]);
    ASSERT_EQ(second.code, 0);
    EXPECT_EQ(first.out, second.out) << commands[c][0];
    EXPECT_EQ(snap1, snapshot_dir(dirs[c])) << commands[c][0];
    EXPECT_FALSE(snap1.empty());
  }
}

}  // namespace
}  // namespace bonelayer
