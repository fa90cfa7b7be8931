#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bonelayer/reconstructor.hpp"
#include "oracles.hpp"

namespace bonelayer {
namespace {

BinaryMask rect(Shape s, int x0, int y0, int x1, int y1) {
  return BinaryMask::from_predicate(s, [&](int x, int y) { return x >= x0 && x < x1 && y >= y0 && y < y1; });
}

LayerSet constant_layers(const MaskSet& ms, const std::vector<double>& values) {
  std::vector<GrayImage> layers;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    layers.push_back(apply_mask(GrayImage(ms.shape(), values[i]), ms[i]));
  }
  return LayerSet(std::move(layers), ms);
}

TEST(CorrectionParameter, SuppliedRange) {
  EXPECT_THROW(CorrectionParameter::supplied(0.0), InvalidInput);
  EXPECT_THROW(CorrectionParameter::supplied(1.0 + 1e-12), InvalidInput);
  EXPECT_THROW(CorrectionParameter::supplied(std::nan("")), InvalidInput);
  EXPECT_EQ(CorrectionParameter::supplied(kMinCorrection).value(), kMinCorrection);
  const auto k = CorrectionParameter::supplied(0.3);
  EXPECT_EQ(k.provenance(), Provenance::kSupplied);
  EXPECT_FALSE(k.flagged());
}

TEST(CorrectionParameter, EstimatedIsClampedAndFlagged) {
  const auto low = CorrectionParameter::estimated(-0.2, false);
  EXPECT_EQ(low.value(), kMinCorrection);
  EXPECT_TRUE(low.clamped());
  const auto high = CorrectionParameter::estimated(1.5, false);
  EXPECT_EQ(high.value(), 1.0);
  EXPECT_TRUE(high.flagged());
  const auto fine = CorrectionParameter::estimated(0.4, true);
  EXPECT_FALSE(fine.clamped());
  EXPECT_TRUE(fine.no_overlap_fallback());
  EXPECT_EQ(fine.provenance(), Provenance::kEstimated);
}

TEST(Reconstruct, NonOverlapIsIdentity) {
  std::mt19937_64 rng(1);
  const Shape s{20, 16};
  const MaskSet ms({rect(s, 0, 0, 10, 16), rect(s, 12, 0, 20, 16)});
  const GrayImage img = testing::random_image(s, rng);
  const LayerSet layers({apply_mask(img, ms[0]), apply_mask(img, ms[1])}, ms);
  for (double k : {kMinCorrection, 0.25, 1.0}) {
    const auto out = reconstruct(layers, CorrectionParameter::supplied(k));
    EXPECT_EQ(out.saturated_count, 0u);
    for (std::size_t p = 0; p < s.area(); ++p) {
      const bool in = ms[0][p] || ms[1][p];
      EXPECT_EQ(out.image[p], in ? img[p] : 0.0);
      EXPECT_EQ(out.overlap[p], 0.0);
    }
  }
}

TEST(Reconstruct, SoftTissueLayerIsNeutral) {
  // A layer holding only soft tissue (absorption k) leaves the other layer
  // unchanged, and an all-soft-tissue stack stays at 1 - k.
  const Shape s{6, 6};
  const MaskSet ms({BinaryMask(s, true), BinaryMask(s, true)});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 200; ++trial) {
    const double k = u(rng);
    const double other = u(rng);
    const auto out = reconstruct(constant_layers(ms, {1.0 - k, other}), CorrectionParameter::supplied(k));
    EXPECT_NEAR(out.image(2, 3), other, 1e-12);
    const auto both = reconstruct(constant_layers(ms, {1.0 - k, 1.0 - k}), CorrectionParameter::supplied(k));
    EXPECT_NEAR(both.image(0, 0), 1.0 - k, 1e-12);
  }
}

TEST(Reconstruct, ScalarHandExample) {
  // Absorptions 0.4 and 0.5 at k = 0.25: R = 1 - 0.25 * 1.6 * 2 = 0.2.
  const Shape s{1, 1};
  const MaskSet ms({BinaryMask(s, true), BinaryMask(s, true)});
  const auto out = reconstruct(constant_layers(ms, {0.6, 0.5}), CorrectionParameter::supplied(0.25));
  const double exact = static_cast<double>(testing::compose_reference(std::vector<double>{0.6, 0.5}, 0.25));
  EXPECT_EQ(out.image[0], exact);
  EXPECT_NEAR(out.image[0], 0.2, 1e-16);
  EXPECT_EQ(out.overlap[0], out.image[0]);
}

TEST(ReconstructGradient, ScalarHandExample) {
  // dR/dk = a_1 a_2 / k^2 = 0.2 / 0.0625.
  const std::vector<double> l{0.6, 0.5};
  std::vector<double> d(2);
  double dk = 0.0;
  detail::compose_pixel_gradient(l, 0.25, d, dk);
  EXPECT_NEAR(dk, 3.2, 1e-14);
  EXPECT_NEAR(d[0], 2.0, 1e-14);
  EXPECT_NEAR(d[1], 1.6, 1e-14);
}

TEST(Reconstruct, MoreAbsorptionNeverBrightens) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const std::size_t m = 2 + trial % 3;
    std::vector<double> l(m);
    for (double& v : l) v = u(rng);
    const double k = 0.05 + 0.85 * u(rng);
    const double before = detail::compose_pixel(l, k);
    l[trial % m] = std::max(0.0, l[trial % m] - 0.1 * u(rng));
    EXPECT_LE(detail::compose_pixel(l, k), before);
  }
}

TEST(Reconstruct, MatchesLongDoubleReferenceOnRandomStacks) {
  std::mt19937_64 rng(3);
  const Shape s{24, 24};
  for (int trial = 0; trial < 10; ++trial) {
    const MaskSet ms({testing::random_blob(s, rng, 0.5), testing::random_blob(s, rng, 0.5),
                      testing::random_blob(s, rng, 0.5)});
    std::vector<GrayImage> layers;
    for (const auto& m : ms) layers.push_back(apply_mask(testing::random_image(s, rng, 0.5, 1.0), m));
    const LayerSet set(layers, ms);
    const double k = 0.4;
    const auto out = reconstruct(set, CorrectionParameter::supplied(k));
    std::size_t saturated = 0;
    for (std::size_t p = 0; p < s.area(); ++p) {
      std::vector<double> cover;
      for (std::size_t i = 0; i < 3; ++i) {
        if (ms[i][p]) cover.push_back(layers[i][p]);
      }
      double expect = 0.0;
      if (cover.size() == 1) {
        expect = cover[0];
      } else if (cover.size() >= 2) {
        const long double r = testing::compose_reference(cover, k);
        if (r < 0.0L) ++saturated;
        expect = static_cast<double>(std::clamp(r, 0.0L, 1.0L));
      }
      EXPECT_NEAR(out.image[p], expect, 1e-14);
      EXPECT_EQ(out.overlap[p], cover.size() == 3 ? out.image[p] : 0.0);
    }
    EXPECT_EQ(out.saturated_count, saturated);
  }
}

TEST(Reconstruct, ClampsAndCountsSaturation) {
  const Shape s{2, 1};
  const MaskSet ms({BinaryMask(s, true), BinaryMask(s, true)});
  // Absorption 0.9 twice at k = 0.3: 1 - 0.81 / 0.3 < 0.
  const auto out = reconstruct(constant_layers(ms, {0.1, 0.1}), CorrectionParameter::supplied(0.3));
  EXPECT_EQ(out.image[0], 0.0);
  EXPECT_EQ(out.saturated_count, 2u);
}

TEST(ReconstructGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const double h = 1e-5;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 2 + trial % 3;
    std::vector<double> l(m);
    for (double& v : l) v = u(rng);
    const double k = u(rng);
    std::vector<double> d(m);
    double dk = 0.0;
    const double r = detail::compose_pixel_gradient(l, k, d, dk);
    EXPECT_DOUBLE_EQ(r, detail::compose_pixel(l, k));
    for (std::size_t j = 0; j < m; ++j) {
      auto lp = l, lm = l;
      lp[j] += h;
      lm[j] -= h;
      const double fd = (detail::compose_pixel(lp, k) - detail::compose_pixel(lm, k)) / (2 * h);
      EXPECT_LE(std::abs(fd - d[j]), 1e-4 * std::max(1.0, std::abs(d[j])));
    }
    const double fdk = (detail::compose_pixel(l, k + h) - detail::compose_pixel(l, k - h)) / (2 * h);
    EXPECT_LE(std::abs(fdk - dk), 1e-4 * std::max(1.0, std::abs(dk)));
  }
}

TEST(ReconstructGradient, FieldLevelValuesAndZeroAtClampedPixels) {
  const Shape s{3, 1};
  const BinaryMask all(s, true);
  const MaskSet ms({all, BinaryMask::from_predicate(s, [](int x, int) { return x >= 1; })});
  ScalarField l0(s, std::vector<double>{0.5, 0.6, 0.1});
  ScalarField l1(s, std::vector<double>{0.0, 0.5, 0.1});
  const LayerSet set({GrayImage(l0), GrayImage(l1)}, ms);
  const double k = 0.25;
  const auto g = reconstruct_gradient(set, CorrectionParameter::supplied(k));
  // Pixel 0: single coverage, dR/dL_0 = 1.
  EXPECT_EQ(g.d_layers[0][0], 1.0);
  EXPECT_EQ(g.d_layers[1][0], 0.0);
  EXPECT_EQ(g.d_k[0], 0.0);
  // Pixel 1: dR/dL_0 = a_1 / k, dR/dL_1 = a_0 / k, dR/dk = a_0 a_1 / k^2.
  EXPECT_DOUBLE_EQ(g.d_layers[0][1], 0.5 / k);
  EXPECT_DOUBLE_EQ(g.d_layers[1][1], 0.4 / k);
  EXPECT_DOUBLE_EQ(g.d_k[1], 0.4 * 0.5 / (k * k));
  // Pixel 2 saturates (0.81 / 0.25 > 1): zero gradient.
  EXPECT_EQ(g.d_layers[0][2], 0.0);
  EXPECT_EQ(g.d_layers[1][2], 0.0);
  EXPECT_EQ(g.d_k[2], 0.0);
}

TEST(ToAbsorption, ComplementsInsideMaskOnly) {
  const Shape s{4, 1};
  const MaskSet ms({BinaryMask::from_predicate(s, [](int x, int) { return x < 2; }),
                    BinaryMask::from_predicate(s, [](int x, int) { return x >= 2; })});
  const LayerSet set = constant_layers(ms, {0.25, 0.75});
  const LayerSet a = to_absorption(set);
  EXPECT_EQ(a[0][0], 0.75);
  EXPECT_EQ(a[0][3], 0.0);
  EXPECT_EQ(a[1][3], 0.25);
}

TEST(EstimateK, RecoversUniformSoftTissue) {
  const Shape s{48, 48};
  const MaskSet ms({rect(s, 8, 8, 28, 30), rect(s, 20, 18, 40, 40)});
  // Soft tissue intensity 0.7 outside the bones; bone content is irrelevant
  // because the estimate only looks at the inpainted background.
  ScalarField f(s, 0.7);
  const BinaryMask uni = ms.union_mask();
  for (std::size_t p = 0; p < f.size(); ++p) {
    if (uni[p]) f[p] = 0.2;
  }
  const auto k = estimate_k(GrayImage(f), ms);
  EXPECT_NEAR(k.value(), 0.3, 1e-6);
  EXPECT_FALSE(k.flagged());
  EXPECT_EQ(k.provenance(), Provenance::kEstimated);
}

TEST(EstimateK, UsesMultiCoverageForThreeMasks) {
  const Shape s{40, 40};
  // Background is a vertical ramp; the overlap of the first two masks sits
  // at rows 10..14 so the estimate reflects that band only.
  ScalarField f(s, 0.0);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) f(x, y) = 0.3 + 0.01 * y;
  const MaskSet ms({rect(s, 5, 8, 15, 15), rect(s, 10, 10, 20, 17), rect(s, 25, 25, 30, 30)});
  ScalarField g = f;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (ms.union_mask()[p]) g[p] = 0.9;
  }
  SolverConfig c;
  c.tolerance = 1e-12;
  c.max_iterations = 200000;
  const auto k = estimate_k(GrayImage(g), ms, c);
  // The harmonic extension of a linear field is the field itself.
  EXPECT_NEAR(k.value(), 1.0 - (0.3 + 0.01 * 12.0), 1e-9);
}

TEST(EstimateK, FallsBackToUnionWithoutOverlap) {
  const Shape s{30, 30};
  const MaskSet ms({rect(s, 2, 2, 10, 10), rect(s, 15, 15, 25, 25)});
  const auto k = estimate_k(GrayImage(s, 0.6), ms);
  EXPECT_TRUE(k.no_overlap_fallback());
  EXPECT_NEAR(k.value(), 0.4, 1e-9);
}

TEST(EstimateK, ClampsWhenBackgroundIsWhite) {
  const Shape s{20, 20};
  const MaskSet ms({rect(s, 2, 2, 12, 12), rect(s, 8, 8, 18, 18)});
  const auto k = estimate_k(GrayImage(s, 1.0), ms);
  EXPECT_TRUE(k.clamped());
  EXPECT_EQ(k.value(), kMinCorrection);
}

TEST(EstimateK, RejectsEmptyUnionAndShapeMismatch) {
  const Shape s{10, 10};
  const MaskSet empty({BinaryMask(s, false), BinaryMask(s, false)});
  EXPECT_THROW(estimate_k(GrayImage(s, 0.5), empty), InvalidInput);
  const MaskSet ms({rect(s, 0, 0, 3, 3), rect(s, 2, 2, 5, 5)});
  EXPECT_THROW(estimate_k(GrayImage(Shape{11, 10}, 0.5), ms), InvalidInput);
}

}  // namespace
}  // namespace bonelayer
