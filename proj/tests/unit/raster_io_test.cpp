#include <gtest/gtest.h>

#include <png.h>

#include <cmath>
#include <fstream>
#include <random>

#include "bonelayer/raster_io.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace bonelayer {
namespace {

using testing::TempDir;

// Writes an 8-bit PNG with the given libpng simplified-API format.
void write_png(const std::filesystem::path& p, int w, int h, png_uint_32 format,
               const std::vector<png_byte>& data) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = w;
  img.height = h;
  img.format = format;
  ASSERT_TRUE(png_image_write_to_file(&img, p.c_str(), 0, data.data(), 0, nullptr));
}

GrayImage quantized_random(Shape s, int levels, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> q(0, levels);
  ScalarField f(s, 0.0);
  for (double& v : f.values()) v = q(rng) / double(levels);
  return GrayImage(std::move(f));
}

TEST(RasterIo, SixteenBitRoundTripIsExactOnTheGrid) {
  TempDir dir("io16");
  std::mt19937_64 rng(1);
  const GrayImage img = quantized_random(Shape{17, 9}, 65535, rng);
  save_raster(img, dir / "a.png");
  EXPECT_EQ(load_raster(dir / "a.png"), img);
}

TEST(RasterIo, EightBitRoundTripIsExactOnTheGrid) {
  TempDir dir("io8");
  std::mt19937_64 rng(2);
  const GrayImage img = quantized_random(Shape{5, 12}, 255, rng);
  save_raster(img, dir / "a.png", BitDepth::k8);
  EXPECT_EQ(load_raster(dir / "a.png"), img);
}

TEST(RasterIo, QuantisationErrorIsAtMostHalfAStep) {
  TempDir dir("ioq");
  std::mt19937_64 rng(3);
  const GrayImage img = testing::random_image(Shape{32, 32}, rng);
  save_raster(img, dir / "a.png");
  const GrayImage back = load_raster(dir / "a.png");
  for (std::size_t p = 0; p < img.size(); ++p) {
    EXPECT_LE(std::abs(back[p] - img[p]), 0.5 / 65535 + 1e-15);
  }
}

TEST(RasterIo, ReloadedImageSavesToIdenticalBytes) {
  TempDir dir("iob");
  std::mt19937_64 rng(4);
  save_raster(testing::random_image(Shape{20, 20}, rng), dir / "a.png");
  save_raster(load_raster(dir / "a.png"), dir / "b.png");
  EXPECT_EQ(testing::read_bytes(dir / "a.png"), testing::read_bytes(dir / "b.png"));
}

TEST(RasterIo, MissingFileNamesThePath) {
  TempDir dir("iom");
  const auto p = dir / "nope.png";
  try {
    load_raster(p);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), p.string());
    EXPECT_NE(std::string(e.what()).find("nope.png"), std::string::npos);
  }
}

TEST(RasterIo, CorruptFileIsRejected) {
  TempDir dir("ioc");
  std::ofstream(dir / "bad.png") << "definitely not a png";
  EXPECT_THROW(load_raster(dir / "bad.png"), IoError);
  EXPECT_THROW(load_mask(dir / "bad.png"), IoError);
}

TEST(RasterIo, ColourAndAlphaAreRejected) {
  TempDir dir("iorgb");
  write_png(dir / "rgb.png", 2, 2, PNG_FORMAT_RGB, std::vector<png_byte>(12, 100));
  write_png(dir / "ga.png", 2, 2, PNG_FORMAT_GA, std::vector<png_byte>(8, 100));
  EXPECT_THROW(load_raster(dir / "rgb.png"), IoError);
  EXPECT_THROW(load_raster(dir / "ga.png"), IoError);
}

TEST(RasterIo, MaskRoundTrip) {
  TempDir dir("iomask");
  std::mt19937_64 rng(5);
  const BinaryMask m = testing::random_blob(Shape{19, 23}, rng);
  save_mask(m, dir / "m.png");
  EXPECT_EQ(load_mask(dir / "m.png"), m);
}

TEST(RasterIo, MaskWithIntermediateValuesIsRejected) {
  TempDir dir("iomaskbad");
  write_png(dir / "m.png", 2, 1, PNG_FORMAT_GRAY, {0, 128});
  EXPECT_THROW(load_mask(dir / "m.png"), IoError);
  write_png(dir / "ok.png", 2, 1, PNG_FORMAT_GRAY, {0, 255});
  EXPECT_EQ(load_mask(dir / "ok.png").count(), 1u);
}

TEST(RasterIo, SixteenBitMaskIsAccepted) {
  TempDir dir("iomask16");
  ScalarField f(Shape{3, 1}, std::vector<double>{0.0, 1.0, 1.0});
  save_raster(GrayImage(f), dir / "m.png");
  EXPECT_EQ(load_mask(dir / "m.png").count(), 2u);
}

TEST(RasterIo, UnwritablePathThrows) {
  EXPECT_THROW(save_raster(GrayImage(Shape{2, 2}, 0.5), "/nonexistent_dir_xyz/a.png"), IoError);
}

}  // namespace
}  // namespace bonelayer
