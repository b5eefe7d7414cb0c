#include <gtest/gtest.h>

#include <cmath>

#include "synth.hpp"
#include "wmtrace/attacks.hpp"
#include "wmtrace/error.hpp"
#include "wmtrace/image_io.hpp"

using namespace wmtrace;
using namespace wmtrace::attacks;

TEST(Blur, ImpulseResponseIsNormalizedGaussian) {
  Plane p(11, 11);
  p.at(5, 5) = 1.0;
  const Plane out = gaussian_blur(p, 0.5);
  // Radius ceil(1.5) = 2; 1-D weights exp(-i^2/0.5) normalized.
  double w[5], s = 0.0;
  for (int i = -2; i <= 2; ++i) s += w[i + 2] = std::exp(-(i * i) / 0.5);
  double total = 0.0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const int dx = x - 5, dy = y - 5;
      const double want = (std::abs(dx) <= 2 && std::abs(dy) <= 2) ? w[dx + 2] * w[dy + 2] / (s * s) : 0.0;
      EXPECT_NEAR(out.at(x, y), want, 1e-15);
      total += out.at(x, y);
    }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Blur, ConstantPlaneUnchangedAtEdges) {
  const Plane p(7, 5, 42.0);
  const Plane out = gaussian_blur(p, 1.3);
  for (double v : out.values) EXPECT_NEAR(v, 42.0, 1e-12);
}

TEST(Resize, PixelCentreAlignment) {
  Plane p(2, 1);
  p.values = {0.0, 10.0};
  const Plane up = resize_bilinear(p, 4, 1);
  EXPECT_DOUBLE_EQ(up.values[0], 0.0);  // -0.25 clamps to 0
  EXPECT_DOUBLE_EQ(up.values[1], 2.5);
  EXPECT_DOUBLE_EQ(up.values[2], 7.5);
  EXPECT_DOUBLE_EQ(up.values[3], 10.0);
  const Plane same = resize_bilinear(p, 2, 1);
  EXPECT_EQ(same.values, p.values);
}

TEST(Resize, AttackRestoresDimensions) {
  const Raster img = testkit::synth_image(101, 67, 1);
  const Raster out = apply_attack(img, AttackSpec{AttackKind::Resize});
  EXPECT_EQ(out.width, 101);
  EXPECT_EQ(out.height, 67);
  EXPECT_THROW(apply_attack(Raster(1, 4, 9), AttackSpec{AttackKind::Resize}), Error);
}

TEST(Jpeg, DeterministicAndLossy) {
  const Raster img = testkit::synth_image(64, 64, 2);
  const Raster a = apply_attack(img, AttackSpec{AttackKind::Jpeg});
  const Raster b = apply_attack(img, AttackSpec{AttackKind::Jpeg});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, img);
  EXPECT_EQ(a.width, 64);
  // Q=50 keeps the picture recognisable: mean absolute error well under 10 levels.
  double err = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) err += std::abs(int(a.data[i]) - int(img.data[i]));
  EXPECT_LT(err / img.data.size(), 10.0);
}

TEST(Attack, NoneIsIdentity) {
  const Raster img = testkit::synth_image(16, 16, 3);
  EXPECT_EQ(apply_attack(img, AttackSpec{}), img);
}

TEST(Attack, SuiteOrderAndNames) {
  const auto suite = attack_suite();
  ASSERT_EQ(suite.size(), 4u);
  EXPECT_EQ(suite[0].kind, AttackKind::None);
  EXPECT_EQ(suite[1].kind, AttackKind::GaussianBlur);
  EXPECT_DOUBLE_EQ(suite[1].blur_sigma, 0.5);
  EXPECT_EQ(suite[2].kind, AttackKind::Jpeg);
  EXPECT_EQ(suite[2].jpeg_quality, 50);
  EXPECT_EQ(suite[3].kind, AttackKind::Resize);
  EXPECT_DOUBLE_EQ(suite[3].resize_factor, 0.8);
  for (const auto& a : suite) EXPECT_EQ(parse_kind(kind_name(a.kind)), a.kind);
  EXPECT_EQ(parse_kind("blur"), AttackKind::GaussianBlur);
  EXPECT_THROW(parse_kind("rotate"), Error);
  EXPECT_EQ(attacked_dir_name("Encoded_image", AttackKind::Jpeg), "Encoded_image_attacked_jpeg");
}

TEST(Attack, ValidateRanges) {
  AttackSpec s;
  s.jpeg_quality = 0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.resize_factor = 1.0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.blur_sigma = 0.0;
  EXPECT_THROW(s.validate(), Error);
}

TEST(ImageIo, PngAndBmpRoundTripLossless) {
  const Raster img = testkit::synth_image(33, 17, 4);
  const auto dir = std::filesystem::temp_directory_path() / "wmtrace_io_test";
  for (const char* ext : {".png", ".bmp"}) {
    const auto path = dir / (std::string("img") + ext);
    io::save_image(img, path);
    EXPECT_EQ(io::load_image(path), img) << ext;
  }
  EXPECT_TRUE(io::is_image_file("a.JPG"));
  EXPECT_FALSE(io::is_image_file("a.txt"));
  EXPECT_THROW(io::load_image(dir / "missing.png"), Error);
}
