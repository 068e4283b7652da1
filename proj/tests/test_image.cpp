#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "rdist/errors.hpp"
#include "rdist/image.hpp"

using namespace rdist;
namespace fs = std::filesystem;

namespace {

Image ramp(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>((x * 37 + y * 11 + c * 70) % 256);
  return img;
}

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "rdist_image_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Image, ConstructionValidates) {
  EXPECT_THROW(Image(0, 3), DomainError);
  EXPECT_THROW(Image(2, 2, std::vector<std::uint8_t>(11)), DomainError);
  const Image img(2, 3, 7);
  EXPECT_EQ(img.data().size(), 18u);
  EXPECT_EQ(img.at(1, 2, 2), 7);
}

TEST(Ppm, ParsesHeader) {
  std::vector<std::uint8_t> bytes = {'P', '6', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n'};
  for (int i = 0; i < 12; ++i) bytes.push_back(static_cast<std::uint8_t>(i * 20));
  const Image img = decode_ppm(bytes);
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.height(), 2);
  EXPECT_EQ(img.at(1, 1, 2), 220);
  EXPECT_EQ(encode_ppm(img), bytes);
}

TEST(Ppm, CommentsAndErrors) {
  const std::string with_comment = "P6\n# made by hand\n1 1\n255\n";
  std::vector<std::uint8_t> b(with_comment.begin(), with_comment.end());
  b.insert(b.end(), {1, 2, 3});
  EXPECT_EQ(decode_ppm(b).at(0, 0, 1), 2);

  std::vector<std::uint8_t> truncated(b.begin(), b.end() - 1);
  EXPECT_THROW(decode_ppm(truncated), FormatError);
  const std::string p3 = "P3\n1 1\n255\n1 2 3\n";
  EXPECT_THROW(decode_ppm({p3.begin(), p3.end()}), FormatError);
  const std::string deep = "P6\n1 1\n65535\n";
  EXPECT_THROW(decode_ppm({deep.begin(), deep.end()}), FormatError);
}

TEST(ImageIo, RoundTrips) {
  Image img(2, 2);
  img.set(0, 0, {255, 0, 0});
  img.set(1, 0, {0, 255, 0});
  img.set(0, 1, {0, 0, 255});
  img.set(1, 1, {12, 34, 56});
  for (const char* name : {"a.ppm", "a.png"}) {
    const auto p = temp_path(name);
    write_image(p, img);
    EXPECT_EQ(read_image(p), img) << name;
  }
  const Image big = ramp(37, 23);
  write_image(temp_path("b.png"), big);
  EXPECT_EQ(read_image(temp_path("b.png")), big);
}

TEST(ImageIo, Errors) {
  EXPECT_THROW(read_image(temp_path("missing.ppm")), IoError);
  EXPECT_THROW(write_image(temp_path("x.bmp"), Image(1, 1)), FormatError);
  std::ofstream(temp_path("junk.ppm")) << "hello";
  EXPECT_THROW(read_image(temp_path("junk.ppm")), FormatError);
}

TEST(Bilinear, CentersMidpointsAndClamp) {
  Image img(2, 1);
  img.set(0, 0, {0, 0, 0});
  img.set(1, 0, {255, 255, 255});
  EXPECT_EQ(sample_bilinear(img, 0.5, 0.5)[0], 0.0);
  EXPECT_EQ(sample_bilinear(img, 1.5, 0.5)[1], 255.0);
  EXPECT_DOUBLE_EQ(sample_bilinear(img, 1.0, 0.5)[2], 127.5);
  EXPECT_EQ(sample_bilinear(img, -5.0, 9.0)[0], 0.0);
  EXPECT_EQ(sample_bilinear(img, 50.0, -9.0)[0], 255.0);
  const Image flat(5, 4, 77);
  for (double x : {-1.0, 0.3, 2.2, 4.9, 7.0}) EXPECT_DOUBLE_EQ(sample_bilinear(flat, x, x / 2)[1], 77.0);
}

TEST(Remap, IdentityAndShift) {
  const Image img = ramp(9, 7);
  EXPECT_EQ(remap(img, RemapField::identity(9, 7)), img);

  RemapField shift = RemapField::identity(9, 7);
  for (auto& x : shift.x_src) x += 2.0;
  const Image out = remap(img, shift);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 7; ++x) EXPECT_EQ(out.at(x, y, 0), img.at(x + 2, y, 0));
    // Sampled beyond the right edge: black.
    EXPECT_EQ(out.at(8, y, 1), 0);
  }
}

TEST(UndistortRemap, ZeroIsIdentity) {
  const auto f = build_undistort_remap({}, 64, 36);
  const auto id = RemapField::identity(64, 36);
  for (size_t i = 0; i < f.x_src.size(); ++i) {
    EXPECT_NEAR(f.x_src[i], id.x_src[i], 1e-9);
    EXPECT_NEAR(f.y_src[i], id.y_src[i], 1e-9);
  }
  const Image img = ramp(64, 36);
  EXPECT_EQ(rectify(img, {}), img);
}

TEST(UndistortRemap, CenterFixedAndBarrelCornersInward) {
  const RadialDistortion barrel{-0.4, 0.12, 0, 0, CoordinateScale::WidthNormalized};
  const int w = 65, h = 37;
  const auto f = build_undistort_remap(barrel, w, h);
  const size_t center = static_cast<size_t>(h / 2) * w + w / 2;
  EXPECT_NEAR(f.x_src[center], 32.5, 1e-12);
  EXPECT_NEAR(f.y_src[center], 18.5, 1e-12);

  // Oracle for the top-left corner pixel center: forward distortion in width units.
  const double xn = (0.5 - w / 2.0) / w, yn = (0.5 - h / 2.0) / w;
  const double r2 = xn * xn + yn * yn;
  const double k = 1 - 0.4 * r2 + 0.12 * r2 * r2;
  EXPECT_NEAR(f.x_src[0], xn * k * w + w / 2.0, 1e-9);
  EXPECT_NEAR(f.y_src[0], yn * k * w + h / 2.0, 1e-9);
  EXPECT_GT(f.x_src[0], 0.5);
  EXPECT_GT(f.y_src[0], 0.5);
  EXPECT_LT(f.x_src[w - 1], w - 0.5);
}

TEST(UndistortRemap, RejectsFolding) {
  EXPECT_THROW(build_undistort_remap({-3.0, 0, 0, 0, CoordinateScale::WidthNormalized}, 32, 18), FoldError);
}

TEST(Resize, Cases) {
  const Image img = ramp(6, 5);
  EXPECT_EQ(resize_bilinear(img, 6, 5), img);
  Image checker(2, 2);
  checker.set(0, 0, {255, 255, 255});
  checker.set(1, 1, {255, 255, 255});
  const Image one = resize_bilinear(checker, 1, 1);
  EXPECT_EQ(one.at(0, 0, 0), quantize(127.5));
  const Image flat(7, 3, 201);
  const Image big = resize_bilinear(flat, 19, 11);
  for (auto v : big.data()) EXPECT_EQ(v, 201);
}

TEST(Quantize, RoundsAndClamps) {
  EXPECT_EQ(quantize(-4.0), 0);
  EXPECT_EQ(quantize(300.0), 255);
  EXPECT_EQ(quantize(10.49), 10);
  EXPECT_EQ(quantize(10.5), 11);
}
