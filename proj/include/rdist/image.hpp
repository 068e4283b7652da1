#pragma once

// 8-bit RGB rasters, PPM/PNG I/O, bilinear sampling and remapping.
//
// Pixel convention: integer index i covers [i, i+1) and has its center at
// i + 0.5. Continuous coordinates passed to the samplers use that convention.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rdist/distortion.hpp"

namespace rdist {

using Rgb = std::array<double, 3>;

class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  /// Throws DomainError for non-positive dimensions.
  Image(int width, int height, std::uint8_t fill = 0);
  /// Throws DomainError when data.size() != width * height * 3.
  Image(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<size_t>(y) * width_ + x) * kChannels + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<size_t>(y) * width_ + x) * kChannels + c];
  }

  void set(int x, int y, const Rgb& rgb);

  /// Channel values as floats in [0, 255], same layout as data().
  std::vector<float> to_float() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Rounds to nearest and clamps to [0, 255].
std::uint8_t quantize(double v);

/// Reads binary PPM (P6, maxval 255) or 8-bit PNG, chosen by file signature.
Image read_image(const std::filesystem::path& path);

/// Writes P6 for ".ppm"/".pnm", PNG for ".png"; anything else is a FormatError.
void write_image(const std::filesystem::path& path, const Image& img);

/// Parses an in-memory P6 file.
Image decode_ppm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_ppm(const Image& img);

/// Bilinear interpolation of the four pixels around (x, y). Coordinates are
/// clamped to the edge pixel centers.
Rgb sample_bilinear(const Image& img, double x, double y);

/// Per-output-pixel source coordinates (continuous, source-pixel units).
struct RemapField {
  int width = 0;
  int height = 0;
  int source_width = 0;
  int source_height = 0;
  std::vector<double> x_src;
  std::vector<double> y_src;

  static RemapField identity(int width, int height);
};

/// Field for rectifying an image with width-normalized distortion d: every
/// undistorted output pixel samples the distorted source at its forward
/// distorted position. The source defaults to the output size. Throws
/// FoldError if d is not monotonic up to the output corner radius.
RemapField build_undistort_remap(const RadialDistortion& d, int out_w, int out_h, int src_w = 0,
                                 int src_h = 0);

/// Samples img at the field coordinates; coordinates outside the source
/// rectangle become black.
Image remap(const Image& img, const RemapField& field);

/// Plain bilinear resize (no prefilter).
Image resize_bilinear(const Image& img, int new_w, int new_h);

/// Convenience: remap(img, build_undistort_remap(d, w, h)).
Image rectify(const Image& img, const RadialDistortion& d);

}  // namespace rdist
