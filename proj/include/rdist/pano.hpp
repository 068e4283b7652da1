#pragma once

// Synthetic training data: distorted rectilinear crops cut out of
// equirectangular panoramas, with their ground-truth coefficients.
//
// Frames are right-handed with x right, y up, z forward. Image rows grow
// downwards, so a camera ray for image point (x, y) is (x/f, -y/f, 1).

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rdist/distortion.hpp"
#include "rdist/image.hpp"

namespace rdist {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SamplingSpec {
  Range pan{-35.0, 35.0};
  Range tilt{-15.0, 0.0};
  Range roll{-2.0, 2.0};
  Range fov{15.0, 60.0};
  Range k1{-0.7, 0.3};
  double k2_sigma = 0.02;
  int render_w = 256;
  int render_h = 144;
  int out_w = 64;
  int out_h = 64;
  std::uint64_t seed = 0;

  /// Throws DomainError for empty/inverted ranges, fov outside (0, 180),
  /// negative sigma or non-positive sizes.
  void validate() const;
};

struct CropParams {
  double pan = 0.0;
  double tilt = 0.0;
  double roll = 0.0;
  double fov = 60.0;
  double k1 = 0.0;
  double k2 = 0.0;
  std::uint64_t index = 0;
  std::uint64_t seed = 0;

  RadialDistortion distortion() const { return {k1, k2, 0.0, 0.0, CoordinateScale::WidthNormalized}; }
};

/// Draws one crop: angles, fov and k1 uniform over their ranges, k2 on the
/// k1-k2 manifold plus Normal(0, k2_sigma) noise. Draws that fold the render
/// frame or fall outside manifold +- 6 sigma are redrawn from the same
/// per-sample stream. Depends only on (spec.seed, index).
CropParams sample_crop_params(const SamplingSpec& spec, std::uint64_t index);

/// R = R_pan(about y) * R_tilt(about x) * R_roll(about z). Positive pan turns
/// right, positive tilt looks up, angles in degrees.
Mat3 rotation_matrix(double pan_deg, double tilt_deg, double roll_deg);

/// Unit camera-frame ray through continuous pixel coordinate (px, py) of a
/// distorted width x height image.
Vec3 ray_for_pixel(double px, double py, const CameraIntrinsics& cam, const InversePolynomial& inv,
                   int width, int height);

/// Bilinear lookup of a world ray in a full-sphere equirectangular image with
/// horizontal wraparound. Longitude atan2(x, z) spans the columns left to
/// right, latitude asin(y) spans the rows top (north) to bottom.
Rgb equirect_lookup(const Image& pano, const Vec3& ray);

/// Renders the distorted crop at render size and resizes it to the output
/// size. Throws FoldError if the coefficients fold the render frame.
Image render_crop(const Image& pano, const CropParams& p, int render_w, int render_h, int out_w,
                  int out_h, int workers = 0);

// --- procedural panorama ---------------------------------------------------

enum class PanoStyle {
  Field,  ///< grass field with mowing stripes below the horizon, sky above
  Plain,  ///< flat grey background, grid and markers only
};

/// A colour-keyed great circle drawn on top of the procedural panorama.
struct MarkerLine {
  std::string name;
  std::array<std::uint8_t, 3> color;
  Vec3 normal;  ///< unit normal of the great circle's plane
};

/// The marker circles, in drawing order.
const std::vector<MarkerLine>& marker_lines();

/// Deterministic equirectangular test scene: a grid of great circles (through
/// the poles, and through the horizontal x axis) every 6 degrees plus
/// high-contrast colour-keyed marker circles. Requires w == 2 h.
Image procedural_panorama(int w, int h, PanoStyle style = PanoStyle::Field);

// --- datasets ----------------------------------------------------------------

struct ManifestRecord {
  std::string file;
  CropParams params;
};

struct DatasetManifest {
  static constexpr int kVersion = 1;
  int version = kVersion;
  SamplingSpec spec;
  std::vector<ManifestRecord> records;
};

/// One JSON object per line: a header with the sampling spec, then one record
/// per image with fields {file, index, seed, pan, tilt, roll, fov, k1, k2}.
std::string manifest_to_text(const DatasetManifest& m);
DatasetManifest manifest_from_text(const std::string& text);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// 64-bit FNV-1a of a file's bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

enum class ImageFormat { Ppm, Png };

/// Renders `count` crops (panoramas used round-robin by index) into out_dir
/// and writes out_dir/manifest.jsonl. Output is fully determined by the sampling parameters,
/// independent of the worker count.
DatasetManifest generate_dataset(std::span<const std::filesystem::path> panoramas,
                                 const SamplingSpec& spec, std::uint64_t count,
                                 const std::filesystem::path& out_dir,
                                 ImageFormat format = ImageFormat::Ppm, int workers = 0);

/// Same, with panoramas already in memory.
DatasetManifest generate_dataset(std::span<const Image> panoramas, const SamplingSpec& spec,
                                 std::uint64_t count, const std::filesystem::path& out_dir,
                                 ImageFormat format = ImageFormat::Ppm, int workers = 0);

}  // namespace rdist
