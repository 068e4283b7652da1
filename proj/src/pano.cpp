#include "rdist/pano.hpp"

#include <Eigen/Geometry>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "rdist/errors.hpp"
#include "rdist/parallel.hpp"
#include "rdist/random.hpp"

namespace rdist {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
// Redraw budget for folding / out-of-band draws before giving up.
constexpr int kMaxDraws = 1000;

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw DomainError(std::string("invalid ") + name + " range");
  }
}

}  // namespace

void SamplingSpec::validate() const {
  check_range(pan, "pan");
  check_range(tilt, "tilt");
  check_range(roll, "roll");
  check_range(fov, "fov");
  check_range(k1, "k1");
  if (!(fov.lo > 0.0 && fov.hi < 180.0)) throw DomainError("fov range must lie in (0, 180)");
  if (!(k2_sigma >= 0.0) || !std::isfinite(k2_sigma)) throw DomainError("k2 sigma must be >= 0");
  if (render_w < 1 || render_h < 1 || out_w < 1 || out_h < 1) {
    throw DomainError("render and output sizes must be positive");
  }
}

CropParams sample_crop_params(const SamplingSpec& spec, std::uint64_t index) {
  spec.validate();
  CropParams p;
  p.index = index;
  p.seed = derive_seed(spec.seed, index);
  CounterRng rng(p.seed);
  p.pan = rng.uniform(spec.pan.lo, spec.pan.hi);
  p.tilt = rng.uniform(spec.tilt.lo, spec.tilt.hi);
  p.roll = rng.uniform(spec.roll.lo, spec.roll.hi);
  p.fov = rng.uniform(spec.fov.lo, spec.fov.hi);

  const double r_max = corner_radius(spec.render_w, spec.render_h);
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    const double k1 = rng.uniform(spec.k1.lo, spec.k1.hi);
    const double noise = spec.k2_sigma > 0.0 ? rng.normal(0.0, spec.k2_sigma) : 0.0;
    const double k2 = manifold_k2(k1) + noise;
    if (std::abs(noise) > 6.0 * spec.k2_sigma) continue;
    if (!is_monotonic({k1, k2}, r_max)) continue;
    p.k1 = k1;
    p.k2 = k2;
    return p;
  }
  throw FoldError("could not draw non-folding coefficients; check the k1 range");
}

Mat3 rotation_matrix(double pan_deg, double tilt_deg, double roll_deg) {
  for (double a : {pan_deg, tilt_deg, roll_deg}) {
    if (!std::isfinite(a)) throw DomainError("rotation angles must be finite");
  }
  // Positive tilt raises the view axis towards +y, i.e. a negative rotation
  // about +x in the right-handed frame.
  const Eigen::AngleAxisd pan(pan_deg * kDeg, Vec3::UnitY());
  const Eigen::AngleAxisd tilt(-tilt_deg * kDeg, Vec3::UnitX());
  const Eigen::AngleAxisd roll(roll_deg * kDeg, Vec3::UnitZ());
  return (pan * tilt * roll).toRotationMatrix();
}

Vec3 ray_for_pixel(double px, double py, const CameraIntrinsics& cam, const InversePolynomial& inv,
                   int width, int height) {
  const double w = width;
  const Point2 distorted{(px - width / 2.0) / w, (py - height / 2.0) / w};
  const Point2 u = undistort_point_poly(distorted, inv);
  const double f = cam.f_width_units();
  return Vec3(u.x / f, -u.y / f, 1.0).normalized();
}

Rgb equirect_lookup(const Image& pano, const Vec3& ray) {
  const double lon = std::atan2(ray.x(), ray.z());
  const double lat = std::asin(std::clamp(ray.y(), -1.0, 1.0));
  const double w = pano.width(), h = pano.height();
  const double u = (lon + std::numbers::pi) / (2.0 * std::numbers::pi) * w;
  const double v = (std::numbers::pi / 2.0 - lat) / std::numbers::pi * h;

  // Horizontal wraparound: interpolate between columns modulo the width.
  const double fx = u - 0.5;
  const double fy = std::clamp(v - 0.5, 0.0, h - 1.0);
  const double x0f = std::floor(fx);
  const double ax = fx - x0f;
  const int iw = pano.width();
  const int x0 = ((static_cast<int>(x0f) % iw) + iw) % iw;
  const int x1 = (x0 + 1) % iw;
  const int y0 = static_cast<int>(fy);
  const int y1 = std::min(y0 + 1, pano.height() - 1);
  const double ay = fy - y0;
  Rgb out{};
  for (int c = 0; c < Image::kChannels; ++c) {
    const double top = (1.0 - ax) * pano.at(x0, y0, c) + ax * pano.at(x1, y0, c);
    const double bottom = (1.0 - ax) * pano.at(x0, y1, c) + ax * pano.at(x1, y1, c);
    out[c] = (1.0 - ay) * top + ay * bottom;
  }
  return out;
}

Image render_crop(const Image& pano, const CropParams& p, int render_w, int render_h, int out_w,
                  int out_h, int workers) {
  if (render_w < 1 || render_h < 1) throw DomainError("render size must be positive");
  const RadialDistortion d = p.distortion();
  require_monotonic(d, corner_radius(render_w, render_h));
  const CameraIntrinsics cam = CameraIntrinsics::from_fov(p.fov);
  const InversePolynomial inv = inverse_coefficients(d);
  const Mat3 rot = rotation_matrix(p.pan, p.tilt, p.roll);

  Image render(render_w, render_h);
  parallel_for(
      0, static_cast<size_t>(render_h),
      [&](size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < render_w; ++x) {
          const Vec3 ray = rot * ray_for_pixel(x + 0.5, y + 0.5, cam, inv, render_w, render_h);
          render.set(x, y, equirect_lookup(pano, ray));
        }
      },
      workers);
  return resize_bilinear(render, out_w, out_h);
}

// --- procedural panorama -------------------------------------------------------

const std::vector<MarkerLine>& marker_lines() {
  static const std::vector<MarkerLine> markers = [] {
    const auto meridian = [](double lon_deg) {
      // Plane through the poles and longitude lon: normal (cos, 0, -sin).
      return Vec3(std::cos(lon_deg * kDeg), 0.0, -std::sin(lon_deg * kDeg));
    };
    const auto elevated = [](double psi_deg) {
      // Plane through the x axis, raised by psi: normal (0, cos, -sin).
      return Vec3(0.0, std::cos(psi_deg * kDeg), -std::sin(psi_deg * kDeg));
    };
    return std::vector<MarkerLine>{
        {"meridian_0", {255, 0, 0}, meridian(0.0)},
        {"meridian_p12", {255, 0, 255}, meridian(12.0)},
        {"meridian_m12", {0, 255, 255}, meridian(-12.0)},
        {"equator", {0, 0, 255}, elevated(0.0)},
        {"elevated_p8", {255, 255, 0}, elevated(8.0)},
    };
  }();
  return markers;
}

namespace {

constexpr double kGridSpacingDeg = 6.0;
constexpr double kGridHalfWidthDeg = 0.25;
constexpr double kMarkerHalfWidthDeg = 0.18;
constexpr double kStripeWidthDeg = 4.0;

// Angular distance from unit vector v to the nearest member of a family of
// great circles parametrized by angle phi = atan2(a, b), radius rho = |(a, b)|.
double family_distance(double a, double b, double spacing) {
  const double rho = std::hypot(a, b);
  const double phi = std::atan2(a, b);
  const double nearest = std::round(phi / spacing) * spacing;
  return std::asin(std::min(1.0, rho * std::abs(std::sin(phi - nearest))));
}

// Antialiased coverage of a band of half-width hw at distance dist, with one
// pixel of transition of size px.
double coverage(double dist, double hw, double px) {
  return std::clamp((hw - dist) / px + 0.5, 0.0, 1.0);
}

Rgb blend(const Rgb& under, const Rgb& over, double alpha) {
  return {under[0] + alpha * (over[0] - under[0]), under[1] + alpha * (over[1] - under[1]),
          under[2] + alpha * (over[2] - under[2])};
}

}  // namespace

Image procedural_panorama(int w, int h, PanoStyle style) {
  if (h < 2 || w != 2 * h) throw DomainError("equirectangular panorama needs w == 2 h");
  Image pano(w, h);
  const double px = 2.0 * std::numbers::pi / w;
  const double spacing = kGridSpacingDeg * kDeg;
  const auto& markers = marker_lines();

  parallel_for(0, static_cast<size_t>(h), [&](size_t row) {
    const double lat = std::numbers::pi / 2.0 - (row + 0.5) * std::numbers::pi / h;
    for (int x = 0; x < w; ++x) {
      const double lon = (x + 0.5) * px - std::numbers::pi;
      const Vec3 v(std::cos(lat) * std::sin(lon), std::sin(lat), std::cos(lat) * std::cos(lon));

      Rgb c;
      if (style == PanoStyle::Plain) {
        c = {128.0, 128.0, 128.0};
      } else if (lat < 0.0) {
        // Grass: darker towards the horizon, alternating mowing stripes.
        const double depth = std::min(1.0, -lat / (std::numbers::pi / 4.0));
        const int stripe = static_cast<int>(std::floor(lon / (kStripeWidthDeg * kDeg)));
        const double shade = (stripe & 1) ? 0.88 : 1.0;
        c = {(38.0 + 22.0 * depth) * shade, (100.0 + 45.0 * depth) * shade, (36.0 + 18.0 * depth) * shade};
      } else {
        const double t = std::min(1.0, lat / (std::numbers::pi / 3.0));
        c = {170.0 + 30.0 * t, 190.0 + 25.0 * t, 215.0 + 25.0 * t};
      }

      const double d_meridian = family_distance(v.x(), v.z(), spacing);
      const double d_elevated = family_distance(v.y(), v.z(), spacing);
      const double grid = std::max(coverage(d_meridian, kGridHalfWidthDeg * kDeg, px),
                                   coverage(d_elevated, kGridHalfWidthDeg * kDeg, px));
      c = blend(c, {235.0, 235.0, 235.0}, grid);

      for (const auto& m : markers) {
        const double dist = std::asin(std::min(1.0, std::abs(m.normal.dot(v))));
        const double a = coverage(dist, kMarkerHalfWidthDeg * kDeg, px);
        if (a > 0.0) c = blend(c, {double(m.color[0]), double(m.color[1]), double(m.color[2])}, a);
      }
      pano.set(x, static_cast<int>(row), c);
    }
  });
  return pano;
}

// --- manifests -----------------------------------------------------------------

namespace {

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json spec_json(const SamplingSpec& s) {
  return {{"pan", range_json(s.pan)},   {"tilt", range_json(s.tilt)}, {"roll", range_json(s.roll)},
          {"fov", range_json(s.fov)},   {"k1", range_json(s.k1)},     {"k2_sigma", s.k2_sigma},
          {"render_w", s.render_w},     {"render_h", s.render_h},     {"out_w", s.out_w},
          {"out_h", s.out_h},           {"seed", s.seed}};
}

SamplingSpec spec_from(const json& j) {
  SamplingSpec s;
  s.pan = range_from(j.at("pan"));
  s.tilt = range_from(j.at("tilt"));
  s.roll = range_from(j.at("roll"));
  s.fov = range_from(j.at("fov"));
  s.k1 = range_from(j.at("k1"));
  s.k2_sigma = j.at("k2_sigma").get<double>();
  s.render_w = j.at("render_w").get<int>();
  s.render_h = j.at("render_h").get<int>();
  s.out_w = j.at("out_w").get<int>();
  s.out_h = j.at("out_h").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

std::string crop_filename(std::uint64_t index, ImageFormat format) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "crop_%06llu.%s", static_cast<unsigned long long>(index),
                format == ImageFormat::Png ? "png" : "ppm");
  return buf;
}

}  // namespace

std::string manifest_to_text(const DatasetManifest& m) {
  std::string out =
      json{{"format", "rdist-manifest"}, {"version", m.version}, {"spec", spec_json(m.spec)}}.dump();
  out.push_back('\n');
  for (const auto& r : m.records) {
    const auto& p = r.params;
    // Keys are emitted in sorted order by nlohmann::json, which keeps the text
    // canonical for hashing.
    out += json{{"file", r.file}, {"index", p.index}, {"seed", p.seed}, {"pan", p.pan},
                {"tilt", p.tilt}, {"roll", p.roll},   {"fov", p.fov},   {"k1", p.k1},
                {"k2", p.k2}}
               .dump();
    out.push_back('\n');
  }
  return out;
}

DatasetManifest manifest_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  DatasetManifest m;
  bool have_header = false;
  int line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("format", "") != "rdist-manifest") throw FormatError("not an rdist manifest");
        m.version = j.at("version").get<int>();
        if (m.version != DatasetManifest::kVersion) {
          throw FormatError("unsupported manifest version " + std::to_string(m.version));
        }
        m.spec = spec_from(j.at("spec"));
        have_header = true;
        continue;
      }
      ManifestRecord r;
      r.file = j.at("file").get<std::string>();
      r.params.index = j.at("index").get<std::uint64_t>();
      r.params.seed = j.at("seed").get<std::uint64_t>();
      r.params.pan = j.at("pan").get<double>();
      r.params.tilt = j.at("tilt").get<double>();
      r.params.roll = j.at("roll").get<double>();
      r.params.fov = j.at("fov").get<double>();
      r.params.k1 = j.at("k1").get<double>();
      r.params.k2 = j.at("k2").get<double>();
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw FormatError("manifest has no header line");
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest_to_text(m);
  if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_text(ss.str());
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

DatasetManifest generate_dataset(std::span<const Image> panoramas, const SamplingSpec& spec,
                                 std::uint64_t count, const std::filesystem::path& out_dir,
                                 ImageFormat format, int workers) {
  spec.validate();
  if (panoramas.empty()) throw DomainError("at least one panorama is required");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest m;
  m.spec = spec;
  m.records.resize(count);
  std::atomic<std::uint64_t> written{0};
  try {
    parallel_for(
        0, count,
        [&](size_t i) {
          ManifestRecord& rec = m.records[i];
          rec.params = sample_crop_params(spec, i);
          rec.file = crop_filename(i, format);
          const Image crop = render_crop(panoramas[i % panoramas.size()], rec.params, spec.render_w,
                                         spec.render_h, spec.out_w, spec.out_h, 1);
          write_image(out_dir / rec.file, crop);
          ++written;
        },
        workers);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + std::to_string(written.load()) + " of " +
                  std::to_string(count) + " images written, no manifest)");
  }
  write_manifest(out_dir / "manifest.jsonl", m);
  return m;
}

DatasetManifest generate_dataset(std::span<const std::filesystem::path> panoramas,
                                 const SamplingSpec& spec, std::uint64_t count,
                                 const std::filesystem::path& out_dir, ImageFormat format,
                                 int workers) {
  std::vector<Image> images;
  images.reserve(panoramas.size());
  for (const auto& p : panoramas) images.push_back(read_image(p));
  return generate_dataset(std::span<const Image>(images), spec, count, out_dir, format, workers);
}

}  // namespace rdist
