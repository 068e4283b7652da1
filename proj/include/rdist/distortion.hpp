#pragma once

// Closed-form radial distortion math for the polynomial model
//
//   r_d = r * (1 + k1 r^2 + k2 r^4 + k3 r^6 + k4 r^8)
//
// together with its four-term series inverse, coordinate-scale conversions and
// the empirical k1-k2 relation of real lenses. Everything here is a pure
// function of its arguments and runs in double precision.

#include <span>
#include <vector>

namespace rdist {

/// Coordinate system a set of coefficients applies to.
enum class CoordinateScale {
  NormalizedPlane,  ///< pinhole plane at Z=1 (focal length 1)
  WidthNormalized,  ///< image coordinates scaled so that the width equals 1
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

double norm(Point2 p);

struct RadialDistortion {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;
  CoordinateScale scale = CoordinateScale::WidthNormalized;

  bool is_identity() const { return k1 == 0.0 && k2 == 0.0 && k3 == 0.0 && k4 == 0.0; }
};

/// Coefficients of the series inverse r = r_d (1 + b1 r_d^2 + ... + b4 r_d^8).
struct InversePolynomial {
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
  double b4 = 0.0;
};

/// Pinhole intrinsics with the principal point at the image center. The focal
/// length is expressed in image-width units so that it is resolution free.
class CameraIntrinsics {
 public:
  /// Throws DomainError unless 0 < fov_h_deg < 180.
  static CameraIntrinsics from_fov(double fov_h_deg);

  double fov_h() const { return fov_h_; }
  double f_width_units() const { return f_; }

 private:
  CameraIntrinsics(double fov, double f) : fov_h_(fov), f_(f) {}
  double fov_h_;
  double f_;
};

/// Corner radius of a 16:9 frame whose width is 1.
inline constexpr double kCornerRadius16x9 = 0.5738;

/// Corner radius of a w x h frame in width units.
double corner_radius(int width, int height);

/// d(r) = 1 + k1 r^2 + k2 r^4 + k3 r^6 + k4 r^8. Requires r >= 0.
double distortion_factor(double r, const RadialDistortion& d);

/// Scalar radial map r -> r * d(r).
double distort_radius(double r, const RadialDistortion& d);

Point2 distort_point(Point2 p, const RadialDistortion& d);

/// Series inverse of the forward model up to the r^9 term.
InversePolynomial inverse_coefficients(const RadialDistortion& d);

double undistort_radius_poly(double r_d, const InversePolynomial& b);

Point2 undistort_point_poly(Point2 p_d, const InversePolynomial& b);

/// Inverts the forward map exactly with Newton iterations on the radius,
/// starting from r = r_d. Throws IterationError if |distort(r) - r_d| does not
/// drop to tol within max_iter steps.
Point2 undistort_point_newton(Point2 p_d, const RadialDistortion& d, double tol = 1e-12,
                              int max_iter = 50);

double undistort_radius_newton(double r_d, const RadialDistortion& d, double tol = 1e-12,
                               int max_iter = 50);

/// Re-expresses coefficients for coordinates scaled by s (r' = s r):
/// k_i' = k_i / s^(2i). Throws DomainError for s <= 0.
RadialDistortion rescale(const RadialDistortion& d, double s);

/// Converts normalized-plane coefficients to width-normalized image
/// coefficients of a camera with the given intrinsics.
RadialDistortion apparent_from_normalized(const RadialDistortion& d, const CameraIntrinsics& c);

/// The empirical k1-k2 relation observed for many real lenses.
double manifold_k2(double k1);

/// True when r * d(r) is strictly increasing on [0, r_max] (checked on
/// `samples` uniformly spaced radii).
bool is_monotonic(const RadialDistortion& d, double r_max, int samples = 256);

/// Throws FoldError when is_monotonic() is false.
void require_monotonic(const RadialDistortion& d, double r_max, int samples = 256);

struct RoundtripError {
  std::vector<double> radii;
  std::vector<double> errors;
  double max = 0.0;
  double mean = 0.0;
};

/// For each distorted radius r: |distort(undistort_poly(r)) - r|, i.e. how far
/// the series inverse followed by the exact forward model lands from where it
/// started.
RoundtripError roundtrip_error(const RadialDistortion& d, std::span<const double> radii);

/// n uniformly spaced radii on [0, r_max], both ends included.
std::vector<double> radius_range(double r_max = kCornerRadius16x9, int n = 512);

}  // namespace rdist
