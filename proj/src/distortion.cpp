#include "rdist/distortion.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "rdist/errors.hpp"

namespace rdist {
namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be finite");
  }
}

void require_finite(const RadialDistortion& d) {
  require_finite(d.k1, "k1");
  require_finite(d.k2, "k2");
  require_finite(d.k3, "k3");
  require_finite(d.k4, "k4");
}

void require_finite(Point2 p) {
  require_finite(p.x, "x");
  require_finite(p.y, "y");
}

// Derivative of r * d(r) with respect to r.
double distort_radius_derivative(double r, const RadialDistortion& d) {
  const double r2 = r * r;
  return 1.0 + r2 * (3.0 * d.k1 + r2 * (5.0 * d.k2 + r2 * (7.0 * d.k3 + r2 * 9.0 * d.k4)));
}

Point2 scale_point(Point2 p, double s) { return {p.x * s, p.y * s}; }

}  // namespace

double norm(Point2 p) { return std::hypot(p.x, p.y); }

CameraIntrinsics CameraIntrinsics::from_fov(double fov_h_deg) {
  if (!(fov_h_deg > 0.0 && fov_h_deg < 180.0)) {
    throw DomainError("horizontal field of view must lie in (0, 180) degrees");
  }
  const double half = fov_h_deg * std::numbers::pi / 360.0;
  return {fov_h_deg, 0.5 / std::tan(half)};
}

double corner_radius(int width, int height) {
  const double aspect = static_cast<double>(height) / width;
  return std::hypot(0.5, 0.5 * aspect);
}

double distortion_factor(double r, const RadialDistortion& d) {
  require_finite(r, "radius");
  require_finite(d);
  if (r < 0.0) {
    throw DomainError("radius must be non-negative");
  }
  const double r2 = r * r;
  return 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * (d.k3 + r2 * d.k4)));
}

double distort_radius(double r, const RadialDistortion& d) { return r * distortion_factor(r, d); }

Point2 distort_point(Point2 p, const RadialDistortion& d) {
  require_finite(p);
  return scale_point(p, distortion_factor(norm(p), d));
}

InversePolynomial inverse_coefficients(const RadialDistortion& d) {
  require_finite(d);
  const double k1 = d.k1, k2 = d.k2, k3 = d.k3, k4 = d.k4;
  const double k1_2 = k1 * k1;
  InversePolynomial b;
  b.b1 = -k1;
  b.b2 = 3.0 * k1_2 - k2;
  b.b3 = -12.0 * k1_2 * k1 + 8.0 * k1 * k2 - k3;
  b.b4 = 55.0 * k1_2 * k1_2 - 55.0 * k1_2 * k2 + 5.0 * k2 * k2 + 10.0 * k1 * k3 - k4;
  return b;
}

double undistort_radius_poly(double r_d, const InversePolynomial& b) {
  require_finite(r_d, "radius");
  const double r2 = r_d * r_d;
  return r_d * (1.0 + r2 * (b.b1 + r2 * (b.b2 + r2 * (b.b3 + r2 * b.b4))));
}

Point2 undistort_point_poly(Point2 p_d, const InversePolynomial& b) {
  require_finite(p_d);
  const double r2 = p_d.x * p_d.x + p_d.y * p_d.y;
  const double s = 1.0 + r2 * (b.b1 + r2 * (b.b2 + r2 * (b.b3 + r2 * b.b4)));
  return scale_point(p_d, s);
}

double undistort_radius_newton(double r_d, const RadialDistortion& d, double tol, int max_iter) {
  require_finite(r_d, "radius");
  require_finite(d);
  double r = r_d;
  double residual = distort_radius(r, d) - r_d;
  for (int it = 0; it < max_iter && std::abs(residual) > tol; ++it) {
    const double slope = distort_radius_derivative(r, d);
    if (slope == 0.0 || !std::isfinite(slope)) break;
    r -= residual / slope;
    residual = distort_radius(std::abs(r), d) - r_d;
  }
  if (!(std::abs(residual) <= tol)) {
    std::ostringstream msg;
    msg << "Newton inversion did not converge for r_d=" << r_d << " (residual " << residual << ")";
    throw IterationError(msg.str(), residual);
  }
  return r;
}

Point2 undistort_point_newton(Point2 p_d, const RadialDistortion& d, double tol, int max_iter) {
  require_finite(p_d);
  const double r_d = norm(p_d);
  if (r_d == 0.0) return {0.0, 0.0};
  const double r = undistort_radius_newton(r_d, d, tol, max_iter);
  return scale_point(p_d, r / r_d);
}

RadialDistortion rescale(const RadialDistortion& d, double s) {
  require_finite(d);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw DomainError("scale factor must be positive and finite");
  }
  const double s2 = s * s;
  RadialDistortion out = d;
  out.k1 = d.k1 / s2;
  out.k2 = d.k2 / (s2 * s2);
  out.k3 = d.k3 / (s2 * s2 * s2);
  out.k4 = d.k4 / (s2 * s2 * s2 * s2);
  return out;
}

RadialDistortion apparent_from_normalized(const RadialDistortion& d, const CameraIntrinsics& c) {
  RadialDistortion out = rescale(d, c.f_width_units());
  out.scale = CoordinateScale::WidthNormalized;
  return out;
}

double manifold_k2(double k1) { return 0.019 * k1 + 0.805 * k1 * k1; }

bool is_monotonic(const RadialDistortion& d, double r_max, int samples) {
  require_finite(d);
  if (samples < 2) samples = 2;
  double prev = 0.0;
  for (int i = 1; i < samples; ++i) {
    const double r = r_max * i / (samples - 1);
    const double v = distort_radius(r, d);
    if (!(v > prev)) return false;
    prev = v;
  }
  return true;
}

void require_monotonic(const RadialDistortion& d, double r_max, int samples) {
  if (!is_monotonic(d, r_max, samples)) {
    std::ostringstream msg;
    msg << "distortion (k1=" << d.k1 << ", k2=" << d.k2 << ") folds the image within radius "
        << r_max;
    throw FoldError(msg.str());
  }
}

RoundtripError roundtrip_error(const RadialDistortion& d, std::span<const double> radii) {
  const InversePolynomial b = inverse_coefficients(d);
  RoundtripError out;
  out.radii.assign(radii.begin(), radii.end());
  out.errors.reserve(radii.size());
  double sum = 0.0;
  for (double r : radii) {
    const double e = std::abs(distort_radius(undistort_radius_poly(r, b), d) - r);
    out.errors.push_back(e);
    out.max = std::max(out.max, e);
    sum += e;
  }
  if (!radii.empty()) out.mean = sum / static_cast<double>(radii.size());
  return out;
}

std::vector<double> radius_range(double r_max, int n) {
  std::vector<double> r(static_cast<size_t>(std::max(n, 2)));
  for (size_t i = 0; i < r.size(); ++i) {
    r[i] = r_max * static_cast<double>(i) / static_cast<double>(r.size() - 1);
  }
  return r;
}

}  // namespace rdist
