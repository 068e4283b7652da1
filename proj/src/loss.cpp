#include "rdist/loss.hpp"

#include <cmath>

#include "rdist/errors.hpp"

namespace rdist {

RadiusGrid::RadiusGrid(std::vector<double> radii) : radii_(std::move(radii)) {
  if (radii_.size() < 8) {
    throw DomainError("radius grid needs at least 8 radii");
  }
  double prev = 0.0;
  for (double r : radii_) {
    if (!(r > prev) || r > 0.7) {
      throw DomainError("radius grid must be strictly increasing within (0, 0.7]");
    }
    prev = r;
  }
}

RadiusGrid RadiusGrid::uniform(int n) {
  std::vector<double> r(static_cast<size_t>(std::max(n, 0)));
  for (int i = 1; i <= n; ++i) r[static_cast<size_t>(i - 1)] = 0.7 * i / n;
  // The last entry is pinned so rounding cannot push it past the interval end.
  if (!r.empty()) r.back() = 0.7;
  return RadiusGrid(std::move(r));
}

RadiusGrid default_grid() { return RadiusGrid::uniform(64); }

double distortion_curve(double r, const CoefficientPair& c) {
  const double r2 = r * r;
  return r * (1.0 + c.k1 * r2 + c.k2 * r2 * r2);
}

double distortion_loss(const CoefficientPair& y, const CoefficientPair& yhat, const RadiusGrid& g) {
  double sum = 0.0;
  for (double r : g.radii()) {
    const double diff = distortion_curve(r, y) - distortion_curve(r, yhat);
    sum += diff * diff;
  }
  return sum;
}

SplitLoss split_loss(const CoefficientPair& y, const CoefficientPair& yhat, const RadiusGrid& g) {
  SplitLoss out;
  out.l_k1 = distortion_loss(y, {yhat.k1, y.k2}, g);
  out.l_k2 = distortion_loss(y, {y.k1, yhat.k2}, g);
  out.total = out.l_k1 + out.l_k2;
  return out;
}

CoefficientPair loss_gradient(const CoefficientPair& y, const CoefficientPair& yhat,
                              const RadiusGrid& g) {
  // d p(r, c) / d k1 = r^3, d p(r, c) / d k2 = r^5. Each split term only sees
  // one predicted coefficient, so the two partials are independent.
  CoefficientPair grad;
  for (double r : g.radii()) {
    const double r3 = r * r * r;
    const double r5 = r3 * r * r;
    grad.k1 += -2.0 * r3 * (distortion_curve(r, y) - distortion_curve(r, {yhat.k1, y.k2}));
    grad.k2 += -2.0 * r5 * (distortion_curve(r, y) - distortion_curve(r, {y.k1, yhat.k2}));
  }
  return grad;
}

}  // namespace rdist
