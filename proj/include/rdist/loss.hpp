#pragma once

// Distortion-area loss between two radial distortion curves
//
//   p(r, (k1, k2)) = r (1 + k1 r^2 + k2 r^4)
//   DL(y, yhat)    = sum_i (p(r_i, y) - p(r_i, yhat))^2
//
// and its per-coefficient split used for training.

#include <span>
#include <vector>

namespace rdist {

/// Width-normalized (k1, k2) pair.
struct CoefficientPair {
  double k1 = 0.0;
  double k2 = 0.0;

  friend bool operator==(const CoefficientPair&, const CoefficientPair&) = default;
};

/// Strictly increasing radii in (0, 0.7], at least 8 of them.
class RadiusGrid {
 public:
  /// Throws DomainError when the invariants do not hold.
  explicit RadiusGrid(std::vector<double> radii);

  /// n uniform radii 0.7 i / n, i = 1..n.
  static RadiusGrid uniform(int n = 64);

  std::span<const double> radii() const { return radii_; }
  size_t size() const { return radii_.size(); }

 private:
  std::vector<double> radii_;
};

/// Uniform 64-point grid on (0, 0.7].
RadiusGrid default_grid();

/// p(r, c) = r (1 + k1 r^2 + k2 r^4).
double distortion_curve(double r, const CoefficientPair& c);

double distortion_loss(const CoefficientPair& y, const CoefficientPair& yhat, const RadiusGrid& g);

struct SplitLoss {
  double l_k1 = 0.0;
  double l_k2 = 0.0;
  double total = 0.0;
};

/// L_k1 = DL(y, (yhat.k1, y.k2)), L_k2 = DL(y, (y.k1, yhat.k2)).
SplitLoss split_loss(const CoefficientPair& y, const CoefficientPair& yhat, const RadiusGrid& g);

/// Gradient of split_loss(...).total with respect to (yhat.k1, yhat.k2).
CoefficientPair loss_gradient(const CoefficientPair& y, const CoefficientPair& yhat,
                              const RadiusGrid& g);

}  // namespace rdist
