#pragma once

// Evaluation harness: reprojection-error sweeps, direct-vs-manifold
// comparisons, error histograms and a line-straightness measurement on
// rendered marker circles.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rdist/distortion.hpp"
#include "rdist/image.hpp"
#include "rdist/loss.hpp"
#include "rdist/pano.hpp"

namespace rdist {

// --- reprojection sweep ----------------------------------------------------------

struct SweepRow {
  double k1 = 0.0;
  double k2 = 0.0;
  double max_error = 0.0;
  double mean_error = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double max_error() const;
};

using K2Rule = std::function<double(double k1)>;

/// Round-trip error (inverse polynomial, then forward) for `steps` uniformly
/// spaced k1 values in [k1_min, k1_max], k2 from `rule`. Throws DomainError
/// for steps < 2 or an inverted range.
SweepResult reprojection_sweep(double k1_min, double k1_max, int steps, const K2Rule& rule = manifold_k2,
                               double r_max = kCornerRadius16x9, int radii = 512);

/// Header "k1,k2,max_error,mean_error", one row per step.
std::string sweep_csv(const SweepResult& s);

// --- A/B comparison ----------------------------------------------------------------

enum class Winner { A, B };

struct ABRecord {
  CoefficientPair truth;
  CoefficientPair a;
  CoefficientPair b;
  double loss_a = 0.0;
  double loss_b = 0.0;
  Winner winner = Winner::B;
};

struct ABReport {
  std::vector<ABRecord> records;
  std::size_t wins_a = 0;
  double win_rate_a() const;
};

/// Per-sample distortion loss of each method against the truth. A wins only
/// on a strictly smaller loss.
ABReport ab_compare(std::span<const CoefficientPair> truth, std::span<const CoefficientPair> a,
                    std::span<const CoefficientPair> b, const RadiusGrid& grid = default_grid());

/// Method B of the comparison: keep k1, replace k2 by the manifold value.
std::vector<CoefficientPair> manifold_variant(std::span<const CoefficientPair> pairs);

std::string ab_csv(const ABReport& r);

// --- error histograms --------------------------------------------------------------

struct Histogram {
  double lo = -0.2;
  double hi = 0.2;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

/// Fixed-width bins over [lo, hi); a value equal to hi goes into the last
/// bin. Throws DomainError for empty input, bins < 1 or lo >= hi.
Histogram histogram(std::span<const double> values, int bins = 41, double lo = -0.2, double hi = 0.2);

struct ErrorHistogram {
  Histogram k1;
  Histogram k2;
};

/// Histograms of prediction - label per coefficient.
ErrorHistogram error_histogram(std::span<const CoefficientPair> predictions,
                               std::span<const CoefficientPair> labels, int bins = 41);

/// Header "bin_lo,bin_hi,count_k1,count_k2" followed by summary comment lines.
std::string histogram_csv(const ErrorHistogram& h);

struct PredictionRow {
  std::string file;
  CoefficientPair predicted;
  CoefficientPair truth;
};

/// Reads a CSV with columns file,k1,k2,k1_true,k2_true (any order, header
/// required). Throws FormatError on missing columns or bad numbers.
std::vector<PredictionRow> parse_predictions_csv(const std::string& text);
std::string predictions_csv(std::span<const PredictionRow> rows);

// --- straightness ---------------------------------------------------------------------

struct LineGeometry {
  std::string name;
  std::array<std::uint8_t, 3> color;
};

/// Sidecar describing a rendered crop: its camera parameters and the colour
/// keys of the marker lines drawn into the source panorama.
struct CropGeometry {
  CropParams params;
  int width = 0;
  int height = 0;
  bool rectified = false;
  std::vector<LineGeometry> lines;
};

CropGeometry default_geometry(const CropParams& p, int width, int height, bool rectified);
std::string geometry_to_json(const CropGeometry& g);
CropGeometry geometry_from_json(const std::string& text);

struct LineFit {
  std::string name;
  bool found = false;
  std::size_t pixels = 0;
  std::size_t samples = 0;
  double sagitta = 0.0;  ///< max perpendicular deviation from the fitted line, pixels
};

struct StraightnessReport {
  std::vector<LineFit> lines;
  double max_sagitta = 0.0;
};

struct StraightnessOptions {
  double color_threshold = 100.0;  ///< RGB distance for a pixel to match a key
  std::size_t min_pixels = 40;
  int min_samples = 10;
};

/// Finds each colour-keyed line, reduces it to one weighted centroid per
/// row (steep lines) or column (flat lines), fits a total-least-squares
/// line and reports the worst perpendicular deviation. Lines with too few
/// pixels are reported as not found; throws DetectionError if none is found.
StraightnessReport straightness_check(const Image& img, std::span<const LineGeometry> lines,
                                      const StraightnessOptions& opt = {});

}  // namespace rdist
