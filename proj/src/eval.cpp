#include "rdist/eval.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "rdist/errors.hpp"

namespace rdist {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

}  // namespace

// --- sweep ----------------------------------------------------------------------------------

double SweepResult::max_error() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.max_error);
  return m;
}

SweepResult reprojection_sweep(double k1_min, double k1_max, int steps, const K2Rule& rule, double r_max,
                               int radii) {
  if (steps < 2) throw DomainError("sweep needs at least 2 steps");
  if (!std::isfinite(k1_min) || !std::isfinite(k1_max) || k1_min >= k1_max) {
    throw DomainError("sweep range must satisfy k1_min < k1_max");
  }
  const auto r = radius_range(r_max, radii);
  SweepResult out;
  out.rows.reserve(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    // Snap the exact endpoints so the extremes are evaluated exactly.
    const double k1 = i == steps - 1 ? k1_max : k1_min + (k1_max - k1_min) * i / (steps - 1);
    const double k2 = rule(k1);
    const RoundtripError e = roundtrip_error({k1, k2, 0.0, 0.0, CoordinateScale::WidthNormalized}, r);
    out.rows.push_back({k1, k2, e.max, e.mean});
  }
  return out;
}

std::string sweep_csv(const SweepResult& s) {
  std::ostringstream out;
  out << "k1,k2,max_error,mean_error\n";
  for (const auto& r : s.rows) {
    out << fmt_double(r.k1) << ',' << fmt_double(r.k2) << ',' << fmt_double(r.max_error) << ','
        << fmt_double(r.mean_error) << '\n';
  }
  return out.str();
}

// --- A/B ------------------------------------------------------------------------------------

double ABReport::win_rate_a() const {
  return records.empty() ? 0.0 : static_cast<double>(wins_a) / static_cast<double>(records.size());
}

ABReport ab_compare(std::span<const CoefficientPair> truth, std::span<const CoefficientPair> a,
                    std::span<const CoefficientPair> b, const RadiusGrid& grid) {
  if (truth.size() != a.size() || truth.size() != b.size()) {
    throw ShapeError("A/B comparison needs equally many truths and predictions");
  }
  ABReport r;
  r.records.reserve(truth.size());
  for (size_t i = 0; i < truth.size(); ++i) {
    ABRecord rec{truth[i], a[i], b[i], distortion_loss(truth[i], a[i], grid),
                 distortion_loss(truth[i], b[i], grid), Winner::B};
    if (rec.loss_a < rec.loss_b) {
      rec.winner = Winner::A;
      ++r.wins_a;
    }
    r.records.push_back(rec);
  }
  return r;
}

std::vector<CoefficientPair> manifold_variant(std::span<const CoefficientPair> pairs) {
  std::vector<CoefficientPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.k1, manifold_k2(p.k1)});
  return out;
}

std::string ab_csv(const ABReport& r) {
  std::ostringstream out;
  out << "index,k1_true,k2_true,k1_a,k2_a,k1_b,k2_b,loss_a,loss_b,winner\n";
  for (size_t i = 0; i < r.records.size(); ++i) {
    const auto& x = r.records[i];
    out << i << ',' << fmt_double(x.truth.k1) << ',' << fmt_double(x.truth.k2) << ',' << fmt_double(x.a.k1)
        << ',' << fmt_double(x.a.k2) << ',' << fmt_double(x.b.k1) << ',' << fmt_double(x.b.k2) << ','
        << fmt_double(x.loss_a) << ',' << fmt_double(x.loss_b) << ',' << (x.winner == Winner::A ? 'A' : 'B')
        << '\n';
  }
  out << "# win_rate_a," << fmt_double(r.win_rate_a()) << '\n';
  return out.str();
}

// --- histograms -------------------------------------------------------------------------------

Histogram histogram(std::span<const double> values, int bins, double lo, double hi) {
  if (values.empty()) throw DomainError("histogram of an empty set");
  if (bins < 1 || !(lo < hi)) throw DomainError("histogram needs bins >= 1 and lo < hi");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<size_t>(bins), 0);
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("histogram of a non-finite value");
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi) {
      ++h.overflow;
    } else {
      const auto b = static_cast<size_t>(std::floor((v - lo) / h.bin_width()));
      ++h.counts[std::min(b, h.counts.size() - 1)];
    }
  }
  const double n = static_cast<double>(values.size());
  h.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - h.mean) * (v - h.mean);
  h.stddev = std::sqrt(ss / n);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const size_t m = sorted.size() / 2;
  h.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  return h;
}

ErrorHistogram error_histogram(std::span<const CoefficientPair> predictions,
                               std::span<const CoefficientPair> labels, int bins) {
  if (predictions.size() != labels.size()) throw ShapeError("prediction and label counts differ");
  std::vector<double> e1, e2;
  for (size_t i = 0; i < labels.size(); ++i) {
    e1.push_back(predictions[i].k1 - labels[i].k1);
    e2.push_back(predictions[i].k2 - labels[i].k2);
  }
  return {histogram(e1, bins), histogram(e2, bins)};
}

std::string histogram_csv(const ErrorHistogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count_k1,count_k2\n";
  const double w = h.k1.bin_width();
  for (size_t i = 0; i < h.k1.counts.size(); ++i) {
    out << fmt_double(h.k1.lo + w * i) << ',' << fmt_double(h.k1.lo + w * (i + 1)) << ',' << h.k1.counts[i]
        << ',' << h.k2.counts[i] << '\n';
  }
  for (const auto& [name, x] : {std::pair{"k1", &h.k1}, std::pair{"k2", &h.k2}}) {
    out << "# " << name << " mean=" << fmt_double(x->mean) << " median=" << fmt_double(x->median)
        << " stddev=" << fmt_double(x->stddev) << " underflow=" << x->underflow << " overflow=" << x->overflow
        << '\n';
  }
  return out.str();
}

std::vector<PredictionRow> parse_predictions_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  const auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    return f;
  };
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      header = split(line);
      break;
    }
  }
  const auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("predictions CSV lacks column '" + name + "'");
    return static_cast<size_t>(it - header.begin());
  };
  const size_t cf = column("file"), c1 = column("k1"), c2 = column("k2"), t1 = column("k1_true"),
               t2 = column("k2_true");
  std::vector<PredictionRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw FormatError("predictions CSV line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    const auto num = [&](size_t c) {
      try {
        size_t used = 0;
        const double v = std::stod(f[c], &used);
        if (used != f[c].size()) throw std::invalid_argument("trailing characters");
        return v;
      } catch (const std::exception&) {
        throw FormatError("predictions CSV line " + std::to_string(lineno) + ": bad number '" + f[c] + "'");
      }
    };
    rows.push_back({f[cf], {num(c1), num(c2)}, {num(t1), num(t2)}});
  }
  return rows;
}

std::string predictions_csv(std::span<const PredictionRow> rows) {
  std::ostringstream out;
  out << "file,k1,k2,k1_true,k2_true\n";
  for (const auto& r : rows) {
    out << r.file << ',' << fmt_double(r.predicted.k1) << ',' << fmt_double(r.predicted.k2) << ','
        << fmt_double(r.truth.k1) << ',' << fmt_double(r.truth.k2) << '\n';
  }
  return out.str();
}

// --- geometry sidecar -------------------------------------------------------------------------

CropGeometry default_geometry(const CropParams& p, int width, int height, bool rectified) {
  CropGeometry g{p, width, height, rectified, {}};
  for (const auto& m : marker_lines()) g.lines.push_back({m.name, m.color});
  return g;
}

std::string geometry_to_json(const CropGeometry& g) {
  json lines = json::array();
  for (const auto& l : g.lines) lines.push_back({{"name", l.name}, {"color", l.color}});
  const json j = {{"width", g.width},
                  {"height", g.height},
                  {"rectified", g.rectified},
                  {"pan", g.params.pan},
                  {"tilt", g.params.tilt},
                  {"roll", g.params.roll},
                  {"fov", g.params.fov},
                  {"k1", g.params.k1},
                  {"k2", g.params.k2},
                  {"lines", lines}};
  return j.dump(2) + "\n";
}

CropGeometry geometry_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    CropGeometry g;
    g.width = j.at("width").get<int>();
    g.height = j.at("height").get<int>();
    g.rectified = j.value("rectified", false);
    g.params.pan = j.value("pan", 0.0);
    g.params.tilt = j.value("tilt", 0.0);
    g.params.roll = j.value("roll", 0.0);
    g.params.fov = j.value("fov", 60.0);
    g.params.k1 = j.value("k1", 0.0);
    g.params.k2 = j.value("k2", 0.0);
    for (const auto& l : j.at("lines")) {
      g.lines.push_back({l.at("name").get<std::string>(), l.at("color").get<std::array<std::uint8_t, 3>>()});
    }
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad geometry sidecar: ") + e.what());
  }
}

// --- straightness -----------------------------------------------------------------------------

namespace {

struct Sample {
  double x, y;
};

// Weighted centroid of the heaviest contiguous run in a line of weights.
bool heaviest_run(const std::vector<double>& w, double& centroid) {
  double best = 0.0;
  size_t i = 0;
  while (i < w.size()) {
    if (w[i] <= 0.0) {
      ++i;
      continue;
    }
    double sum = 0.0, moment = 0.0;
    for (; i < w.size() && w[i] > 0.0; ++i) {
      sum += w[i];
      moment += w[i] * (static_cast<double>(i) + 0.5);
    }
    if (sum > best) {
      best = sum;
      centroid = moment / sum;
    }
  }
  return best > 0.0;
}

}  // namespace

StraightnessReport straightness_check(const Image& img, std::span<const LineGeometry> lines,
                                      const StraightnessOptions& opt) {
  const int w = img.width(), h = img.height();
  StraightnessReport report;
  for (const auto& line : lines) {
    LineFit fit;
    fit.name = line.name;

    // Colour-key weights: 1 on the exact key, falling to 0 at the threshold.
    std::vector<double> weight(static_cast<size_t>(w) * h, 0.0);
    double sx = 0, sy = 0, sw = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double diff = static_cast<double>(img.at(x, y, c)) - line.color[static_cast<size_t>(c)];
          d2 += diff * diff;
        }
        const double d = std::sqrt(d2);
        if (d < opt.color_threshold) {
          const double wt = 1.0 - d / opt.color_threshold;
          weight[static_cast<size_t>(y) * w + x] = wt;
          ++fit.pixels;
          sx += wt * (x + 0.5);
          sy += wt * (y + 0.5);
          sw += wt;
        }
      }
    }
    if (fit.pixels < opt.min_pixels) {
      report.lines.push_back(fit);
      continue;
    }

    // Dominant direction of the pixel cloud picks row- or column-wise scanning.
    const double mx = sx / sw, my = sy / sw;
    double cxx = 0, cyy = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double wt = weight[static_cast<size_t>(y) * w + x];
        cxx += wt * (x + 0.5 - mx) * (x + 0.5 - mx);
        cyy += wt * (y + 0.5 - my) * (y + 0.5 - my);
      }
    }
    const bool steep = cyy > cxx;

    std::vector<Sample> samples;
    std::vector<double> scan;
    if (steep) {
      scan.resize(static_cast<size_t>(w));
      for (int y = 0; y < h; ++y) {
        std::copy_n(weight.begin() + static_cast<std::ptrdiff_t>(y) * w, w, scan.begin());
        double c = 0.0;
        if (heaviest_run(scan, c)) samples.push_back({c, y + 0.5});
      }
    } else {
      scan.resize(static_cast<size_t>(h));
      for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) scan[static_cast<size_t>(y)] = weight[static_cast<size_t>(y) * w + x];
        double c = 0.0;
        if (heaviest_run(scan, c)) samples.push_back({x + 0.5, c});
      }
    }
    fit.samples = samples.size();
    if (samples.size() < static_cast<size_t>(opt.min_samples)) {
      report.lines.push_back(fit);
      continue;
    }

    // Total least squares: the normal is the minor eigenvector of the scatter.
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& s : samples) mean += Eigen::Vector2d(s.x, s.y);
    mean /= static_cast<double>(samples.size());
    Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
    for (const auto& s : samples) {
      const Eigen::Vector2d d = Eigen::Vector2d(s.x, s.y) - mean;
      scatter += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scatter);
    const Eigen::Vector2d normal = es.eigenvectors().col(0);
    for (const auto& s : samples) {
      fit.sagitta = std::max(fit.sagitta, std::abs(normal.dot(Eigen::Vector2d(s.x, s.y) - mean)));
    }
    fit.found = true;
    report.max_sagitta = std::max(report.max_sagitta, fit.sagitta);
    report.lines.push_back(fit);
  }
  if (std::none_of(report.lines.begin(), report.lines.end(), [](const LineFit& f) { return f.found; })) {
    throw DetectionError("no marker line found in the image (too few matching pixels)");
  }
  return report;
}

}  // namespace rdist
