#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rdist/errors.hpp"
#include "rdist/eval.hpp"
#include "rdist/random.hpp"

using namespace rdist;

TEST(Sweep, ZeroRowAndContinuity) {
  const SweepResult s = reprojection_sweep(-0.7, 0.3, 101);
  ASSERT_EQ(s.rows.size(), 101u);
  EXPECT_EQ(s.rows.front().k1, -0.7);
  EXPECT_EQ(s.rows.back().k1, 0.3);
  const auto zero = reprojection_sweep(-0.5, 0.5, 11).rows[5];
  EXPECT_NEAR(zero.k1, 0.0, 1e-15);
  EXPECT_EQ(zero.max_error, 0.0);
  for (size_t i = 0; i < s.rows.size(); ++i) {
    ASSERT_TRUE(std::isfinite(s.rows[i].max_error));
    ASSERT_GE(s.rows[i].max_error, 0.0);
    EXPECT_NEAR(s.rows[i].k2, manifold_k2(s.rows[i].k1), 1e-15);
    if (i > 0 && i + 1 < s.rows.size() && s.rows[i].max_error > 1e-9) {
      const double neighbours = std::max(s.rows[i - 1].max_error, s.rows[i + 1].max_error);
      EXPECT_LE(s.rows[i].max_error, 10 * neighbours);
    }
  }
}

// The residual changes sign near k1 = -0.61 and k1 = 0.11, so the curve has
// shallow local dips there; only the coarse shape is asserted.
TEST(Sweep, ExtremesDominate) {
  const SweepResult s = reprojection_sweep(-0.7, 0.3, 101);
  size_t lo = 0;
  for (size_t i = 0; i < s.rows.size(); ++i) {
    if (s.rows[i].max_error < s.rows[lo].max_error) lo = i;
  }
  EXPECT_LT(std::abs(s.rows[lo].k1), 0.05);
  double band = 0.0;
  for (size_t i = 0; i < s.rows.size(); ++i) {
    if (i < lo) EXPECT_LE(s.rows[i].max_error, s.rows.front().max_error);
    if (i > lo) EXPECT_LE(s.rows[i].max_error, s.rows.back().max_error);
    if (s.rows[i].k1 >= -0.3 && s.rows[i].k1 <= 0.1) band = std::max(band, s.rows[i].max_error);
  }
  EXPECT_LT(band, s.rows.front().max_error);
  for (const auto& row : s.rows) {
    if (row.k1 >= 0.0 && row.k1 <= 0.1) EXPECT_LT(row.max_error, s.rows.back().max_error);
  }
  // Strictly increasing away from zero over the central region.
  for (size_t i = 0; i < lo; ++i) {
    if (s.rows[i].k1 >= -0.45) EXPECT_GT(s.rows[i].max_error, s.rows[i + 1].max_error) << s.rows[i].k1;
  }
  for (size_t i = lo + 1; i < s.rows.size(); ++i) {
    if (s.rows[i].k1 <= 0.1) EXPECT_GT(s.rows[i].max_error, s.rows[i - 1].max_error) << s.rows[i].k1;
  }
}

TEST(Sweep, CsvAndErrors) {
  const std::string csv = sweep_csv(reprojection_sweep(-0.1, 0.1, 5));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k1,k2,max_error,mean_error");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
  EXPECT_THROW(reprojection_sweep(-0.1, 0.1, 1), DomainError);
  EXPECT_THROW(reprojection_sweep(0.1, -0.1, 5), DomainError);
}

TEST(ABCompare, OracleAlwaysWins) {
  CounterRng rng(1);
  std::vector<CoefficientPair> truth, b;
  for (int i = 0; i < 200; ++i) {
    const double k1 = rng.uniform(-0.7, 0.3);
    truth.push_back({k1, manifold_k2(k1) + rng.normal(0, 0.02)});
    b.push_back({k1 + 0.01, truth.back().k2});
  }
  const ABReport r = ab_compare(truth, truth, b);
  EXPECT_EQ(r.wins_a, 200u);
  EXPECT_EQ(r.win_rate_a(), 1.0);
}

TEST(ABCompare, PerturbedNeverBeatsExactManifold) {
  CounterRng rng(2);
  std::vector<CoefficientPair> truth, a;
  for (int i = 0; i < 200; ++i) {
    const double k1 = rng.uniform(-0.7, 0.3);
    truth.push_back({k1, manifold_k2(k1)});
    a.push_back({k1, manifold_k2(k1) + rng.normal(0, 0.02)});
  }
  const ABReport r = ab_compare(truth, a, manifold_variant(truth));
  EXPECT_EQ(r.wins_a, 0u);
}

TEST(ABCompare, NoisyLabelsFavourDirectPair) {
  CounterRng rng(3);
  std::vector<CoefficientPair> truth;
  for (int i = 0; i < 1000; ++i) {
    const double k1 = rng.uniform(-0.7, 0.3);
    truth.push_back({k1, manifold_k2(k1) + rng.normal(0, 0.02)});
  }
  const ABReport r = ab_compare(truth, truth, manifold_variant(truth));
  std::size_t noisy = 0;
  for (const auto& t : truth) noisy += t.k2 != manifold_k2(t.k1);
  EXPECT_EQ(r.wins_a, noisy);
}

TEST(ABCompare, AntisymmetricAndTiesGoToB) {
  CounterRng rng(4);
  std::vector<CoefficientPair> truth, a, b;
  for (int i = 0; i < 300; ++i) {
    truth.push_back({rng.uniform(-0.7, 0.3), rng.uniform(-0.1, 0.4)});
    a.push_back({rng.uniform(-0.7, 0.3), rng.uniform(-0.1, 0.4)});
    b.push_back({rng.uniform(-0.7, 0.3), rng.uniform(-0.1, 0.4)});
  }
  a[7] = b[7];
  const ABReport ab = ab_compare(truth, a, b), ba = ab_compare(truth, b, a);
  EXPECT_EQ(ab.records[7].winner, Winner::B);
  EXPECT_EQ(ba.records[7].winner, Winner::B);
  for (size_t i = 0; i < truth.size(); ++i) {
    if (i == 7) continue;
    EXPECT_NE(ab.records[i].winner, ba.records[i].winner);
  }
  EXPECT_THROW(ab_compare(truth, a, std::span<const CoefficientPair>(b).first(3)), ShapeError);
}

TEST(Histogram, SpikeSymmetryAndCoverage) {
  std::vector<CoefficientPair> labels;
  for (int i = 0; i < 50; ++i) labels.push_back({-0.1 + 0.004 * i, 0.02 * i});
  const ErrorHistogram perfect = error_histogram(labels, labels);
  ASSERT_EQ(perfect.k1.counts.size(), 41u);
  EXPECT_NEAR(perfect.k1.bin_width() * 41, 0.4, 1e-15);
  EXPECT_EQ(perfect.k1.counts[20], 50u);
  EXPECT_EQ(perfect.k1.mean, 0.0);
  EXPECT_EQ(perfect.k1.stddev, 0.0);

  std::vector<double> sym;
  for (double e : {0.013, 0.05, 0.11, 0.19}) {
    sym.push_back(e);
    sym.push_back(-e);
  }
  const Histogram h = histogram(sym);
  for (size_t i = 0; i < h.counts.size(); ++i) EXPECT_EQ(h.counts[i], h.counts[h.counts.size() - 1 - i]);
  EXPECT_NEAR(h.median, 0.0, 1e-15);

  const Histogram edges = histogram(std::vector<double>{-0.5, 0.2, 0.7});
  EXPECT_EQ(edges.underflow, 1u);
  EXPECT_EQ(edges.overflow, 1u);
  EXPECT_EQ(edges.counts.back(), 1u);
  EXPECT_THROW(histogram(std::vector<double>{}), DomainError);
}

TEST(PredictionsCsv, RoundTripAndErrors) {
  const std::vector<PredictionRow> rows = {{"a.ppm", {-0.1, 0.02}, {-0.12, 0.03}}, {"b.ppm", {0.2, 0.04}, {0.1, 0.0}}};
  const auto back = parse_predictions_csv(predictions_csv(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].file, "b.ppm");
  EXPECT_EQ(back[0].truth.k1, -0.12);
  EXPECT_THROW(parse_predictions_csv("file,k1\nx,1\n"), FormatError);
  EXPECT_THROW(parse_predictions_csv("file,k1,k2,k1_true,k2_true\nx,1,abc,0,0\n"), FormatError);
}

TEST(Geometry, JsonRoundTrip) {
  CropParams p;
  p.fov = 47.5;
  p.k1 = -0.123456789012;
  const CropGeometry g = default_geometry(p, 512, 288, true);
  const CropGeometry back = geometry_from_json(geometry_to_json(g));
  EXPECT_EQ(back.params.k1, p.k1);
  EXPECT_EQ(back.params.fov, 47.5);
  EXPECT_TRUE(back.rectified);
  ASSERT_EQ(back.lines.size(), marker_lines().size());
  EXPECT_EQ(back.lines[1].color, marker_lines()[1].color);
  EXPECT_THROW(geometry_from_json("{}"), FormatError);
}

TEST(Straightness, RectificationRestoresLines) {
  const Image pano = procedural_panorama(4096, 2048);
  CropParams p;
  p.fov = 50;
  p.k1 = -0.5;
  p.k2 = manifold_k2(-0.5);
  const Image crop = render_crop(pano, p, 512, 288, 512, 288, 1);
  const auto lines = default_geometry(p, 512, 288, false).lines;
  const auto raw = straightness_check(crop, lines);
  const auto fixed = straightness_check(rectify(crop, p.distortion()), lines);
  EXPECT_LE(fixed.max_sagitta, 1.0);
  EXPECT_GT(raw.max_sagitta, fixed.max_sagitta);
  for (const auto& l : fixed.lines) EXPECT_TRUE(l.found) << l.name;
}

TEST(Straightness, SyntheticLineAndMissing) {
  Image img(100, 60, 40);
  for (int y = 0; y < 60; ++y) {
    const int x = 20 + y / 3;
    img.set(x, y, {255, 0, 0});
    img.set(x + 1, y, {255, 0, 0});
  }
  const std::vector<LineGeometry> red = {{"red", {255, 0, 0}}};
  const auto r = straightness_check(img, red);
  ASSERT_TRUE(r.lines[0].found);
  EXPECT_LT(r.max_sagitta, 0.5);
  const std::vector<LineGeometry> green = {{"green", {0, 255, 0}}};
  EXPECT_THROW(straightness_check(img, green), DetectionError);
}
