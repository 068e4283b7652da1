#include "rdist/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "rdist/distortion.hpp"
#include "rdist/errors.hpp"
#include "rdist/eval.hpp"
#include "rdist/image.hpp"
#include "rdist/network.hpp"
#include "rdist/pano.hpp"
#include "rdist/parallel.hpp"
#include "rdist/train.hpp"

namespace rdist {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  int verbosity = 0;
  int threads = 0;
  std::uint64_t seed = 0;
};

class Log {
 public:
  Log(std::ostream& err, const GlobalOptions& g) : err_(err), g_(g) {}
  void info(const std::string& msg) const {
    if (g_.verbosity >= 1) err_ << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (g_.verbosity >= 2) err_ << msg << '\n';
  }

 private:
  std::ostream& err_;
  const GlobalOptions& g_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

PanoStyle parse_style(const std::string& s) { return s == "plain" ? PanoStyle::Plain : PanoStyle::Field; }

Image load_or_generate_pano(const std::string& path, int width, const std::string& style) {
  if (!path.empty()) return read_image(path);
  return procedural_panorama(width, width / 2, parse_style(style));
}

Image to_input_size(const Image& img, int size) {
  if (img.width() == size && img.height() == size) return img;
  return resize_bilinear(img, size, size);
}

// --- subcommands ----------------------------------------------------------------------------

struct SynthArgs {
  std::vector<std::string> panos;
  std::string pano_dir;
  int pano_width = 2048;
  std::string pano_style = "field";
  std::uint64_t count = 1000;
  std::string out_dir;
  std::string format = "ppm";
  SamplingSpec spec;
};

void add_range(CLI::App* app, const std::string& name, Range& r, const std::string& unit) {
  app->add_option("--" + name + "-min", r.lo, "Lower bound of " + name + unit)->capture_default_str();
  app->add_option("--" + name + "-max", r.hi, "Upper bound of " + name + unit)->capture_default_str();
}

int run_synth(const SynthArgs& a, const GlobalOptions& g, const Log& log, std::ostream& out) {
  SamplingSpec spec = a.spec;
  spec.seed = g.seed;
  spec.validate();
  const ImageFormat format = a.format == "png" ? ImageFormat::Png : ImageFormat::Ppm;
  std::vector<fs::path> paths(a.panos.begin(), a.panos.end());
  if (!a.pano_dir.empty()) {
    std::error_code ec;
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(a.pano_dir, ec)) {
      const auto ext = e.path().extension().string();
      if (ext == ".ppm" || ext == ".png" || ext == ".pnm") found.push_back(e.path());
    }
    if (ec) throw IoError("cannot list " + a.pano_dir + ": " + ec.message());
    std::sort(found.begin(), found.end());
    paths.insert(paths.end(), found.begin(), found.end());
  }
  DatasetManifest m;
  if (paths.empty()) {
    log.info("no panoramas given; using a procedural panorama of width " + std::to_string(a.pano_width));
    const Image pano = procedural_panorama(a.pano_width, a.pano_width / 2, parse_style(a.pano_style));
    m = generate_dataset(std::span<const Image>(&pano, 1), spec, a.count, a.out_dir, format, g.threads);
  } else {
    m = generate_dataset(paths, spec, a.count, a.out_dir, format, g.threads);
  }
  const fs::path manifest = fs::path(a.out_dir) / "manifest.jsonl";
  out << "wrote " << m.records.size() << " crops and " << manifest.string() << " (hash "
      << file_hash(manifest) << ")\n";
  return kExitOk;
}

struct TrainArgs {
  std::string manifest;
  std::string val_manifest;
  std::string out;
  std::string init;
  std::string log_csv;
  std::string optimizer = "adam";
  std::string schedule = "constant";
  TrainConfig tc;
  NetworkConfig net;
};

int run_train(const TrainArgs& a, const GlobalOptions& g, const Log& log, std::ostream& out) {
  TrainConfig tc = a.tc;
  tc.seed = g.seed;
  tc.optimizer = a.optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
  tc.schedule = a.schedule == "cosine" ? LrSchedule::Cosine : LrSchedule::Constant;
  tc.validate();

  Weights w;
  NetworkConfig cfg = a.net;
  if (!a.init.empty()) {
    w = load_weights(a.init);
    cfg = infer_config(w, a.net.input_size);
  } else {
    w = init_weights(cfg, g.seed);
  }
  log.info("loading " + a.manifest);
  const Dataset train_set = load_dataset(a.manifest, cfg.input_size);
  std::optional<Dataset> val;
  if (!a.val_manifest.empty()) val = load_dataset(a.val_manifest, cfg.input_size);

  std::ostringstream csv;
  csv << "epoch,train_loss,val_loss,learning_rate\n";
  const auto on_epoch = [&](const EpochLog& l) {
    csv << l.epoch << ',' << num(l.train_loss) << ',' << num(l.val_loss) << ',' << num(l.learning_rate) << '\n';
    out << "epoch " << l.epoch << " train " << num(l.train_loss);
    if (val) out << " val " << num(l.val_loss);
    out << '\n';
  };
  try {
    const TrainResult r = train(w, cfg, train_set, val ? &*val : nullptr, tc, on_epoch);
    save_weights(a.out, r.weights);
  } catch (const TrainingError& e) {
    const fs::path salvage = a.out + ".last_good";
    save_weights(salvage, e.last_good());
    if (!a.log_csv.empty()) write_text(a.log_csv, csv.str());
    throw NumericError(std::string(e.what()) + "; last good weights saved to " + salvage.string());
  }
  if (!a.log_csv.empty()) write_text(a.log_csv, csv.str());
  out << "saved " << a.out << '\n';
  return kExitOk;
}

struct PredictArgs {
  std::string weights;
  std::vector<std::string> images;
  std::string manifest;
  std::string csv;
  bool json = false;
  int input_size = 64;
};

int run_predict(const PredictArgs& a, const Log& log, std::ostream& out) {
  const Weights w = load_weights(a.weights);
  const NetworkConfig cfg = infer_config(w, a.input_size);
  std::vector<PredictionRow> rows;
  Dataset data;
  if (!a.manifest.empty()) {
    const DatasetManifest m = read_manifest(a.manifest);
    data = load_dataset(a.manifest, cfg.input_size);
    for (const auto& r : m.records) rows.push_back({r.file, {}, {r.params.k1, r.params.k2}});
  }
  for (const auto& path : a.images) {
    data.images.push_back(to_input_size(read_image(path), cfg.input_size));
    data.labels.push_back({std::nan(""), std::nan("")});
    rows.push_back({path, {}, {std::nan(""), std::nan("")}});
  }
  if (rows.empty()) throw IoError("no images given");
  log.info("predicting " + std::to_string(rows.size()) + " images");
  const Predictions p = predict_all(w, cfg, data);
  for (size_t i = 0; i < rows.size(); ++i) {
    rows[i].predicted = {p.k1[i], p.k2[i]};
    if (a.json) {
      nlohmann::json j = {{"file", rows[i].file}, {"k1", p.k1[i]}, {"k2", p.k2[i]}};
      if (std::isfinite(rows[i].truth.k1)) {
        j["k1_true"] = rows[i].truth.k1;
        j["k2_true"] = rows[i].truth.k2;
      }
      out << j.dump() << '\n';
    } else {
      out << rows[i].file << ' ' << num(p.k1[i]) << ' ' << num(p.k2[i]) << '\n';
    }
  }
  if (!a.csv.empty()) write_text(a.csv, predictions_csv(rows));
  return kExitOk;
}

struct RectifyArgs {
  std::string in;
  std::string out;
  std::optional<double> k1;
  std::optional<double> k2;
  std::string weights;
  int input_size = 64;
};

int run_rectify(const RectifyArgs& a, const Log& log, std::ostream& out) {
  const Image img = read_image(a.in);
  RadialDistortion d;
  if (!a.weights.empty()) {
    const Weights w = load_weights(a.weights);
    const NetworkConfig cfg = infer_config(w, a.input_size);
    const CoefficientPair c = predict(w, cfg, to_input_size(img, cfg.input_size));
    d = {c.k1, c.k2, 0.0, 0.0, CoordinateScale::WidthNormalized};
    log.info("predicted k1=" + num(c.k1) + " k2=" + num(c.k2));
  } else {
    d = {*a.k1, a.k2.value_or(0.0), 0.0, 0.0, CoordinateScale::WidthNormalized};
  }
  write_image(a.out, rectify(img, d));
  out << "rectified with k1=" << num(d.k1) << " k2=" << num(d.k2) << " -> " << a.out << '\n';
  return kExitOk;
}

struct SweepArgs {
  double k1_min = -0.7;
  double k1_max = 0.3;
  int steps = 101;
  double r_max = kCornerRadius16x9;
  std::string out;
};

int run_sweep(const SweepArgs& a, std::ostream& out) {
  const SweepResult s = reprojection_sweep(a.k1_min, a.k1_max, a.steps, manifold_k2, a.r_max);
  const std::string csv = sweep_csv(s);
  if (a.out.empty()) {
    out << csv;
  } else {
    write_text(a.out, csv);
    out << "max round-trip error " << num(s.max_error()) << " over " << s.rows.size() << " steps -> " << a.out
        << '\n';
  }
  return kExitOk;
}

struct ABArgs {
  std::string manifest;
  std::string weights;
  bool oracle = false;
  std::string out;
  int input_size = 64;
};

int run_ab(const ABArgs& a, std::ostream& out) {
  const DatasetManifest m = read_manifest(a.manifest);
  std::vector<CoefficientPair> truth;
  for (const auto& r : m.records) truth.push_back({r.params.k1, r.params.k2});
  std::vector<CoefficientPair> direct;
  if (a.oracle) {
    direct = truth;
  } else {
    if (a.weights.empty()) throw CLI::RequiredError("--weights or --oracle");
    const Weights w = load_weights(a.weights);
    const NetworkConfig cfg = infer_config(w, a.input_size);
    const Predictions p = predict_all(w, cfg, load_dataset(a.manifest, cfg.input_size));
    for (size_t i = 0; i < p.k1.size(); ++i) direct.push_back({p.k1[i], p.k2[i]});
  }
  const ABReport r = ab_compare(truth, direct, manifold_variant(direct));
  if (!a.out.empty()) write_text(a.out, ab_csv(r));
  out << "A (direct k1, k2) wins " << r.wins_a << " of " << r.records.size() << " (" << num(100.0 * r.win_rate_a())
      << "%)\n";
  return kExitOk;
}

struct HistArgs {
  std::string predictions;
  std::string out;
  int bins = 41;
};

int run_hist(const HistArgs& a, std::ostream& out) {
  const auto rows = parse_predictions_csv(read_text(a.predictions));
  std::vector<CoefficientPair> pred, truth;
  for (const auto& r : rows) {
    if (!std::isfinite(r.truth.k1) || !std::isfinite(r.truth.k2)) continue;
    pred.push_back(r.predicted);
    truth.push_back(r.truth);
  }
  if (pred.empty()) throw FormatError("no rows with ground truth in " + a.predictions);
  const ErrorHistogram h = error_histogram(pred, truth, a.bins);
  const std::string csv = histogram_csv(h);
  if (a.out.empty()) {
    out << csv;
  } else {
    write_text(a.out, csv);
    out << "k1 error median " << num(h.k1.median) << " stddev " << num(h.k1.stddev) << "; k2 error median "
        << num(h.k2.median) << " stddev " << num(h.k2.stddev) << " -> " << a.out << '\n';
  }
  return kExitOk;
}

struct StraightArgs {
  std::string image;
  std::string geometry;
  bool json = false;
  StraightnessOptions opt;
};

int run_straightness(const StraightArgs& a, std::ostream& out) {
  const Image img = read_image(a.image);
  const CropGeometry g =
      a.geometry.empty() ? default_geometry({}, img.width(), img.height(), false) : geometry_from_json(read_text(a.geometry));
  const StraightnessReport r = straightness_check(img, g.lines, a.opt);
  if (a.json) {
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& l : r.lines) {
      lines.push_back({{"name", l.name}, {"found", l.found}, {"pixels", l.pixels}, {"sagitta", l.sagitta}});
    }
    out << nlohmann::json{{"max_sagitta", r.max_sagitta}, {"lines", lines}}.dump() << '\n';
  } else {
    for (const auto& l : r.lines) {
      out << l.name << ' ' << (l.found ? num(l.sagitta) : std::string("not-found")) << '\n';
    }
    out << "max_sagitta " << num(r.max_sagitta) << '\n';
  }
  return kExitOk;
}

struct PanoArgs {
  int width = 2048;
  int height = 0;
  std::string style = "field";
  std::string out;
};

int run_pano(const PanoArgs& a, std::ostream& out) {
  const int h = a.height > 0 ? a.height : a.width / 2;
  if (a.width != 2 * h) throw DomainError("equirectangular panoramas need width == 2 * height");
  write_image(a.out, procedural_panorama(a.width, h, parse_style(a.style)));
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

struct RenderArgs {
  std::string pano;
  int pano_width = 4096;
  std::string style = "field";
  CropParams p;
  int width = 512;
  int height = 288;
  std::string out;
  std::string geometry;
  bool rectified = false;
};

int run_render(const RenderArgs& a, const GlobalOptions& g, std::ostream& out) {
  CameraIntrinsics::from_fov(a.p.fov);
  const Image pano = load_or_generate_pano(a.pano, a.pano_width, a.style);
  Image img = render_crop(pano, a.p, a.width, a.height, a.width, a.height, g.threads);
  if (a.rectified) img = rectify(img, a.p.distortion());
  write_image(a.out, img);
  const std::string sidecar = a.geometry.empty() ? a.out + ".json" : a.geometry;
  write_text(sidecar, geometry_to_json(default_geometry(a.p, a.width, a.height, a.rectified)));
  out << "wrote " << a.out << " and " << sidecar << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radial distortion toolkit: synthesis, estimation, rectification and evaluation", "rdist"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_flag("-v,--verbose", g.verbosity, "Increase log verbosity (repeatable)");
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Seed for every randomized step")->capture_default_str();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Render labeled distorted crops from panoramas");
  c_synth->add_option("--pano", synth.panos, "Equirectangular panorama (PPM/PNG), repeatable");
  c_synth->add_option("--pano-dir", synth.pano_dir, "Directory of panoramas");
  c_synth->add_option("--pano-width", synth.pano_width, "Width of the procedural panorama used when none is given")
      ->capture_default_str();
  c_synth->add_option("--pano-style", synth.pano_style, "Procedural style")->check(CLI::IsMember({"field", "plain"}));
  c_synth->add_option("--count", synth.count, "Number of crops")->capture_default_str();
  c_synth->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  c_synth->add_option("--format", synth.format, "Crop format")->check(CLI::IsMember({"ppm", "png"}));
  add_range(c_synth, "pan", synth.spec.pan, " (degrees)");
  add_range(c_synth, "tilt", synth.spec.tilt, " (degrees)");
  add_range(c_synth, "roll", synth.spec.roll, " (degrees)");
  add_range(c_synth, "fov", synth.spec.fov, " (degrees)");
  add_range(c_synth, "k1", synth.spec.k1, "");
  c_synth->add_option("--k2-sigma", synth.spec.k2_sigma, "Std. dev. of k2 around the manifold")->capture_default_str();
  c_synth->add_option("--render-w", synth.spec.render_w)->capture_default_str();
  c_synth->add_option("--render-h", synth.spec.render_h)->capture_default_str();
  c_synth->add_option("--out-w", synth.spec.out_w)->capture_default_str();
  c_synth->add_option("--out-h", synth.spec.out_h)->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the estimator on a synthesized dataset");
  c_train->add_option("--manifest", tr.manifest, "Training manifest")->required();
  c_train->add_option("--val-manifest", tr.val_manifest, "Validation manifest");
  c_train->add_option("--out", tr.out, "Output weights file")->required();
  c_train->add_option("--init", tr.init, "Start from these weights instead of a fresh initialization");
  c_train->add_option("--log", tr.log_csv, "Per-epoch loss CSV");
  c_train->add_option("--epochs", tr.tc.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
  c_train->add_option("--lr", tr.tc.learning_rate)->capture_default_str();
  c_train->add_option("--batch", tr.tc.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  c_train->add_option("--schedule", tr.schedule)->check(CLI::IsMember({"constant", "cosine"}))->capture_default_str();
  c_train->add_option("--input-size", tr.net.input_size)->capture_default_str();
  c_train->add_option("--channels", tr.net.stage_channels, "Channels per stage")->capture_default_str();
  c_train->add_option("--blocks", tr.net.blocks_per_stage, "Residual blocks per stage")->capture_default_str();
  c_train->add_option("--head-width", tr.net.head_width)->capture_default_str();

  PredictArgs pr;
  auto* c_predict = app.add_subcommand("predict", "Estimate (k1, k2) for images");
  c_predict->add_option("--weights", pr.weights)->required();
  c_predict->add_option("images", pr.images, "Image files");
  c_predict->add_option("--manifest", pr.manifest, "Predict every record of a manifest");
  c_predict->add_option("--csv", pr.csv, "Write file,k1,k2,k1_true,k2_true rows");
  c_predict->add_flag("--json", pr.json, "One JSON record per image");
  c_predict->add_option("--input-size", pr.input_size)->capture_default_str();

  RectifyArgs rc;
  auto* c_rectify = app.add_subcommand("rectify", "Remove radial distortion from an image");
  c_rectify->add_option("input", rc.in)->required();
  c_rectify->add_option("output", rc.out)->required();
  auto* o_k1 = c_rectify->add_option("--k1", rc.k1, "Width-normalized k1");
  auto* o_k2 = c_rectify->add_option("--k2", rc.k2, "Width-normalized k2");
  auto* o_w = c_rectify->add_option("--weights", rc.weights, "Estimate the coefficients with this model");
  c_rectify->add_option("--input-size", rc.input_size)->capture_default_str();
  o_k2->needs(o_k1);
  o_w->excludes(o_k1)->excludes(o_k2);

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "Round-trip reprojection error over a k1 range");
  c_sweep->add_option("--k1-min", sw.k1_min)->capture_default_str();
  c_sweep->add_option("--k1-max", sw.k1_max)->capture_default_str();
  c_sweep->add_option("--steps", sw.steps)->capture_default_str();
  c_sweep->add_option("--r-max", sw.r_max, "Largest distorted radius (width units)")->capture_default_str();
  c_sweep->add_option("--out", sw.out, "CSV output (stdout when omitted)");

  ABArgs ab;
  auto* c_ab = app.add_subcommand("ab-eval", "Direct (k1, k2) vs manifold k2 comparison");
  c_ab->add_option("--manifest", ab.manifest)->required();
  auto* o_abw = c_ab->add_option("--weights", ab.weights);
  auto* o_oracle = c_ab->add_flag("--oracle", ab.oracle, "Use the ground truth as method A");
  o_abw->excludes(o_oracle);
  c_ab->add_option("--out", ab.out, "Per-image CSV");
  c_ab->add_option("--input-size", ab.input_size)->capture_default_str();

  HistArgs hs;
  auto* c_hist = app.add_subcommand("hist", "Histogram of prediction errors");
  c_hist->add_option("--predictions", hs.predictions, "CSV written by predict --csv")->required();
  c_hist->add_option("--out", hs.out);
  c_hist->add_option("--bins", hs.bins)->capture_default_str()->check(CLI::PositiveNumber);

  StraightArgs st;
  auto* c_straight = app.add_subcommand("straightness", "Max deviation of marker lines from straight lines");
  c_straight->add_option("image", st.image)->required();
  c_straight->add_option("--geometry", st.geometry, "Geometry sidecar written by render");
  c_straight->add_option("--threshold", st.opt.color_threshold)->capture_default_str();
  c_straight->add_option("--min-pixels", st.opt.min_pixels)->capture_default_str();
  c_straight->add_flag("--json", st.json);

  PanoArgs pg;
  auto* c_pano = app.add_subcommand("pano-gen", "Write the procedural equirectangular panorama");
  c_pano->add_option("--width", pg.width)->capture_default_str();
  c_pano->add_option("--height", pg.height, "Defaults to width / 2");
  c_pano->add_option("--style", pg.style)->check(CLI::IsMember({"field", "plain"}))->capture_default_str();
  c_pano->add_option("--out", pg.out)->required();

  RenderArgs rd;
  auto* c_render = app.add_subcommand("render", "Render one distorted crop with a geometry sidecar");
  c_render->add_option("--pano", rd.pano, "Panorama (procedural when omitted)");
  c_render->add_option("--pano-width", rd.pano_width)->capture_default_str();
  c_render->add_option("--style", rd.style)->check(CLI::IsMember({"field", "plain"}));
  c_render->add_option("--pan", rd.p.pan)->capture_default_str();
  c_render->add_option("--tilt", rd.p.tilt)->capture_default_str();
  c_render->add_option("--roll", rd.p.roll)->capture_default_str();
  c_render->add_option("--fov", rd.p.fov)->capture_default_str();
  c_render->add_option("--k1", rd.p.k1)->capture_default_str();
  c_render->add_option("--k2", rd.p.k2)->capture_default_str();
  c_render->add_option("--width", rd.width)->capture_default_str()->check(CLI::PositiveNumber);
  c_render->add_option("--height", rd.height)->capture_default_str()->check(CLI::PositiveNumber);
  c_render->add_option("--out", rd.out)->required();
  c_render->add_option("--geometry", rd.geometry, "Sidecar path (default: <out>.json)");
  c_render->add_flag("--rectified", rd.rectified, "Rectify with the true coefficients before writing");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  if (c_rectify->parsed() && !rc.k1 && rc.weights.empty()) {
    err << "error: rectify needs --k1 [--k2] or --weights\n";
    return kExitUsage;
  }
  if (c_ab->parsed() && !ab.oracle && ab.weights.empty()) {
    err << "error: ab-eval needs --weights or --oracle\n";
    return kExitUsage;
  }
  if (c_predict->parsed() && pr.images.empty() && pr.manifest.empty()) {
    err << "error: predict needs image files or --manifest\n";
    return kExitUsage;
  }

  set_worker_count(g.threads);
  const Log log(err, g);
  try {
    if (c_synth->parsed()) return run_synth(synth, g, log, out);
    if (c_train->parsed()) return run_train(tr, g, log, out);
    if (c_predict->parsed()) return run_predict(pr, log, out);
    if (c_rectify->parsed()) return run_rectify(rc, log, out);
    if (c_sweep->parsed()) return run_sweep(sw, out);
    if (c_ab->parsed()) return run_ab(ab, out);
    if (c_hist->parsed()) return run_hist(hs, out);
    if (c_straight->parsed()) return run_straightness(st, out);
    if (c_pano->parsed()) return run_pano(pg, out);
    if (c_render->parsed()) return run_render(rd, g, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DetectionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IterationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace rdist
