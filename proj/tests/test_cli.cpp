#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rdist/cli.hpp"
#include "rdist/image.hpp"
#include "rdist/pano.hpp"

using namespace rdist;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "rdist_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int count_lines(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  int n = 0;
  while (std::getline(f, line)) ++n;
  return n;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_NE(run({}).err.find("synth"), std::string::npos);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"sweep", "--steps", "abc"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, SweepContract) {
  const auto d = dir("sweep");
  const auto out = (d / "sweep.csv").string();
  const CliRun r = run({"sweep", "--k1-min", "-0.7", "--k1-max", "0.3", "--steps", "101", "--out", out});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(out), 102);
  EXPECT_EQ(run({"sweep", "--steps", "1"}).code, 3);
}

TEST(Cli, RectifyPaths) {
  const auto d = dir("rectify");
  Image img(48, 27, 120);
  write_image(d / "in.png", img);
  const auto in = (d / "in.png").string(), out = (d / "out.png").string();
  const CliRun ok = run({"rectify", "--k1", "-0.3", "--k2", "0.06675", in, out});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(read_image(out).width(), 48);
  EXPECT_EQ(run({"rectify", in, out}).code, 1);
  EXPECT_EQ(run({"rectify", "--k1", "-0.1", (d / "missing.png").string(), out}).code, 2);
  EXPECT_EQ(run({"rectify", "--k1", "-3", in, out}).code, 3);
  EXPECT_EQ(run({"rectify", "--k1", "1e-1", in, (d / "out.bmp").string()}).code, 2);
}

TEST(Cli, SynthIsDeterministicAcrossThreadCounts) {
  const auto a = dir("synth_a"), b = dir("synth_b");
  const std::vector<std::string> common = {"synth", "--count", "12", "--pano-width", "256", "--render-w", "64",
                                           "--render-h", "36", "--out-w", "16", "--out-h", "16"};
  auto args_a = common;
  args_a.insert(args_a.begin(), {"--seed", "9", "--threads", "1"});
  args_a.insert(args_a.end(), {"--out-dir", a.string()});
  auto args_b = common;
  args_b.insert(args_b.begin(), {"--seed", "9", "--threads", "3"});
  args_b.insert(args_b.end(), {"--out-dir", b.string()});
  ASSERT_EQ(run(args_a).code, 0);
  ASSERT_EQ(run(args_b).code, 0);
  EXPECT_EQ(file_hash(a / "manifest.jsonl"), file_hash(b / "manifest.jsonl"));
  EXPECT_EQ(count_lines(a / "manifest.jsonl"), 13);
}

TEST(Cli, TrainPredictHistAb) {
  const auto d = dir("pipeline");
  const auto data = d / "data";
  ASSERT_EQ(run({"--seed", "2", "synth", "--count", "24", "--pano-width", "256", "--render-w", "64", "--render-h",
                 "36", "--out-w", "16", "--out-h", "16", "--out-dir", data.string()})
                .code,
            0);
  const auto manifest = (data / "manifest.jsonl").string();
  const auto weights = (d / "w.rdwt").string();
  const CliRun t = run({"train", "--manifest", manifest, "--val-manifest", manifest, "--out", weights, "--epochs", "2",
                     "--batch", "8", "--input-size", "16", "--channels", "4", "8", "--blocks", "1", "--head-width",
                     "8", "--log", (d / "log.csv").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(count_lines(d / "log.csv"), 3);

  const auto csv = (d / "pred.csv").string();
  const CliRun p = run({"predict", "--weights", weights, "--input-size", "16", "--manifest", manifest, "--csv", csv});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(count_lines(csv), 25);
  const CliRun one = run({"predict", "--weights", weights, "--input-size", "16", "--json",
                       (data / "crop_000003.ppm").string()});
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_NE(one.out.find("\"k1\""), std::string::npos);

  const CliRun h = run({"hist", "--predictions", csv, "--out", (d / "hist.csv").string()});
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_EQ(count_lines(d / "hist.csv"), 1 + 41 + 2);

  const CliRun oracle = run({"ab-eval", "--manifest", manifest, "--oracle"});
  ASSERT_EQ(oracle.code, 0) << oracle.err;
  EXPECT_NE(oracle.out.find("wins 24 of 24"), std::string::npos) << oracle.out;
  const CliRun model = run({"ab-eval", "--manifest", manifest, "--weights", weights, "--input-size", "16", "--out",
                         (d / "ab.csv").string()});
  EXPECT_EQ(model.code, 0) << model.err;
  EXPECT_EQ(run({"ab-eval", "--manifest", manifest}).code, 1);

  const CliRun rect = run({"rectify", "--weights", weights, "--input-size", "16", (data / "crop_000001.ppm").string(),
                        (d / "r.ppm").string()});
  EXPECT_EQ(rect.code, 0) << rect.err;

  std::ofstream(d / "broken.rdwt") << "nope";
  EXPECT_EQ(run({"predict", "--weights", (d / "broken.rdwt").string(), (data / "crop_000001.ppm").string()}).code, 2);
  EXPECT_EQ(run({"train", "--manifest", (d / "missing.jsonl").string(), "--out", weights}).code, 2);
}

TEST(Cli, RenderAndStraightness) {
  const auto d = dir("render");
  const auto img = (d / "crop.png").string();
  const CliRun r = run({"render", "--pano-width", "1024", "--fov", "50", "--width", "256", "--height", "144", "--out",
                     img});
  ASSERT_EQ(r.code, 0) << r.err;
  const CliRun s = run({"straightness", img, "--geometry", img + ".json"});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("max_sagitta"), std::string::npos);
  Image blank(32, 32, 10);
  write_image(d / "blank.png", blank);
  EXPECT_EQ(run({"straightness", (d / "blank.png").string()}).code, 2);

  const auto pano = (d / "pano.ppm").string();
  EXPECT_EQ(run({"pano-gen", "--width", "128", "--out", pano}).code, 0);
  EXPECT_EQ(read_image(pano).height(), 64);
  EXPECT_EQ(run({"pano-gen", "--width", "128", "--height", "50", "--out", pano}).code, 3);
}
