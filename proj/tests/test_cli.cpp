#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "lesiondiff/commands.hpp"
#include "lesiondiff/config.hpp"
#include "lesiondiff/io.hpp"

using namespace lesiondiff;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "lesiondiff_test_cli";

std::string p(const std::string& rel) { return (kRoot / rel).string(); }

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "lesiondiff");
  return cli::run(args);
}

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// One small corpus and model shared by the test cases below.
void ensure_fixture() {
  static bool ready = false;
  if (ready) return;
  fs::remove_all(kRoot);
  REQUIRE(run({"gen-phantoms", "--out", p("corpus"), "--n", "10", "--size", "32", "--seed", "4"}) == 0);
  REQUIRE(run({"train", "--corpus", p("corpus"), "--out", p("m.dmwt"), "--epochs", "2", "--batch-size", "5",
               "--arch", "mlp", "--steps", "100", "--seed", "1"}) == 0);
  ready = true;
}

}  // namespace

TEST_CASE("gen-phantoms") {
  ensure_fixture();
  const auto manifest = io::read_json(p("corpus/manifest.json"));
  CHECK(manifest["n"] == 10);
  CHECK(manifest["lesion_free"] == 2);
  CHECK(manifest["pairs"].size() == 10);
  int empty = 0;
  for (const auto& pair : manifest["pairs"]) {
    empty += pair["lesion_pixels"] == 0;
    CHECK(pair["files"].size() == 4);
    for (const auto& f : pair["files"]) CHECK(fs::exists(kRoot / "corpus" / f.get<std::string>()));
  }
  CHECK(empty == 2);
  CHECK(fs::exists(p("corpus/resolved_config.json")));

  REQUIRE(run({"gen-phantoms", "--out", p("corpus2"), "--n", "10", "--size", "32", "--seed", "4"}) == 0);
  CHECK(slurp(p("corpus/pair_0003/lesioned.igrd")) == slurp(p("corpus2/pair_0003/lesioned.igrd")));
  CHECK(slurp(p("corpus/manifest.json")) == slurp(p("corpus2/manifest.json")));

  CHECK(run({"gen-phantoms", "--out", p("c0"), "--n", "0"}) == cli::kConfigError);
  CHECK(run({"gen-phantoms", "--out", p("c0"), "--n", "3", "--size", "8"}) == cli::kConfigError);
}

TEST_CASE("train outputs and errors") {
  ensure_fixture();
  const std::string log = slurp(p("m.dmwt.loss.csv"));
  CHECK(log.rfind("epoch,step,loss\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 1 + 4);
  const auto sidecar = io::read_json(p("m.dmwt.config.json"));
  CHECK(sidecar["arch"]["height"] == 32);
  CHECK(sidecar["arch"]["kind"] == "mlp");
  CHECK(sidecar["train"]["epochs"] == 2);

  CHECK(run({"train", "--corpus", p("corpus"), "--out", p("x.dmwt"), "--epochs", "0"}) == cli::kConfigError);
  CHECK(run({"train", "--corpus", p("nowhere"), "--out", p("x.dmwt"), "--epochs", "1"}) == cli::kInputError);
  CHECK(run({"train", "--corpus", p("corpus"), "--out", p("x.dmwt"), "--arch", "transformer"}) == cli::kConfigError);
}

TEST_CASE("fill") {
  ensure_fixture();
  const std::string img = p("corpus/pair_0001/lesioned.igrd");
  const std::string mask = p("corpus/pair_0001/lesion_mask.pgm");
  for (const char* mode : {"ddpm", "ddim"}) {
    const std::string out = p(std::string("fill_") + mode + ".igrd");
    REQUIRE(run({"fill", "--image", img, "--mask", mask, "--weights", p("m.dmwt"), "--out", out, "--truth",
                 p("corpus/pair_0001/healthy.igrd"), "--mode", mode, "--seed", "7", "--refine-t", "50"}) == 0);
    const auto report = io::read_json(out + ".report.json");
    CHECK_NOTHROW(io::validate_report_json(report));
    CHECK(report["outside_mask_max_abs_diff"] == 0.0);
    CHECK(report["mae_in_mask"].size() == 2);
    const auto cfg = run_config_from_json(io::read_json(out + ".config.json"));
    CHECK(to_string(cfg.sampler.mode) == mode);
    CHECK(cfg.sampler.refine_timestep == 50);
    CHECK(cfg.steps == 100);
  }

  // empty mask leaves the image byte-identical
  io::write_mask(p("empty.pgm"), Mask(32, 32));
  REQUIRE(run({"fill", "--image", img, "--mask", p("empty.pgm"), "--weights", p("m.dmwt"), "--out", p("same.igrd")}) == 0);
  CHECK(slurp(p("same.igrd")) == slurp(img));

  // shape mismatch and bad options
  io::write_mask(p("small.pgm"), Mask(16, 16));
  CHECK(run({"fill", "--image", img, "--mask", p("small.pgm"), "--weights", p("m.dmwt"), "--out", p("x.igrd")}) ==
        cli::kInputError);
  CHECK(run({"fill", "--image", img, "--mask", mask, "--weights", p("m.dmwt"), "--out", p("x.igrd"), "--refine-t",
             "55"}) == cli::kConfigError);
  CHECK(run({"fill", "--image", img, "--mask", mask, "--weights", p("m.dmwt"), "--out", p("x.igrd"), "--refine-t",
             "soon"}) == cli::kConfigError);
  CHECK(run({"fill", "--image", img, "--mask", mask, "--weights", p("m.dmwt"), "--out", p("x.igrd"), "--mode",
             "euler"}) == cli::kConfigError);
  CHECK(run({"fill", "--image", img, "--mask", mask, "--weights", p("nope.dmwt"), "--out", p("x.igrd")}) ==
        cli::kInputError);
  CHECK(run({"fill", "--image", img, "--mask", mask, "--weights", p("m.dmwt")}) == cli::kConfigError);
  CHECK(run({"fill", "--bogus-flag"}) == cli::kConfigError);
}

TEST_CASE("flags override the config file and sidecars replay") {
  ensure_fixture();
  nlohmann::json cfg{{"seed", 3},
                     {"sampler", {{"stride", 20}, {"repaint_reps", 1}, {"refine_t", nullptr}}},
                     {"paths",
                      {{"image", p("corpus/pair_0002/lesioned.igrd")},
                       {"mask", p("corpus/pair_0002/lesion_mask.pgm")},
                       {"weights", p("m.dmwt")},
                       {"out", p("cfg_fill.igrd")}}}};
  io::write_json(p("run.json"), cfg);
  REQUIRE(run({"fill", "--config", p("run.json"), "--stride", "50"}) == 0);
  const auto resolved = io::read_json(p("cfg_fill.igrd.config.json"));
  CHECK(resolved["sampler"]["stride"] == 50);
  CHECK(resolved["sampler"]["repaint_reps"] == 1);
  CHECK(resolved["seed"] == 3);
  const std::string first = slurp(p("cfg_fill.igrd"));
  REQUIRE(run({"fill", "--config", p("cfg_fill.igrd.config.json")}) == 0);
  CHECK(slurp(p("cfg_fill.igrd")) == first);

  cfg["sampler"]["warp"] = 9;
  io::write_json(p("bad.json"), cfg);
  CHECK(run({"fill", "--config", p("bad.json")}) == cli::kConfigError);
}

TEST_CASE("synth") {
  ensure_fixture();
  const std::string host = p("corpus/pair_0000/healthy.igrd");
  const std::string wm = p("corpus/pair_0000/wm_mask.pgm");
  // a target that pokes out of the host white matter
  Mask target = io::read_mask(p("corpus/pair_0005/lesion_mask.pgm"));
  for (int x = 0; x < 32; ++x) target.at(0, x) = 1;
  io::write_mask(p("target.pgm"), target);
  REQUIRE(run({"synth", "--image", host, "--target-mask", p("target.pgm"), "--wm-mask", wm, "--weights", p("m.dmwt"),
               "--out", p("synth.igrd"), "--seed", "2"}) == 0);
  const auto report = io::read_json(p("synth.igrd.report.json"));
  CHECK(report["requested_mask_pixels"] == target.count());
  const Mask effective = wm_intersect(target, io::read_mask(wm));
  CHECK(report["effective_mask_pixels"] == effective.count());
  CHECK(report["effective_mask_pixels"].get<std::size_t>() < target.count());
  CHECK(report["outside_mask_max_abs_diff"] == 0.0);
  CHECK(report["dice"].is_number());

  const std::string first = slurp(p("synth.igrd"));
  REQUIRE(run({"synth", "--image", host, "--target-mask", p("target.pgm"), "--wm-mask", wm, "--weights", p("m.dmwt"),
               "--out", p("synth.igrd"), "--seed", "2"}) == 0);
  CHECK(slurp(p("synth.igrd")) == first);

  // target entirely outside white matter: nothing to synthesize
  Mask outside(32, 32);
  outside.at(0, 0) = outside.at(0, 1) = 1;
  io::write_mask(p("outside.pgm"), outside);
  REQUIRE(run({"synth", "--image", host, "--mask", p("outside.pgm"), "--wm-mask", wm, "--weights", p("m.dmwt"),
               "--out", p("noop.igrd")}) == 0);
  CHECK(slurp(p("noop.igrd")) == slurp(host));
  CHECK(io::read_json(p("noop.igrd.report.json"))["effective_mask_pixels"] == 0);
}

TEST_CASE("eval") {
  ensure_fixture();
  fs::create_directories(kRoot / "truth");
  for (int i = 0; i < 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "pair_%04d", i);
    fs::create_directories(kRoot / "truth" / name);
    fs::copy_file(kRoot / "corpus" / name / "healthy.igrd", kRoot / "truth" / name / "healthy.igrd",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(kRoot / "corpus" / name / "lesion_mask.pgm", kRoot / "truth" / name / "lesion_mask.pgm",
                  fs::copy_options::overwrite_existing);
  }
  REQUIRE(run({"eval", "--pred", p("truth"), "--truth", p("truth"), "--out", p("same.json")}) == 0);
  const auto same = io::read_json(p("same.json"));
  CHECK(same["aggregate"]["dice"]["mean"] == 1.0);
  CHECK(same["aggregate"]["dice"]["n"] == 10);
  CHECK(same["aggregate"]["mae_ch0"]["mean"] == 0.0);
  CHECK(same["aggregate"]["mae_ch1"]["n"] == 10);
  CHECK(same["aggregate"]["dice"].contains("std"));

  // predictions: lesioned images and masks from shifted pairs
  fs::remove_all(kRoot / "pred");
  fs::copy(kRoot / "truth", kRoot / "pred", fs::copy_options::recursive);
  for (int i = 0; i < 10; ++i) {
    char a[32], b[32];
    std::snprintf(a, sizeof a, "pair_%04d", i);
    std::snprintf(b, sizeof b, "pair_%04d", (i + 1) % 10);
    fs::copy_file(kRoot / "corpus" / a / "lesioned.igrd", kRoot / "pred" / a / "healthy.igrd",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(kRoot / "corpus" / b / "lesion_mask.pgm", kRoot / "pred" / a / "lesion_mask.pgm",
                  fs::copy_options::overwrite_existing);
  }
  REQUIRE(run({"eval", "--pred", p("pred"), "--truth", p("truth"), "--out", p("diff.json")}) == 0);
  const auto diff = io::read_json(p("diff.json"));
  double dsum = 0.0, msum = 0.0;
  int nd = 0, nm = 0;
  for (const auto& item : diff["items"]) {
    if (item.contains("dice")) {
      dsum += item["dice"].get<double>();
      ++nd;
    } else {
      msum += item["mae"][0].get<double>();
      ++nm;
    }
  }
  CHECK(nd == 10);
  CHECK(nm == 10);
  CHECK(diff["aggregate"]["dice"]["mean"].get<double>() == doctest::Approx(dsum / nd).epsilon(1e-12));
  CHECK(diff["aggregate"]["mae_ch0"]["mean"].get<double>() == doctest::Approx(msum / nm).epsilon(1e-12));

  fs::remove(kRoot / "pred/pair_0004/lesion_mask.pgm");
  CHECK(run({"eval", "--pred", p("pred"), "--truth", p("truth"), "--out", p("bad.json")}) == cli::kInputError);
}
