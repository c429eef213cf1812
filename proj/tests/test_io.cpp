#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include "doctest.h"
#include "lesiondiff/config.hpp"
#include "lesiondiff/errors.hpp"
#include "lesiondiff/io.hpp"
#include "lesiondiff/phantom.hpp"

using namespace lesiondiff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "lesiondiff_test_io") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& n) const { return path / n; }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void spit(const fs::path& p, const std::string& bytes) { std::ofstream(p, std::ios::binary) << bytes; }

}  // namespace

TEST_CASE("IGRD layout and round trip") {
  TempDir dir;
  ImageGrid img(3, 4, 2);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(0.01 * static_cast<double>(i));
  io::write_igrd(dir / "a.igrd", img);
  const std::string bytes = slurp(dir / "a.igrd");
  REQUIRE(bytes.size() == 4 + 16 + 3 * 4 * 2 * 4);
  CHECK(bytes.substr(0, 4) == "IGRD");
  std::uint32_t header[4];
  std::memcpy(header, bytes.data() + 4, 16);
  CHECK(header[0] == 1);
  CHECK(header[1] == 3);
  CHECK(header[2] == 4);
  CHECK(header[3] == 2);
  float third;
  std::memcpy(&third, bytes.data() + 20 + 3 * 4, 4);
  CHECK(third == static_cast<float>(img.data()[3]));

  const ImageGrid back = io::read_igrd(dir / "a.igrd");
  CHECK(back == img);
  io::write_igrd(dir / "b.igrd", back);
  CHECK(slurp(dir / "b.igrd") == bytes);
}

TEST_CASE("IGRD rejects corrupt files") {
  TempDir dir;
  io::write_igrd(dir / "a.igrd", ImageGrid(2, 2, 2, 0.5));
  const std::string good = slurp(dir / "a.igrd");
  std::string bad = good;
  bad[0] = 'J';
  spit(dir / "magic.igrd", bad);
  CHECK_THROWS_AS(io::read_igrd(dir / "magic.igrd"), IoError);
  bad = good;
  bad[4] = 2;
  spit(dir / "version.igrd", bad);
  CHECK_THROWS_AS(io::read_igrd(dir / "version.igrd"), IoError);
  spit(dir / "trunc.igrd", good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(io::read_igrd(dir / "trunc.igrd"), IoError);
  spit(dir / "trail.igrd", good + "x");
  CHECK_THROWS_AS(io::read_igrd(dir / "trail.igrd"), IoError);
  bad = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bad.data() + 20, &nan, 4);
  spit(dir / "nan.igrd", bad);
  CHECK_THROWS_AS(io::read_igrd(dir / "nan.igrd"), IoError);
  CHECK_THROWS_AS(io::read_igrd(dir / "missing.igrd"), IoError);
}

TEST_CASE("P5 masks") {
  TempDir dir;
  Mask m(3, 5);
  m.at(0, 0) = m.at(2, 4) = m.at(1, 2) = 1;
  io::write_mask(dir / "m.pgm", m);
  const std::string bytes = slurp(dir / "m.pgm");
  CHECK(bytes.substr(0, 2) == "P5");
  CHECK(bytes.size() == std::string("P5\n5 3\n255\n").size() + 15);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 255);
  CHECK(io::read_mask(dir / "m.pgm") == m);

  spit(dir / "c.pgm", std::string("P5\n# made by hand\n2 1\n255\n") + std::string("\xff\x00", 2));
  const Mask c = io::read_mask(dir / "c.pgm");
  CHECK(c.width() == 2);
  CHECK(c.at(0, 0) == 1);
  CHECK(c.at(0, 1) == 0);
  spit(dir / "p2.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(io::read_mask(dir / "p2.pgm"), IoError);
  spit(dir / "short.pgm", "P5\n4 4\n255\nab");
  CHECK_THROWS_AS(io::read_mask(dir / "short.pgm"), IoError);
}

TEST_CASE("metrics report JSON") {
  const PhantomPair p = generate_phantom(3, PhantomSpec{});
  MetricsReport r = fill_report(p.healthy, p);
  nlohmann::json j = io::report_to_json(r);
  CHECK_NOTHROW(io::validate_report_json(j));
  CHECK(j["psnr_in_mask"][0] == "inf");
  CHECK(j["mae_in_mask"].size() == 2);
  CHECK(j["dice"].is_null());
  CHECK(j["outside_mask_max_abs_diff"] == 0.0);
  CHECK(j.contains("region_stats"));

  r.dice = 0.75;
  j = io::report_to_json(r);
  CHECK(j["dice"] == 0.75);
  nlohmann::json broken = j;
  broken.erase("mae_in_mask");
  CHECK_THROWS_AS(io::validate_report_json(broken), IoError);
  broken = j;
  broken["dice"] = 1.5;
  CHECK_THROWS_AS(io::validate_report_json(broken), IoError);
}

TEST_CASE("run config JSON") {
  RunConfig cfg;
  cfg.command = "fill";
  cfg.seed = 42;
  cfg.sampler.mode = SamplerMode::ddpm;
  cfg.sampler.refine_timestep.reset();
  cfg.sampler.repaint_reps = 3;
  cfg.train.epochs = 7;
  cfg.phantom.size = 32;
  cfg.arch.widths = {16, 32, 64};
  cfg.paths["image"] = "a.igrd";
  const nlohmann::json j = to_json(cfg);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.sampler.mode == SamplerMode::ddpm);
  CHECK(!back.sampler.refine_timestep.has_value());
  CHECK(back.phantom == cfg.phantom);
  CHECK(back.arch == cfg.arch);
  CHECK(back.path("image") == "a.igrd");
  CHECK_THROWS_AS(back.path("mask"), ConfigError);

  nlohmann::json extra = j;
  extra["sampler"]["temperature"] = 1.0;
  CHECK_THROWS_AS(run_config_from_json(extra), ConfigError);
  extra = j;
  extra["colour"] = "blue";
  CHECK_THROWS_AS(run_config_from_json(extra), ConfigError);
  extra = j;
  extra["sampler"]["stride"] = "ten";
  CHECK_THROWS_AS(run_config_from_json(extra), ConfigError);

  // partial files fall back to defaults
  const RunConfig partial = run_config_from_json(nlohmann::json{{"seed", 5}, {"sampler", {{"stride", 20}}}});
  CHECK(partial.seed == 5);
  CHECK(partial.sampler.stride == 20);
  CHECK(partial.sampler.repaint_reps == 2);
  CHECK(partial.train.batch_size == 32);
}

TEST_CASE("arch descriptor JSON") {
  ArchDescriptor a;
  a.kind = "mlp";
  a.mlp_hidden = {12, 7};
  CHECK(io::arch_from_json(io::arch_to_json(a)) == a);
  nlohmann::json j = io::arch_to_json(a);
  j["dropout"] = 0.1;
  CHECK_THROWS_AS(io::arch_from_json(j), ConfigError);
}
