#include "lesiondiff/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "lesiondiff/errors.hpp"

namespace lesiondiff::io {
namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

constexpr std::array<char, 4> kImageMagic{'I', 'G', 'R', 'D'};
constexpr std::array<char, 4> kWeightsMagic{'D', 'M', 'W', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  void close() {
    out_.close();
    if (!out_) throw IoError("write to '" + path_.string() + "' failed");
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError("'" + path_.string() + "' is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  float f32() {
    float v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool done() const { return pos_ == data_.size(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

void expect_magic(Reader& r, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  r.bytes(got.data(), got.size());
  if (got != magic) {
    throw IoError("'" + r.path().string() + "' is not a " + std::string(magic.begin(), magic.end()) +
                  " file");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError("'" + r.path().string() + "' has unsupported version " + std::to_string(version));
  }
}

json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

void write_igrd(const fs::path& path, const ImageGrid& image) {
  Writer w(path);
  w.bytes(kImageMagic.data(), kImageMagic.size());
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(image.height()));
  w.u32(static_cast<std::uint32_t>(image.width()));
  w.u32(static_cast<std::uint32_t>(image.channels()));
  for (double v : image.data()) w.f32(static_cast<float>(v));
  w.close();
}

ImageGrid read_igrd(const fs::path& path) {
  Reader r(path);
  expect_magic(r, kImageMagic);
  const std::uint32_t h = r.u32(), w = r.u32(), c = r.u32();
  if (h == 0 || w == 0 || c == 0 || h > 1u << 15 || w > 1u << 15 || c > 64) {
    throw IoError("'" + path.string() + "' has implausible dimensions");
  }
  ImageGrid image(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (double& v : image.data()) {
    v = r.f32();
    if (!std::isfinite(v)) throw IoError("'" + path.string() + "' contains non-finite samples");
  }
  if (!r.done()) throw IoError("'" + path.string() + "' has trailing bytes");
  return image;
}

void write_mask(const fs::path& path, const Mask& mask) {
  Writer w(path);
  const std::string header =
      "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  w.bytes(header.data(), header.size());
  std::vector<unsigned char> pixels(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) pixels[i] = mask[i] ? 255 : 0;
  w.bytes(pixels.data(), pixels.size());
  w.close();
}

Mask read_mask(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError("'" + path.string() + "' is not a binary PGM (P5)");
  int fields[3];
  for (int& f : fields) {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      in >> std::ws;
    }
    if (!(in >> f)) throw IoError("'" + path.string() + "' has a malformed PGM header");
  }
  const int width = fields[0], height = fields[1], maxval = fields[2];
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw IoError("'" + path.string() + "' must be an 8-bit PGM with maxval 255");
  }
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw IoError("'" + path.string() + "' is truncated");
  }
  Mask mask(height, width);
  for (std::size_t i = 0; i < pixels.size(); ++i) mask[i] = pixels[i] >= 128 ? 1 : 0;
  return mask;
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(section + ": unknown key '" + key + "'");
  }
}

json arch_to_json(const ArchDescriptor& a) {
  return json{{"kind", a.kind},
              {"height", a.height},
              {"width", a.width},
              {"image_channels", a.image_channels},
              {"widths", a.widths},
              {"blocks_per_level", a.blocks_per_level},
              {"time_dim", a.time_dim},
              {"time_hidden", a.time_hidden},
              {"groups", a.groups},
              {"mlp_hidden", a.mlp_hidden}};
}

ArchDescriptor arch_from_json(const json& j) {
  reject_unknown_keys(j, {"kind", "height", "width", "image_channels", "widths", "blocks_per_level",
                          "time_dim", "time_hidden", "groups", "mlp_hidden"},
                      "arch");
  ArchDescriptor a;
  try {
    a.kind = j.value("kind", a.kind);
    a.height = j.value("height", a.height);
    a.width = j.value("width", a.width);
    a.image_channels = j.value("image_channels", a.image_channels);
    a.widths = j.value("widths", a.widths);
    a.blocks_per_level = j.value("blocks_per_level", a.blocks_per_level);
    a.time_dim = j.value("time_dim", a.time_dim);
    a.time_hidden = j.value("time_hidden", a.time_hidden);
    a.groups = j.value("groups", a.groups);
    a.mlp_hidden = j.value("mlp_hidden", a.mlp_hidden);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("arch: ") + e.what());
  }
  a.validate();
  return a;
}

void write_weights(const fs::path& path, const Network<float>& net, const NoiseSchedule& sched) {
  const json descriptor{{"arch", arch_to_json(net.arch())},
                        {"schedule", {{"kind", "cosine"}, {"T", sched.steps()}, {"s", sched.offset()}}},
                        {"normalization", {{"scale", 2.0}, {"offset", -1.0}}}};
  const std::string text = descriptor.dump();
  Writer w(path);
  w.bytes(kWeightsMagic.data(), kWeightsMagic.size());
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  for (const auto& p : net.params()) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : p.value.data) w.f32(v);
  }
  w.close();
}

NetworkDenoiser read_weights(const fs::path& path) {
  Reader r(path);
  expect_magic(r, kWeightsMagic);
  const std::uint32_t len = r.u32();
  json descriptor;
  try {
    descriptor = json::parse(r.str(len));
  } catch (const json::exception& e) {
    throw IoError("'" + path.string() + "' has a malformed descriptor: " + e.what());
  }
  ArchDescriptor arch;
  int steps = 0;
  double offset = 0.0;
  try {
    arch = arch_from_json(descriptor.at("arch"));
    steps = descriptor.at("schedule").at("T").get<int>();
    offset = descriptor.at("schedule").at("s").get<double>();
  } catch (const json::exception& e) {
    throw IoError("'" + path.string() + "' descriptor: " + e.what());
  }

  ParameterSet<float> params;
  while (!r.done()) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw IoError("'" + path.string() + "' has a corrupt record header");
    std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw IoError("'" + path.string() + "' has a corrupt record rank");
    std::vector<int> shape(rank);
    for (int& d : shape) d = static_cast<int>(r.u32());
    ad::Tensor<float> t(shape);
    for (float& v : t.data) {
      v = r.f32();
      if (!std::isfinite(v)) throw IoError("'" + path.string() + "' has non-finite weights in " + name);
    }
    params.add(std::move(name), std::move(t));
  }
  try {
    return NetworkDenoiser(Network<float>(arch, std::move(params)), NoiseSchedule::cosine(steps, offset));
  } catch (const ConfigError& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

json report_to_json(const MetricsReport& r) {
  json psnr = json::array();
  for (double v : r.psnr_in_mask) psnr.push_back(number_or_inf(v));
  const auto stats = [](const ChannelStats& s) {
    return json{{"mean", s.mean}, {"std", s.std}, {"pixels", s.pixels}};
  };
  return json{{"dice", r.dice ? json(*r.dice) : json(nullptr)},
              {"mae_in_mask", r.mae_in_mask},
              {"psnr_in_mask", psnr},
              {"outside_mask_max_abs_diff", r.outside_mask_max_abs_diff},
              {"mask_pixels", r.mask_pixels},
              {"region_stats", {{"inside_mask", stats(r.inside)}, {"wm_ring", stats(r.wm_ring)}}}};
}

void validate_report_json(const json& j) {
  const auto fail = [](const std::string& msg) { throw IoError("report schema: " + msg); };
  if (!j.is_object()) fail("not an object");
  for (const char* key : {"dice", "mae_in_mask", "psnr_in_mask", "outside_mask_max_abs_diff",
                          "mask_pixels", "region_stats"}) {
    if (!j.contains(key)) fail(std::string("missing '") + key + "'");
  }
  const auto& d = j["dice"];
  if (!d.is_null() && !(d.is_number() && d.get<double>() >= 0.0 && d.get<double>() <= 1.0)) {
    fail("dice must be null or a number in [0,1]");
  }
  if (!j["mae_in_mask"].is_array()) fail("mae_in_mask must be an array");
  for (const auto& v : j["mae_in_mask"]) {
    if (!v.is_number() || v.get<double>() < 0.0) fail("mae_in_mask entries must be numbers >= 0");
  }
  if (!j["psnr_in_mask"].is_array()) fail("psnr_in_mask must be an array");
  for (const auto& v : j["psnr_in_mask"]) {
    if (!(v.is_number() || (v.is_string() && v.get<std::string>() == "inf"))) {
      fail("psnr_in_mask entries must be numbers or \"inf\"");
    }
  }
  const auto& o = j["outside_mask_max_abs_diff"];
  if (!o.is_number() || o.get<double>() < 0.0) fail("outside_mask_max_abs_diff must be a number >= 0");
  if (!j["mask_pixels"].is_number_unsigned() && !j["mask_pixels"].is_number_integer()) {
    fail("mask_pixels must be an integer");
  }
  const auto& rs = j["region_stats"];
  if (!rs.is_object()) fail("region_stats must be an object");
  for (const char* region : {"inside_mask", "wm_ring"}) {
    if (!rs.contains(region) || !rs[region].is_object()) fail(std::string("region_stats.") + region + " missing");
    for (const char* key : {"mean", "std"}) {
      if (!rs[region].contains(key) || !rs[region][key].is_array()) {
        fail(std::string("region_stats.") + region + "." + key + " must be an array");
      }
    }
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace lesiondiff::io
