#include "lesiondiff/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "lesiondiff/errors.hpp"
#include "lesiondiff/io.hpp"

namespace lesiondiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log_line(const std::string& msg) { std::cerr << "[lesiondiff] " << msg << '\n'; }

void write_sidecar(const fs::path& path, const RunConfig& cfg) { io::write_json(path, to_json(cfg)); }

// Creates the directory an output file goes into.
void ensure_parent(const fs::path& file) {
  if (!file.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(file.parent_path(), ec);
  if (ec) throw IoError("cannot create '" + file.parent_path().string() + "': " + ec.message());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string pair_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%04d", i);
  return buf;
}

// Report for an inpainting output relative to its input (and optional ground truth).
MetricsReport inpaint_report(const ImageGrid& output, const ImageGrid& input, const Mask& region,
                             const Mask& repaint, const std::optional<ImageGrid>& truth,
                             const std::optional<Mask>& wm) {
  MetricsReport r;
  if (truth) {
    require_same_shape(*truth, output, "report ground truth");
    error_in_mask(output, *truth, region, r.mae_in_mask, r.psnr_in_mask);
  }
  r.outside_mask_max_abs_diff = max_abs_diff_outside(output, input, repaint);
  r.mask_pixels = region.count();
  r.inside = region_stats(output, region);
  const Mask tissue = wm ? *wm : Mask(output.height(), output.width(), 1);
  r.wm_ring = region_stats(output, wm_ring(repaint, tissue));
  return r;
}

void run_inpainting(const RunConfig& cfg, bool synthesis) {
  const ImageGrid image = io::read_igrd(cfg.path("image"));
  Mask mask = io::read_mask(cfg.path("mask"));
  require_matches(mask, image, synthesis ? "synth mask" : "fill mask");
  const NetworkDenoiser model = io::read_weights(cfg.path("weights"));
  const auto& arch = model.network().arch();
  if (image.height() != arch.height || image.width() != arch.width ||
      image.channels() != arch.image_channels) {
    throw DimensionError("image is " + std::to_string(image.height()) + "x" +
                         std::to_string(image.width()) + "x" + std::to_string(image.channels()) +
                         " but the model expects " + std::to_string(arch.height) + "x" +
                         std::to_string(arch.width) + "x" + std::to_string(arch.image_channels));
  }
  const NoiseSchedule& sched = model.schedule();

  RunConfig resolved = cfg;
  resolved.steps = sched.steps();
  resolved.offset = sched.offset();
  resolved.sampler.validate(sched);

  std::optional<Mask> wm;
  if (cfg.has_path("wm_mask")) {
    wm = io::read_mask(cfg.path("wm_mask"));
    require_matches(*wm, image, "wm mask");
  }
  std::optional<ImageGrid> truth;
  if (cfg.has_path("truth")) truth = io::read_igrd(cfg.path("truth"));

  const std::size_t requested = mask.count();
  ImageGrid output;
  Mask repaint;
  if (synthesis) {
    if (wm) mask = wm_intersect(mask, *wm);
    if (requested > 0 && mask.empty()) {
      log_line("warning: target mask does not intersect the white-matter mask; output equals input");
    }
    repaint = mask;
    output = synthesize_lesions(image, mask, cfg.sampler, model, sched);
  } else {
    repaint = dilate(mask, cfg.sampler.mask_dilation);
    output = fill_lesions(image, mask, cfg.sampler, model, sched);
  }

  const fs::path out = cfg.path("out");
  ensure_parent(out);
  io::write_igrd(out, output);

  MetricsReport report = inpaint_report(output, image, mask, repaint, truth, wm);
  if (synthesis && wm && !wm->empty()) {
    report.dice = dice(toy_segment(output, *wm, cfg.segment), mask);
  }
  json j = io::report_to_json(report);
  j["requested_mask_pixels"] = requested;
  j["effective_mask_pixels"] = mask.count();
  j["repaint_mask_pixels"] = repaint.count();
  io::validate_report_json(j);
  const fs::path report_path =
      cfg.has_path("report") ? fs::path(cfg.path("report")) : fs::path(out.string() + ".report.json");
  ensure_parent(report_path);
  io::write_json(report_path, j);
  write_sidecar(out.string() + ".config.json", resolved);
  log_line(std::string(synthesis ? "synth" : "fill") + ": wrote " + out.string() + " (" +
           std::to_string(repaint.count()) + " repainted pixels)");
}

// Relative paths of regular files under `root` with the given extension, sorted.
std::vector<std::string> list_files(const fs::path& root, const std::string& ext) {
  if (!fs::is_directory(root)) throw IoError("'" + root.string() + "' is not a directory");
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ext) {
      out.push_back(fs::relative(e.path(), root).generic_string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_region_file(const std::string& rel) {
  return rel.size() > 11 && rel.ends_with(".region.pgm");
}

json summarize(const std::vector<double>& values) {
  json s{{"n", values.size()}};
  if (values.empty()) {
    s["mean"] = nullptr;
    s["std"] = nullptr;
    return s;
  }
  const bool any_inf = std::any_of(values.begin(), values.end(), [](double v) { return std::isinf(v); });
  if (any_inf) {
    s["mean"] = "inf";
    s["std"] = nullptr;
    return s;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;
  s["mean"] = mean;
  s["std"] = std::sqrt(var);
  return s;
}

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<int> n;
  std::optional<int> size;
  std::optional<double> lesion_free_fraction;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<std::string> arch;
  std::optional<std::string> mode;
  std::optional<int> stride;
  std::optional<int> repaint_reps;
  std::optional<std::string> refine_t;
  std::optional<int> dilation;
  std::map<std::string, std::optional<std::string>> paths;
};

void add_path(CLI::App* app, Overrides& o, const std::string& flag, const std::string& key,
              const std::string& help) {
  app->add_option(flag, o.paths[key], help);
}

void add_sampler_flags(CLI::App* app, Overrides& o) {
  app->add_option("--mode", o.mode, "Sampler: ddim or ddpm");
  app->add_option("--stride", o.stride, "DDIM subsequence stride");
  app->add_option("--repaint-reps", o.repaint_reps, "Repaint repetitions per timestep");
  app->add_option("--refine-t", o.refine_t, "Refinement timestep, or 'none'");
  app->add_option("--dilation", o.dilation, "Repaint mask dilation radius (filling)");
}

RunConfig build_config(const std::string& command, const Overrides& o) {
  RunConfig cfg;
  if (o.config) cfg = run_config_from_json(io::read_json(*o.config));
  cfg.command = command;
  if (o.seed) cfg.seed = *o.seed;
  if (o.steps) cfg.steps = *o.steps;
  if (o.n) cfg.corpus_size = *o.n;
  if (o.size) cfg.phantom.size = *o.size;
  if (o.lesion_free_fraction) cfg.phantom.lesion_free_fraction = *o.lesion_free_fraction;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.lr) cfg.train.learning_rate = *o.lr;
  if (o.arch) cfg.arch.kind = *o.arch;
  if (o.mode) cfg.sampler.mode = parse_sampler_mode(*o.mode);
  if (o.stride) cfg.sampler.stride = *o.stride;
  if (o.repaint_reps) cfg.sampler.repaint_reps = *o.repaint_reps;
  if (o.refine_t) {
    if (*o.refine_t == "none") {
      cfg.sampler.refine_timestep.reset();
    } else {
      try {
        cfg.sampler.refine_timestep = std::stoi(*o.refine_t);
      } catch (const std::exception&) {
        throw ConfigError("--refine-t expects an integer or 'none', got '" + *o.refine_t + "'");
      }
    }
  }
  if (o.dilation) cfg.sampler.mask_dilation = *o.dilation;
  for (const auto& [key, value] : o.paths) {
    if (value) cfg.paths[key] = *value;
  }
  cfg.resolve();
  return cfg;
}

}  // namespace

void gen_phantoms(const RunConfig& cfg) {
  if (cfg.corpus_size < 1) throw ConfigError("gen-phantoms: n must be >= 1");
  cfg.phantom.validate();
  const fs::path out = cfg.path("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());

  const auto corpus = generate_corpus(cfg.corpus_size, cfg.seed, cfg.phantom);
  json pairs = json::array();
  int lesion_free = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus[i];
    const std::string name = pair_name(static_cast<int>(i));
    const fs::path dir = out / name;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    io::write_igrd(dir / "healthy.igrd", p.healthy);
    io::write_igrd(dir / "lesioned.igrd", p.lesioned);
    io::write_mask(dir / "lesion_mask.pgm", p.lesion_mask);
    io::write_mask(dir / "wm_mask.pgm", p.wm_mask);
    const std::size_t lesion_pixels = p.lesion_mask.count();
    if (lesion_pixels == 0) ++lesion_free;
    pairs.push_back({{"id", name},
                     {"seed", p.seed},
                     {"lesion_pixels", lesion_pixels},
                     {"files",
                      {name + "/healthy.igrd", name + "/lesioned.igrd", name + "/lesion_mask.pgm",
                       name + "/wm_mask.pgm"}}});
  }
  const json manifest{{"seed", cfg.seed},
                      {"n", corpus.size()},
                      {"lesion_free", lesion_free},
                      {"spec", phantom_spec_to_json(cfg.phantom)},
                      {"pairs", pairs}};
  io::write_json(out / "manifest.json", manifest);
  write_sidecar(out / "resolved_config.json", cfg);
  log_line("gen-phantoms: wrote " + std::to_string(corpus.size()) + " pairs (" +
           std::to_string(lesion_free) + " lesion-free) to " + out.string());
}

void train(const RunConfig& cfg) {
  cfg.train.validate();
  const fs::path corpus_dir = cfg.path("corpus");
  const json manifest = io::read_json(corpus_dir / "manifest.json");
  std::vector<TrainSample> dataset;
  try {
    for (const auto& p : manifest.at("pairs")) {
      const fs::path dir = corpus_dir / p.at("id").get<std::string>();
      TrainSample s{to_model_space(io::read_igrd(dir / "lesioned.igrd")),
                    io::read_mask(dir / "lesion_mask.pgm")};
      require_matches(s.lesion_mask, s.image, "corpus pair");
      if (!dataset.empty() && !s.image.same_shape(dataset.front().image)) {
        throw IoError("corpus images differ in shape");
      }
      dataset.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw IoError("corrupt manifest in '" + corpus_dir.string() + "': " + e.what());
  }
  if (dataset.empty()) throw IoError("corpus '" + corpus_dir.string() + "' is empty");

  RunConfig resolved = cfg;
  resolved.arch.height = dataset.front().image.height();
  resolved.arch.width = dataset.front().image.width();
  resolved.arch.image_channels = dataset.front().image.channels();
  resolved.arch.validate();
  const NoiseSchedule sched = NoiseSchedule::cosine(cfg.steps, cfg.offset);

  log_line("train: " + std::to_string(dataset.size()) + " samples, " +
           std::to_string(cfg.train.epochs) + " epochs, batch " + std::to_string(cfg.train.batch_size));
  const TrainResult result =
      lesiondiff::train(dataset, resolved.train, sched, resolved.arch, [](const EpochStats& e) {
        log_line("epoch " + std::to_string(e.epoch) + " mean loss " + format_double(e.mean_loss));
      });

  const fs::path out = cfg.path("out");
  ensure_parent(out);
  io::write_weights(out, result.model.network(), sched);
  const fs::path log_path =
      cfg.has_path("log") ? fs::path(cfg.path("log")) : fs::path(out.string() + ".loss.csv");
  ensure_parent(log_path);
  std::ofstream csv(log_path, std::ios::trunc);
  if (!csv) throw IoError("cannot open '" + log_path.string() + "' for writing");
  csv << "epoch,step,loss\n";
  for (const auto& s : result.steps) csv << s.epoch << ',' << s.step << ',' << format_double(s.loss) << '\n';
  csv.close();
  if (!csv) throw IoError("write to '" + log_path.string() + "' failed");
  write_sidecar(out.string() + ".config.json", resolved);
  log_line("train: wrote " + out.string());
}

void fill(const RunConfig& cfg) { run_inpainting(cfg, false); }

void synth(const RunConfig& cfg) { run_inpainting(cfg, true); }

void eval(const RunConfig& cfg) {
  const fs::path pred = cfg.path("pred");
  const fs::path truth = cfg.path("truth");

  std::vector<std::string> truth_images = list_files(truth, ".igrd");
  std::vector<std::string> truth_masks;
  for (const auto& m : list_files(truth, ".pgm")) {
    if (!is_region_file(m)) truth_masks.push_back(m);
  }
  std::vector<std::string> missing;
  for (const auto& rel : truth_images) {
    if (!fs::exists(pred / rel)) missing.push_back(rel);
  }
  for (const auto& rel : truth_masks) {
    if (!fs::exists(pred / rel)) missing.push_back(rel);
  }
  std::set<std::string> truth_set(truth_images.begin(), truth_images.end());
  truth_set.insert(truth_masks.begin(), truth_masks.end());
  for (const auto& ext : {".igrd", ".pgm"}) {
    for (const auto& rel : list_files(pred, ext)) {
      if (!is_region_file(rel) && !truth_set.count(rel)) missing.push_back("(no truth) " + rel);
    }
  }
  if (!missing.empty()) {
    std::string msg = "eval: prediction and truth sets differ:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }
  if (truth_images.empty() && truth_masks.empty()) throw IoError("eval: no files to compare");

  json items = json::array();
  std::vector<double> dices;
  std::map<std::string, std::vector<double>> per_metric;
  for (const auto& rel : truth_images) {
    const ImageGrid t = io::read_igrd(truth / rel);
    const ImageGrid p = io::read_igrd(pred / rel);
    require_same_shape(t, p, ("eval " + rel).c_str());
    const fs::path region_path = truth / (rel.substr(0, rel.size() - 5) + ".region.pgm");
    const Mask region = fs::exists(region_path) ? io::read_mask(region_path) : Mask(t.height(), t.width(), 1);
    std::vector<double> mae, psnr;
    error_in_mask(p, t, region, mae, psnr);
    json psnr_json = json::array();
    for (std::size_t c = 0; c < mae.size(); ++c) {
      per_metric["mae_ch" + std::to_string(c)].push_back(mae[c]);
      per_metric["psnr_ch" + std::to_string(c)].push_back(psnr[c]);
      psnr_json.push_back(std::isinf(psnr[c]) ? json("inf") : json(psnr[c]));
    }
    items.push_back({{"id", rel}, {"mae", mae}, {"psnr", psnr_json}, {"region_pixels", region.count()}});
  }
  for (const auto& rel : truth_masks) {
    const double d = dice(io::read_mask(pred / rel), io::read_mask(truth / rel));
    dices.push_back(d);
    items.push_back({{"id", rel}, {"dice", d}});
  }
  json aggregate = json::object();
  aggregate["dice"] = summarize(dices);
  for (const auto& [name, values] : per_metric) aggregate[name] = summarize(values);

  const json report{{"n_images", truth_images.size()},
                    {"n_masks", truth_masks.size()},
                    {"items", items},
                    {"aggregate", aggregate}};
  const fs::path out = cfg.path("out");
  ensure_parent(out);
  io::write_json(out, report);
  write_sidecar(out.string() + ".config.json", cfg);
  log_line("eval: " + std::to_string(items.size()) + " items -> " + out.string());
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Mask-guided diffusion lesion filling and synthesis"};
  app.require_subcommand(1);
  Overrides o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--seed", o.seed, "Master RNG seed");
  };

  auto* gen = app.add_subcommand("gen-phantoms", "Generate a phantom corpus");
  common(gen);
  add_path(gen, o, "--out", "out", "Output directory");
  gen->add_option("--n", o.n, "Number of phantom pairs");
  gen->add_option("--size", o.size, "Phantom side length in pixels");
  gen->add_option("--lesion-free-fraction", o.lesion_free_fraction, "Fraction of lesion-free pairs");

  auto* tr = app.add_subcommand("train", "Train the mask-conditioned denoiser");
  common(tr);
  add_path(tr, o, "--corpus", "corpus", "Phantom corpus directory");
  add_path(tr, o, "--out", "out", "Output weights file (DMWT)");
  add_path(tr, o, "--log", "log", "Loss log CSV (default <out>.loss.csv)");
  tr->add_option("--epochs", o.epochs, "Training epochs");
  tr->add_option("--batch-size", o.batch_size, "Minibatch size");
  tr->add_option("--lr", o.lr, "Adam learning rate");
  tr->add_option("--steps", o.steps, "Diffusion steps T");
  tr->add_option("--arch", o.arch, "Network kind: unet or mlp");

  auto* fl = app.add_subcommand("fill", "Fill lesions with healthy-looking tissue");
  common(fl);
  add_path(fl, o, "--image", "image", "Input image (IGRD)");
  add_path(fl, o, "--mask", "mask", "Lesion mask (P5)");
  add_path(fl, o, "--weights", "weights", "Model weights (DMWT)");
  add_path(fl, o, "--out", "out", "Output image (IGRD)");
  add_path(fl, o, "--truth", "truth", "Optional lesion-free ground truth (IGRD)");
  add_path(fl, o, "--wm-mask", "wm_mask", "Optional white-matter mask for region statistics");
  add_path(fl, o, "--report", "report", "Report JSON (default <out>.report.json)");
  add_sampler_flags(fl, o);

  auto* sy = app.add_subcommand("synth", "Synthesize lesions inside a target mask");
  common(sy);
  add_path(sy, o, "--image", "image", "Input image (IGRD)");
  add_path(sy, o, "--mask,--target-mask", "mask", "Target lesion mask (P5)");
  add_path(sy, o, "--weights", "weights", "Model weights (DMWT)");
  add_path(sy, o, "--out", "out", "Output image (IGRD)");
  add_path(sy, o, "--wm-mask", "wm_mask", "White-matter mask; the target is intersected with it");
  add_path(sy, o, "--report", "report", "Report JSON (default <out>.report.json)");
  add_sampler_flags(sy, o);

  auto* ev = app.add_subcommand("eval", "Compare a prediction directory against ground truth");
  common(ev);
  add_path(ev, o, "--pred", "pred", "Prediction directory");
  add_path(ev, o, "--truth", "truth", "Ground-truth directory");
  add_path(ev, o, "--out", "out", "Aggregate metrics JSON");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (gen->parsed()) gen_phantoms(build_config("gen-phantoms", o));
    if (tr->parsed()) train(build_config("train", o));
    if (fl->parsed()) fill(build_config("fill", o));
    if (sy->parsed()) synth(build_config("synth", o));
    if (ev->parsed()) eval(build_config("eval", o));
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DomainError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kSuccess;
}

}  // namespace lesiondiff::cli
