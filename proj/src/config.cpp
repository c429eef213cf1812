#include "lesiondiff/config.hpp"

#include <algorithm>

#include "lesiondiff/errors.hpp"
#include "lesiondiff/io.hpp"

namespace lesiondiff {

using nlohmann::json;

namespace {

const char* const kPathKeys[] = {"corpus", "out",   "image", "mask", "weights", "truth",
                                 "report", "wm_mask", "pred", "log"};

template <typename T>
void read(const json& j, const char* key, T& dst, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

}  // namespace

void RunConfig::resolve() {
  train.seed = seed;
  sampler.seed = seed;
}

std::string RunConfig::path(const std::string& key) const {
  const auto it = paths.find(key);
  if (it == paths.end() || it->second.empty()) {
    throw ConfigError(command + ": missing required path '" + key + "'");
  }
  return it->second;
}

bool RunConfig::has_path(const std::string& key) const {
  const auto it = paths.find(key);
  return it != paths.end() && !it->second.empty();
}

json phantom_spec_to_json(const PhantomSpec& s) {
  return json{{"size", s.size},
              {"brain_radius_min", s.brain_radius_min},
              {"brain_radius_max", s.brain_radius_max},
              {"cortex_thickness_min", s.cortex_thickness_min},
              {"cortex_thickness_max", s.cortex_thickness_max},
              {"ventricle_radius_min", s.ventricle_radius_min},
              {"ventricle_radius_max", s.ventricle_radius_max},
              {"lesion_count_min", s.lesion_count_min},
              {"lesion_count_max", s.lesion_count_max},
              {"lesion_radius_min", s.lesion_radius_min},
              {"lesion_radius_max", s.lesion_radius_max},
              {"t1_delta", s.t1_delta},
              {"flair_delta", s.flair_delta},
              {"noise_amplitude", s.noise_amplitude},
              {"smoothing", s.smoothing},
              {"wm_erosion", s.wm_erosion},
              {"lesion_free_fraction", s.lesion_free_fraction}};
}

PhantomSpec phantom_spec_from_json(const json& j) {
  io::reject_unknown_keys(
      j, {"size", "brain_radius_min", "brain_radius_max", "cortex_thickness_min",
          "cortex_thickness_max", "ventricle_radius_min", "ventricle_radius_max",
          "lesion_count_min", "lesion_count_max", "lesion_radius_min", "lesion_radius_max",
          "t1_delta", "flair_delta", "noise_amplitude", "smoothing", "wm_erosion",
          "lesion_free_fraction"},
      "phantom");
  PhantomSpec s;
  const std::string sec = "phantom";
  read(j, "size", s.size, sec);
  read(j, "brain_radius_min", s.brain_radius_min, sec);
  read(j, "brain_radius_max", s.brain_radius_max, sec);
  read(j, "cortex_thickness_min", s.cortex_thickness_min, sec);
  read(j, "cortex_thickness_max", s.cortex_thickness_max, sec);
  read(j, "ventricle_radius_min", s.ventricle_radius_min, sec);
  read(j, "ventricle_radius_max", s.ventricle_radius_max, sec);
  read(j, "lesion_count_min", s.lesion_count_min, sec);
  read(j, "lesion_count_max", s.lesion_count_max, sec);
  read(j, "lesion_radius_min", s.lesion_radius_min, sec);
  read(j, "lesion_radius_max", s.lesion_radius_max, sec);
  read(j, "t1_delta", s.t1_delta, sec);
  read(j, "flair_delta", s.flair_delta, sec);
  read(j, "noise_amplitude", s.noise_amplitude, sec);
  read(j, "smoothing", s.smoothing, sec);
  read(j, "wm_erosion", s.wm_erosion, sec);
  read(j, "lesion_free_fraction", s.lesion_free_fraction, sec);
  s.validate();
  return s;
}

json to_json(const RunConfig& c) {
  json paths = json::object();
  for (const auto& [k, v] : c.paths) paths[k] = v;
  return json{
      {"command", c.command},
      {"seed", c.seed},
      {"schedule", {{"T", c.steps}, {"s", c.offset}}},
      {"corpus", {{"n", c.corpus_size}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"epochs", c.train.epochs},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"adam_eps", c.train.adam_eps}}},
      {"sampler",
       {{"mode", to_string(c.sampler.mode)},
        {"stride", c.sampler.stride},
        {"repaint_reps", c.sampler.repaint_reps},
        {"refine_t", c.sampler.refine_timestep ? json(*c.sampler.refine_timestep) : json(nullptr)},
        {"dilation", c.sampler.mask_dilation},
        {"clip_x0", c.sampler.clip_x0}}},
      {"phantom", phantom_spec_to_json(c.phantom)},
      {"arch", io::arch_to_json(c.arch)},
      {"segment",
       {{"hyper", c.segment.hyper}, {"hypo", c.segment.hypo}, {"min_component", c.segment.min_component}}},
      {"paths", paths}};
}

RunConfig run_config_from_json(const json& j) {
  io::reject_unknown_keys(j, {"command", "seed", "schedule", "corpus", "train", "sampler", "phantom",
                              "arch", "segment", "paths"},
                          "config");
  RunConfig c;
  read(j, "command", c.command, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    io::reject_unknown_keys(s, {"T", "s"}, "schedule");
    read(s, "T", c.steps, "schedule");
    read(s, "s", c.offset, "schedule");
  }
  if (j.contains("corpus")) {
    io::reject_unknown_keys(j["corpus"], {"n"}, "corpus");
    read(j["corpus"], "n", c.corpus_size, "corpus");
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    io::reject_unknown_keys(t, {"learning_rate", "batch_size", "epochs", "beta1", "beta2", "adam_eps"},
                            "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "epochs", c.train.epochs, "train");
    read(t, "beta1", c.train.beta1, "train");
    read(t, "beta2", c.train.beta2, "train");
    read(t, "adam_eps", c.train.adam_eps, "train");
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    io::reject_unknown_keys(s, {"mode", "stride", "repaint_reps", "refine_t", "dilation", "clip_x0"},
                            "sampler");
    if (s.contains("mode")) c.sampler.mode = parse_sampler_mode(s["mode"].get<std::string>());
    read(s, "stride", c.sampler.stride, "sampler");
    read(s, "repaint_reps", c.sampler.repaint_reps, "sampler");
    if (s.contains("refine_t")) {
      if (s["refine_t"].is_null()) {
        c.sampler.refine_timestep.reset();
      } else {
        int t = 0;
        read(s, "refine_t", t, "sampler");
        c.sampler.refine_timestep = t;
      }
    }
    read(s, "dilation", c.sampler.mask_dilation, "sampler");
    read(s, "clip_x0", c.sampler.clip_x0, "sampler");
  }
  if (j.contains("phantom")) c.phantom = phantom_spec_from_json(j["phantom"]);
  if (j.contains("arch")) c.arch = io::arch_from_json(j["arch"]);
  if (j.contains("segment")) {
    const auto& s = j["segment"];
    io::reject_unknown_keys(s, {"hyper", "hypo", "min_component"}, "segment");
    read(s, "hyper", c.segment.hyper, "segment");
    read(s, "hypo", c.segment.hypo, "segment");
    read(s, "min_component", c.segment.min_component, "segment");
  }
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    if (!p.is_object()) throw ConfigError("paths: expected a JSON object");
    for (const auto& [key, value] : p.items()) {
      if (std::find(std::begin(kPathKeys), std::end(kPathKeys), key) == std::end(kPathKeys)) {
        throw ConfigError("paths: unknown key '" + key + "'");
      }
      c.paths[key] = value.get<std::string>();
    }
  }
  return c;
}

}  // namespace lesiondiff
