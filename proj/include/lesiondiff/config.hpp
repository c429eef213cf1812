#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"
#include "lesiondiff/eval.hpp"
#include "lesiondiff/inpaint.hpp"
#include "lesiondiff/network.hpp"
#include "lesiondiff/phantom.hpp"
#include "lesiondiff/training.hpp"

namespace lesiondiff {

// Everything a CLI run depends on. Parsed from a JSON file (unknown keys are
// rejected), overridden by flags, and written back fully resolved next to the
// outputs so the run can be replayed from that file alone.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  int steps = 1000;
  double offset = NoiseSchedule::kDefaultOffset;
  int corpus_size = 200;
  TrainConfig train;
  SamplerConfig sampler;
  PhantomSpec phantom;
  ArchDescriptor arch;
  SegmentThresholds segment;
  std::map<std::string, std::string> paths;

  // Copies the top-level seed into the train and sampler configs.
  void resolve();
  std::string path(const std::string& key) const;
  bool has_path(const std::string& key) const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json phantom_spec_to_json(const PhantomSpec& s);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

}  // namespace lesiondiff
