#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "lesiondiff/denoiser.hpp"
#include "lesiondiff/eval.hpp"
#include "lesiondiff/image.hpp"
#include "lesiondiff/network.hpp"
#include "lesiondiff/schedule.hpp"

// File formats:
//   IGRD  "IGRD", u32 version=1, u32 height, u32 width, u32 channels, then f32 samples,
//         row-major, channel-last, all little-endian.
//   P5    binary NetPBM masks, maxval 255 (255 = mask, 0 = background).
//   DMWT  "DMWT", u32 version=1, u32 descriptor length, UTF-8 JSON descriptor, then records
//         [u32 name length, name, u32 rank, u32 dims..., f32 data].
namespace lesiondiff::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_igrd(const fs::path& path, const ImageGrid& image);
ImageGrid read_igrd(const fs::path& path);

void write_mask(const fs::path& path, const Mask& mask);
Mask read_mask(const fs::path& path);

json arch_to_json(const ArchDescriptor& arch);
ArchDescriptor arch_from_json(const json& j);

// Weights descriptor: architecture, schedule parameters and intensity normalization.
void write_weights(const fs::path& path, const Network<float>& net, const NoiseSchedule& sched);
NetworkDenoiser read_weights(const fs::path& path);

json report_to_json(const MetricsReport& r);
// Throws IoError naming the first violation of the report schema.
void validate_report_json(const json& j);

// Writes `j` pretty-printed with a trailing newline.
void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

// Throws ConfigError if `j` has a key outside `allowed`.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& section);

}  // namespace lesiondiff::io
