#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioembed/model.hpp"
#include "bioembed/vocabulary.hpp"

namespace bioembed {

// Layout: "BCK1", u32 LE header length, UTF-8 JSON header, then every
// parameter block (ModelParams order, Eigen column-major) as LE float32.
struct CheckpointHeader {
    std::string phase = "init";  // init | one | two
    std::uint64_t seed = 0;
    std::vector<std::string> classes;
    std::map<std::string, Taxon> taxonomy;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

nlohmann::ordered_json dims_to_json(const ModelDims& dims);
ModelDims dims_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const CheckpointHeader& header);

struct Checkpoint {
    ModelParams params;
    CheckpointHeader header;
    std::uint64_t checksum = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the float32 parameter payload exactly as it is stored.
std::uint64_t params_checksum(const ModelParams& params);

// Rounds every parameter through float32, matching a save/load cycle.
void round_to_float(ModelParams& params);

}  // namespace bioembed
