#pragma once

#include <string>

#include <json.hpp>

#include "hyperquant/hypernet.hpp"
#include "hyperquant/target_net.hpp"

namespace hq {

// Single-file checkpoint: 8-byte magic, u32 little-endian manifest length,
// JSON manifest, then the parameter payload as contiguous little-endian f32
// buffers in descriptor order. load(save(x)) restores parameters bitwise.
//
// Manifest fields: format version, target spec name and class count, bit
// range, hidden width, delta, final training loss, and one descriptor per
// tensor (name, shape, byte offset, byte length). Offsets and lengths must
// tile the payload exactly.
void save_checkpoint(const std::string& path, const HyperNet& net, const TargetNetSpec& spec, double final_loss);

struct LoadedCheckpoint {
    HyperNet net;
    std::string target_name;
    int class_count = 0;
    double final_loss = 0.0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Reads only the manifest JSON (for tooling and validation).
nlohmann::json read_checkpoint_manifest(const std::string& path);

}  // namespace hq
