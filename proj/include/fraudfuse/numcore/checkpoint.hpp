#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudfuse/numcore/tensor.hpp"

namespace fraudfuse::nc {

// Named-parameter archive.
//
//   bytes 0..4   magic "CFCK1"
//   u64 LE       manifest length in bytes
//   manifest     UTF-8 JSON: {"format":"CFCK1","meta":{...},
//                  "tensors":[{"name","shape":[r,c],"offset","count"}]}
//   payload      float64 LE values, tensors back to back in manifest order;
//                offset/count are in values, relative to the payload start.
inline constexpr char kCheckpointMagic[] = "CFCK1";

struct CheckpointEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

struct Checkpoint {
    nlohmann::json meta;
    std::vector<CheckpointEntry> entries;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies values into a store with the same names and shapes. Throws
// DataError on a missing name or a shape mismatch.
void apply_checkpoint(const Checkpoint& ckpt, ParameterStore& params);

}  // namespace fraudfuse::nc
