#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asd/data/manifest.hpp"
#include "asd/model/params.hpp"
#include "asd/train/config.hpp"

namespace asd::train {

inline constexpr int kCheckpointVersion = 1;

// File layout: 8-byte magic "ASDCKPT\0", u64 LE header length, JSON header
// (sorted keys), then one little-endian float32 blob per tensor in the order
// listed under "tensors" in the header.
struct Checkpoint {
    TrainConfig config;           // config.model.num_classes == class_map.size()
    data::ClassMap class_map;
    std::string rng_digest;       // digest of the mixup RNG state at the end of training
    model::ModelParams params;    // values are float32-representable
};

// Rounds every parameter to the nearest float32 so save -> load -> save is
// byte-identical.
void round_to_float32(model::ModelParams& p);

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace asd::train
