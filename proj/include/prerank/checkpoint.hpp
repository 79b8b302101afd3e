#pragma once

#include <string>

#include "prerank/digest.hpp"
#include "prerank/model.hpp"

namespace prerank {

// Weight checkpoint container: "PTWT" magic, u16 format version, u32-length-
// prefixed UTF-8 JSON config header, then each parameter as (u16-length name,
// u32 rows, u32 cols, row-major f32 little-endian). Byte layout is documented
// in docs/FORMATS.md.
std::string serialize_checkpoint(const ModelConfig& cfg, const Weights& w);

struct Checkpoint {
    ModelConfig cfg;
    Weights weights;
    Digest256 fingerprint;  // sha256 of the serialized container
};

Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const Weights& w);
Checkpoint load_checkpoint(const std::string& path);

// Identity of (config, weights): sha256 of the canonical serialization.
Digest256 model_fingerprint(const ModelConfig& cfg, const Weights& w);

}  // namespace prerank
