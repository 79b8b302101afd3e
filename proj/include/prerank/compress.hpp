#pragma once

#include <cstdint>
#include <vector>

#include "prerank/encoder.hpp"
#include "prerank/half.hpp"
#include "prerank/matrix.hpp"
#include "prerank/model.hpp"

namespace prerank {

enum class Precision : std::uint8_t { F32 = 1, F16 = 2 };

inline int bytes_per_value(Precision p) { return p == Precision::F32 ? 4 : 2; }

// Per-token document representations as they sit in storage: comp_dim wide
// when the compression unit is enabled, d_model wide otherwise.
struct CompressedReps {
    int rows = 0;
    int dim = 0;
    Precision precision = Precision::F32;
    std::vector<float> f32;
    std::vector<std::uint16_t> f16;

    std::size_t count() const { return static_cast<std::size_t>(rows) * dim; }
};

// r = gelu(s_l W_comp + b_comp)
CompressedReps compress(const Matrix& s_l, const Weights& w, const ModelConfig& cfg);

// s_hat_l = layer_norm(r W_decomp + b_decomp); widens f16 first.
Matrix decompress(const CompressedReps& r, const Weights& w, const ModelConfig& cfg);

// Storage precision conversion. quantize counts saturating clamps.
CompressedReps quantize_reps(const CompressedReps& r, std::size_t* clamped = nullptr);
CompressedReps widen_reps(const CompressedReps& r);

// Packs raw s_l rows (compression disabled) or compresses them (enabled).
CompressedReps reps_for_storage(const Matrix& s_l, const Weights& w, const ModelConfig& cfg,
                                Precision precision, std::size_t* clamped = nullptr);
// Inverse of reps_for_storage up to the declared precision: widen, then either
// decompress or reinterpret as raw rows.
Matrix reps_from_storage(const CompressedReps& stored, const Weights& w, const ModelConfig& cfg);

// Applies compress-then-decompress in place to the document rows of a joint
// state matrix; query rows are never compressed.
void apply_compression_roundtrip(Matrix& state, const std::vector<Side>& sides, const Weights& w,
                                 const ModelConfig& cfg);

// Eq-style attention matching objective: mean squared error between
// post-softmax attention tensors, averaged over all entries per layer and then
// over layers. Inputs are the layers after the split point, in order.
double attention_match_loss(const std::vector<AttentionSlice>& orig,
                            const std::vector<AttentionSlice>& comp);

}  // namespace prerank
