#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "prerank/matrix.hpp"
#include "prerank/model.hpp"

namespace prerank {

// Post-softmax attention for one layer: one m x m matrix per head (1 x m per
// head when the layer ran CLS-only).
using AttentionSlice = std::vector<Matrix>;

struct LayerOptions {
    bool cls_only = false;      // compute attention and outputs for row 0 only
    bool collect_attn = true;
};

struct LayerOutput {
    Matrix state;               // m x d, or 1 x d when cls_only
    AttentionSlice attn;        // empty unless collect_attn
};

// Mutates the state matrix after layer `after_layer` has run. Used to splice
// the compression unit between layers l and l+1.
struct ForwardHook {
    int after_layer = -1;
    std::function<void(Matrix&)> apply;
};

struct ForwardOptions {
    bool cls_only_last = false;
    bool collect_states = false;
    bool collect_attns = false;
    const ForwardHook* hook = nullptr;
};

struct ForwardResult {
    Matrix cls;                              // 1 x d
    std::vector<Matrix> states;              // s_0 .. s_n when collected
    std::vector<AttentionSlice> attns;       // per layer when collected
};

// s_0 = layer_norm(token + segment + position embeddings).
Matrix embed(const EncodedSequence& seq, const Weights& w, const ModelConfig& cfg);

LayerOutput layer_forward(const Matrix& state, const BoolMask& mask, const LayerWeights& lw,
                          const ModelConfig& cfg, const LayerOptions& opts = {});

ForwardResult forward(const EncodedSequence& seq, const std::vector<BoolMask>& mask_schedule,
                      const Weights& w, const ModelConfig& cfg, const ForwardOptions& opts = {});

float score(const Matrix& cls_rep, const Matrix& w_combine);

// Instrumentation for the compute-accounting checks: how many layer passes ran
// since the last reset, split by full-width vs CLS-only.
struct EncoderCounters {
    std::uint64_t layer_calls = 0;
    std::uint64_t cls_only_layer_calls = 0;
};
EncoderCounters encoder_counters();
void reset_encoder_counters();

}  // namespace prerank
