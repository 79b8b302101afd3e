#pragma once

#include <string>
#include <vector>

#include "prerank/autodiff.hpp"
#include "prerank/model.hpp"
#include "prerank/split.hpp"

namespace prerank {

enum class Trainable { All, CompressionOnly };

// Weight tensors registered on a tape. `ordered` mirrors the for_each_param
// visitation order, so gradients can be read back positionally.
struct TapedWeights {
    struct Layer {
        Tape::Var w_q, w_k, w_v, w_o;
        Tape::Var ff_w1, ff_b1, ff_w2, ff_b2;
        Tape::Var ln1_g, ln1_b, ln2_g, ln2_b;
    };
    Tape::Var tok_emb, seg_emb, pos_emb, emb_ln_g, emb_ln_b;
    std::vector<Layer> layers;
    Tape::Var w_combine;
    Tape::Var w_comp, b_comp, w_decomp, b_decomp, dec_ln_g, dec_ln_b;
    bool has_compression = false;
    std::vector<Tape::Var> ordered;
};

TapedWeights register_weights(Tape& tape, const Weights& w, Trainable which);

struct TapedForward {
    Tape::Var cls;                              // 1 x d
    std::vector<std::vector<Tape::Var>> attns;  // [layer][head], post-softmax
    std::vector<Tape::Var> states;              // s_0 .. s_n
};

// Full masked forward on the tape; numerically identical to the plain encoder
// because every node evaluates through the same kernels.
TapedForward taped_forward(Tape& tape, const TapedWeights& tw, const EncodedSequence& seq,
                           const ModelConfig& cfg, bool with_compression);

// Resumes from a precomputed split-layer state: splices the compression unit
// into the document rows, then runs layers l+1..n. Used by compressor
// pre-training, where layers 1..l carry no compression gradient.
TapedForward taped_forward_from_split(Tape& tape, const TapedWeights& tw, const Matrix& s_l,
                                      const std::vector<Side>& sides, const ModelConfig& cfg);

Tape::Var taped_score(Tape& tape, const TapedWeights& tw, Tape::Var cls);

// Gradients in for_each_param order; missing grads come back as zero matrices.
std::vector<Matrix> read_param_grads(const Tape& tape, const TapedWeights& tw, const Weights& w);

}  // namespace prerank
