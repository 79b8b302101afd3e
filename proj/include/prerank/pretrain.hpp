#pragma once

#include <cstdint>
#include <vector>

#include "prerank/model.hpp"
#include "prerank/train.hpp"

namespace prerank {

// Heading/paragraph pair used to pre-train the compression unit. `matched`
// records whether the heading belongs to the paragraph; the attention-matching
// objective itself is label-free.
struct TextPair {
    std::vector<int> heading;
    std::vector<int> paragraph;
    bool matched = true;
};

struct PretrainHyper {
    AdamHyper adam{.lr = 2e-3f};
    int batch_pairs = 16;
    int eval_every = 64;   // optimizer steps between held-out evaluations
    int patience = 5;      // stop after this many evaluations without improvement
    std::uint64_t seed = 1;
};

struct PretrainResult {
    Weights weights;                 // compression parameters from the best evaluation
    std::vector<float> step_losses;  // per-step training loss
    double initial_holdout_loss = 0.0;
    double best_holdout_loss = 0.0;
    int best_step = 0;
    int steps_run = 0;
};

// Held-out attention-matching loss of the model with the compression unit
// spliced in, against the same model without it.
double holdout_attention_loss(const Weights& w, const ModelConfig& cfg,
                              const std::vector<TextPair>& pairs);

// Trains only the compression parameters to minimize the attention-matching
// loss over the pair stream. Everything else stays frozen. Returns the
// parameters from the best held-out evaluation (the initial state counts).
PretrainResult pretrain_compressor(const ModelConfig& cfg, Weights w,
                                   const std::vector<TextPair>& train_pairs,
                                   const std::vector<TextPair>& holdout_pairs,
                                   const PretrainHyper& hyper);

}  // namespace prerank
