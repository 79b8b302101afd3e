#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "prerank/model.hpp"
#include "prerank/taped_model.hpp"

namespace prerank {

struct TrainPair {
    std::vector<int> query;
    std::vector<int> pos_doc;
    std::vector<int> neg_doc;
};

// -log(exp(s_pos) / (exp(s_pos) + exp(s_neg))) via softplus(s_neg - s_pos).
float pairwise_softmax_loss(float s_pos, float s_neg);

struct GradientSet {
    std::vector<Matrix> grads;  // for_each_param order
    float loss = 0.0f;          // mean batch loss
};

// Exact gradients of the mean batch loss under the model's mask schedule.
// Compression (when configured) sits inside the scored network, so its
// parameters receive gradients here as well.
GradientSet grads(const Weights& w, const std::vector<TrainPair>& batch, const ModelConfig& cfg);

struct AdamHyper {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct OptimizerState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::int64_t step = 0;
    AdamHyper hyper;

    static OptimizerState make(const Weights& w, const AdamHyper& hyper);
};

void adam_step(Weights& w, const std::vector<Matrix>& grads, OptimizerState& state);

struct ValCandidate {
    std::string doc_id;
    std::vector<int> tokens;
    int grade = 0;
};

struct ValQuery {
    std::string query_id;
    std::vector<int> tokens;
    std::vector<ValCandidate> candidates;
};

struct ValMetrics {
    double p_at_k = 0.0;
    double pairwise_accuracy = 0.0;
};

// Scores every candidate with the full masked forward, ranks by descending
// score (doc_id ascending on ties) and averages P@k over queries. Pairwise
// accuracy counts relevant/non-relevant candidate pairs ordered correctly.
ValMetrics evaluate_validation(const Weights& w, const ModelConfig& cfg,
                               const std::vector<ValQuery>& val, int k);

struct TrainHyper {
    AdamHyper adam;
    int batch_pairs = 16;
    int accum_chunk = 0;     // micro-batch rows per gradient accumulation chunk; 0 = whole batch
    int val_every = 32;      // batches between validations
    int val_k = 10;
    int max_batches = 512;
    std::uint64_t seed = 1;
};

struct TraceEntry {
    int step = 0;
    float loss = 0.0f;
    double val_p_at_k = -1.0;        // -1 when no validation ran at this step
    double val_pair_acc = -1.0;
};

struct TrainResult {
    Weights best;
    double best_metric = 0.0;
    int best_step = 0;
    std::vector<TraceEntry> trace;
};

// `sample_pair` must be deterministic given the hyper seed (it receives a
// seeded RNG). Keeps the checkpoint with the highest validation P@k, starting
// from the untrained model.
TrainResult train(const ModelConfig& cfg, Weights w,
                  const std::function<TrainPair(std::mt19937_64&)>& sample_pair,
                  const std::vector<ValQuery>& val, const TrainHyper& hyper);

}  // namespace prerank
