#include "prerank/pretrain.hpp"

#include <algorithm>
#include <random>

#include "prerank/compress.hpp"
#include "prerank/split.hpp"

namespace prerank {

namespace {

std::vector<AttentionSlice> tail_attns(std::vector<AttentionSlice> attns, int split_layer) {
    return {attns.begin() + split_layer, attns.end()};
}

}  // namespace

double holdout_attention_loss(const Weights& w, const ModelConfig& cfg,
                              const std::vector<TextPair>& pairs) {
    if (!cfg.compression_enabled()) throw input_error("holdout loss: compression unit disabled");
    if (cfg.split_layer >= cfg.n_layers) {
        throw input_error("holdout loss: no layers after the split point");
    }
    double total = 0.0;
    for (const TextPair& p : pairs) {
        const EncodedSequence seq = make_joint_sequence(p.heading, p.paragraph, cfg);
        FullForwardOptions plain;
        plain.collect_attns = true;
        FullForwardOptions comp = plain;
        comp.with_compression = true;
        const ForwardResult orig = full_sequence_forward(seq, w, cfg, plain);
        const ForwardResult hat = full_sequence_forward(seq, w, cfg, comp);
        total += attention_match_loss(tail_attns(orig.attns, cfg.split_layer),
                                      tail_attns(hat.attns, cfg.split_layer));
    }
    return pairs.empty() ? 0.0 : total / static_cast<double>(pairs.size());
}

PretrainResult pretrain_compressor(const ModelConfig& cfg, Weights w,
                                   const std::vector<TextPair>& train_pairs,
                                   const std::vector<TextPair>& holdout_pairs,
                                   const PretrainHyper& hyper) {
    if (!cfg.compression_enabled()) {
        throw input_error("pretrain_compressor: compression unit disabled");
    }
    if (cfg.split_layer >= cfg.n_layers) {
        throw input_error("pretrain_compressor: split layer must leave layers to match");
    }
    if (train_pairs.empty()) throw input_error("pretrain_compressor: empty pair stream");

    const int n_tail = cfg.n_layers - cfg.split_layer;
    const float layer_weight = 1.0f / static_cast<float>(n_tail);
    const float head_weight = 1.0f / static_cast<float>(cfg.n_heads);

    std::mt19937_64 rng(hyper.seed);
    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    OptimizerState opt = OptimizerState::make(w, hyper.adam);

    PretrainResult result;
    result.initial_holdout_loss = holdout_attention_loss(w, cfg, holdout_pairs);
    result.best_holdout_loss = result.initial_holdout_loss;
    result.best_step = 0;
    result.weights = w;

    int evals_since_best = 0;
    std::size_t cursor = 0;
    int step = 0;
    while (cursor < order.size()) {
        const std::size_t take = std::min<std::size_t>(hyper.batch_pairs, order.size() - cursor);
        Tape tape;
        const TapedWeights tw = register_weights(tape, w, Trainable::CompressionOnly);
        Tape::Var batch_loss{};
        for (std::size_t b = 0; b < take; ++b) {
            const TextPair& pair = train_pairs[order[cursor + b]];
            const EncodedSequence seq = make_joint_sequence(pair.heading, pair.paragraph, cfg);
            // Targets and the split-layer state come from the frozen network.
            FullForwardOptions plain;
            plain.collect_attns = true;
            plain.collect_states = true;
            const ForwardResult base = full_sequence_forward(seq, w, cfg, plain);
            const TapedForward hat =
                taped_forward_from_split(tape, tw, base.states[cfg.split_layer], seq.sides, cfg);

            Tape::Var pair_loss{};
            for (int layer = 0; layer < n_tail; ++layer) {
                const AttentionSlice& target = base.attns[cfg.split_layer + layer];
                for (int head = 0; head < cfg.n_heads; ++head) {
                    Tape::Var term = tape.scale(
                        tape.mse_vs(hat.attns[layer][head], target[head]),
                        layer_weight * head_weight);
                    pair_loss = pair_loss.valid() ? tape.add(pair_loss, term) : term;
                }
            }
            batch_loss = batch_loss.valid() ? tape.add(batch_loss, pair_loss) : pair_loss;
        }
        batch_loss = tape.scale(batch_loss, 1.0f / static_cast<float>(take));
        tape.backward(batch_loss);
        std::vector<Matrix> g = read_param_grads(tape, tw, w);
        adam_step(w, g, opt);
        cursor += take;
        ++step;
        result.step_losses.push_back(tape.value(batch_loss).v[0]);

        if (step % hyper.eval_every == 0 || cursor >= order.size()) {
            const double holdout = holdout_attention_loss(w, cfg, holdout_pairs);
            if (holdout < result.best_holdout_loss) {
                result.best_holdout_loss = holdout;
                result.best_step = step;
                result.weights = w;
                evals_since_best = 0;
            } else {
                ++evals_since_best;
                if (evals_since_best >= hyper.patience) break;
            }
        }
    }
    result.steps_run = step;
    return result;
}

}  // namespace prerank
