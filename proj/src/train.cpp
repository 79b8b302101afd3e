#include "prerank/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "prerank/split.hpp"

namespace prerank {

float pairwise_softmax_loss(float s_pos, float s_neg) {
    const float x = s_neg - s_pos;
    return x > 0.0f ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {

GradientSet grads_accumulated(const Weights& w, const std::vector<TrainPair>& batch,
                              const ModelConfig& cfg, int chunk) {
    if (batch.empty()) throw input_error("grads: empty batch");
    const bool with_compression = cfg.compression_enabled();
    if (chunk <= 0) chunk = static_cast<int>(batch.size());

    GradientSet out;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < batch.size(); begin += chunk) {
        const std::size_t end = std::min(batch.size(), begin + chunk);
        Tape tape;
        const TapedWeights tw = register_weights(tape, w, Trainable::All);
        Tape::Var chunk_loss{};
        for (std::size_t i = begin; i < end; ++i) {
            const TrainPair& pair = batch[i];
            const EncodedSequence pos_seq = make_joint_sequence(pair.query, pair.pos_doc, cfg);
            const EncodedSequence neg_seq = make_joint_sequence(pair.query, pair.neg_doc, cfg);
            const TapedForward pos_fwd = taped_forward(tape, tw, pos_seq, cfg, with_compression);
            const TapedForward neg_fwd = taped_forward(tape, tw, neg_seq, cfg, with_compression);
            const Tape::Var s_pos = taped_score(tape, tw, pos_fwd.cls);
            const Tape::Var s_neg = taped_score(tape, tw, neg_fwd.cls);
            const Tape::Var pair_loss = tape.softplus(tape.sub(s_neg, s_pos));
            chunk_loss = chunk_loss.valid() ? tape.add(chunk_loss, pair_loss) : pair_loss;
        }
        tape.backward(chunk_loss);
        loss_sum += tape.value(chunk_loss).v[0];
        std::vector<Matrix> chunk_grads = read_param_grads(tape, tw, w);
        if (out.grads.empty()) {
            out.grads = std::move(chunk_grads);
        } else {
            for (std::size_t i = 0; i < out.grads.size(); ++i) {
                for (std::size_t j = 0; j < out.grads[i].v.size(); ++j) {
                    out.grads[i].v[j] += chunk_grads[i].v[j];
                }
            }
        }
    }
    const float inv_n = 1.0f / static_cast<float>(batch.size());
    for (Matrix& g : out.grads) {
        for (float& x : g.v) x *= inv_n;
    }
    out.loss = static_cast<float>(loss_sum / static_cast<double>(batch.size()));
    return out;
}

}  // namespace

GradientSet grads(const Weights& w, const std::vector<TrainPair>& batch, const ModelConfig& cfg) {
    return grads_accumulated(w, batch, cfg, 0);
}

OptimizerState OptimizerState::make(const Weights& w, const AdamHyper& hyper) {
    OptimizerState st;
    st.hyper = hyper;
    for_each_param(w, [&](const std::string&, const Matrix& m) {
        st.m.emplace_back(m.rows, m.cols);
        st.v.emplace_back(m.rows, m.cols);
    });
    return st;
}

void adam_step(Weights& w, const std::vector<Matrix>& grads, OptimizerState& state) {
    std::size_t idx = 0;
    state.step += 1;
    const AdamHyper& h = state.hyper;
    const float bc1 = 1.0f - std::pow(h.beta1, static_cast<float>(state.step));
    const float bc2 = 1.0f - std::pow(h.beta2, static_cast<float>(state.step));
    for_each_param(w, [&](const std::string& name, Matrix& p) {
        if (idx >= grads.size()) throw input_error("adam_step: gradient list too short");
        const Matrix& g = grads[idx];
        if (!g.same_shape(p)) throw input_error("adam_step: gradient shape mismatch at " + name);
        Matrix& m = state.m[idx];
        Matrix& v = state.v[idx];
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            m.v[i] = h.beta1 * m.v[i] + (1.0f - h.beta1) * g.v[i];
            v.v[i] = h.beta2 * v.v[i] + (1.0f - h.beta2) * g.v[i] * g.v[i];
            const float mhat = m.v[i] / bc1;
            const float vhat = v.v[i] / bc2;
            p.v[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
        }
        ++idx;
    });
    if (idx != grads.size()) throw input_error("adam_step: gradient list too long");
}

ValMetrics evaluate_validation(const Weights& w, const ModelConfig& cfg,
                               const std::vector<ValQuery>& val, int k) {
    FullForwardOptions opts;
    opts.with_compression = cfg.compression_enabled();
    ValMetrics out;
    double p_sum = 0.0;
    int p_queries = 0;
    double pair_correct = 0.0;
    std::uint64_t pair_total = 0;
    for (const ValQuery& q : val) {
        std::vector<std::pair<float, const ValCandidate*>> scored;
        scored.reserve(q.candidates.size());
        for (const ValCandidate& c : q.candidates) {
            scored.emplace_back(full_sequence_score(q.tokens, c.tokens, w, cfg, opts), &c);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second->doc_id < b.second->doc_id;
        });
        int hits = 0;
        const int cutoff = std::min<int>(k, static_cast<int>(scored.size()));
        for (int i = 0; i < cutoff; ++i) {
            if (scored[i].second->grade > 0) ++hits;
        }
        p_sum += static_cast<double>(hits) / static_cast<double>(k);
        ++p_queries;
        for (const auto& [s_pos, cand_pos] : scored) {
            if (cand_pos->grade <= 0) continue;
            for (const auto& [s_neg, cand_neg] : scored) {
                if (cand_neg->grade > 0) continue;
                ++pair_total;
                if (s_pos > s_neg) {
                    pair_correct += 1.0;
                } else if (s_pos == s_neg) {
                    pair_correct += 0.5;
                }
            }
        }
    }
    if (p_queries > 0) out.p_at_k = p_sum / p_queries;
    if (pair_total > 0) out.pairwise_accuracy = pair_correct / static_cast<double>(pair_total);
    return out;
}

TrainResult train(const ModelConfig& cfg, Weights w,
                  const std::function<TrainPair(std::mt19937_64&)>& sample_pair,
                  const std::vector<ValQuery>& val, const TrainHyper& hyper) {
    std::mt19937_64 rng(hyper.seed);
    OptimizerState opt = OptimizerState::make(w, hyper.adam);

    TrainResult result;
    const ValMetrics init_metrics = evaluate_validation(w, cfg, val, hyper.val_k);
    result.best = w;
    result.best_metric = init_metrics.p_at_k;
    result.best_step = 0;
    result.trace.push_back({0, 0.0f, init_metrics.p_at_k, init_metrics.pairwise_accuracy});

    for (int step = 1; step <= hyper.max_batches; ++step) {
        std::vector<TrainPair> batch;
        batch.reserve(hyper.batch_pairs);
        for (int i = 0; i < hyper.batch_pairs; ++i) batch.push_back(sample_pair(rng));
        GradientSet gs = grads_accumulated(w, batch, cfg, hyper.accum_chunk);
        adam_step(w, gs.grads, opt);

        TraceEntry entry;
        entry.step = step;
        entry.loss = gs.loss;
        if (step % hyper.val_every == 0 || step == hyper.max_batches) {
            const ValMetrics metrics = evaluate_validation(w, cfg, val, hyper.val_k);
            entry.val_p_at_k = metrics.p_at_k;
            entry.val_pair_acc = metrics.pairwise_accuracy;
            if (metrics.p_at_k > result.best_metric) {
                result.best = w;
                result.best_metric = metrics.p_at_k;
                result.best_step = step;
            }
        }
        result.trace.push_back(entry);
    }
    return result;
}

}  // namespace prerank
