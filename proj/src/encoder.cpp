#include "prerank/encoder.hpp"

#include <atomic>
#include <cmath>

namespace prerank {

namespace {

std::atomic<std::uint64_t> g_layer_calls{0};
std::atomic<std::uint64_t> g_cls_only_layer_calls{0};

BoolMask mask_row0(const BoolMask& mask) {
    BoolMask row(1, mask.cols);
    for (int j = 0; j < mask.cols; ++j) row.set(0, j, mask.at(0, j));
    return row;
}

}  // namespace

Matrix embed(const EncodedSequence& seq, const Weights& w, const ModelConfig& cfg) {
    const int m = seq.size();
    if (m == 0) throw input_error("embed: empty sequence");
    if (m > cfg.max_len) throw input_error("embed: sequence longer than max_len");
    const int d = cfg.d_model;
    Matrix sum(m, d);
    for (int i = 0; i < m; ++i) {
        const int tok = seq.token_ids[i];
        const int seg = seq.segment_ids[i];
        const int pos = seq.position_ids[i];
        if (tok < 0 || tok >= cfg.vocab_size) throw input_error("embed: token id out of range");
        if (seg < 0 || seg >= 2) throw input_error("embed: segment id out of range");
        if (pos < 0 || pos >= cfg.max_len) throw input_error("embed: position id out of range");
        const float* t = w.tok_emb.row(tok);
        const float* s = w.seg_emb.row(seg);
        const float* p = w.pos_emb.row(pos);
        float* out = sum.row(i);
        for (int j = 0; j < d; ++j) out[j] = t[j] + s[j] + p[j];
    }
    return layer_norm(sum, w.emb_ln_gamma, w.emb_ln_beta);
}

LayerOutput layer_forward(const Matrix& state, const BoolMask& mask, const LayerWeights& lw,
                          const ModelConfig& cfg, const LayerOptions& opts) {
    const int m = state.rows;
    const int d = cfg.d_model;
    const int h = cfg.n_heads;
    const int dh = cfg.head_dim();
    if (state.cols != d) throw input_error("layer_forward: state width != d_model");
    if (mask.rows != m || mask.cols != m) throw input_error("layer_forward: mask dims != m x m");

    g_layer_calls.fetch_add(1, std::memory_order_relaxed);
    if (opts.cls_only) g_cls_only_layer_calls.fetch_add(1, std::memory_order_relaxed);

    const Matrix q_in = opts.cls_only ? slice_rows(state, 0, 1) : state;
    const BoolMask attn_mask = opts.cls_only ? mask_row0(mask) : mask;

    const Matrix q = matmul(q_in, lw.w_q);
    const Matrix k = matmul(state, lw.w_k);
    const Matrix v = matmul(state, lw.w_v);
    const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));

    LayerOutput out;
    std::vector<Matrix> contexts;
    contexts.reserve(h);
    if (opts.collect_attn) out.attn.reserve(h);
    for (int head = 0; head < h; ++head) {
        const int c0 = head * dh;
        const Matrix qh = slice_cols(q, c0, c0 + dh);
        const Matrix kh = slice_cols(k, c0, c0 + dh);
        const Matrix vh = slice_cols(v, c0, c0 + dh);
        const Matrix scores = scale(matmul_nt(qh, kh), inv_sqrt_dh);
        Matrix attn = masked_softmax_rows(scores, attn_mask);
        contexts.push_back(matmul(attn, vh));
        if (opts.collect_attn) out.attn.push_back(std::move(attn));
    }
    const Matrix proj = matmul(concat_cols(contexts), lw.w_o);
    const Matrix h1 = layer_norm(add(q_in, proj), lw.ln1_gamma, lw.ln1_beta);
    const Matrix ff_hidden = gelu(add_row_vector(matmul(h1, lw.ff_w1), lw.ff_b1));
    const Matrix ff = add_row_vector(matmul(ff_hidden, lw.ff_w2), lw.ff_b2);
    out.state = layer_norm(add(h1, ff), lw.ln2_gamma, lw.ln2_beta);
    return out;
}

ForwardResult forward(const EncodedSequence& seq, const std::vector<BoolMask>& mask_schedule,
                      const Weights& w, const ModelConfig& cfg, const ForwardOptions& opts) {
    if (static_cast<int>(mask_schedule.size()) != cfg.n_layers) {
        throw input_error("forward: mask schedule must have one entry per layer");
    }
    ForwardResult res;
    Matrix state = embed(seq, w, cfg);
    if (opts.hook && opts.hook->after_layer == 0) opts.hook->apply(state);
    if (opts.collect_states) res.states.push_back(state);

    for (int i = 0; i < cfg.n_layers; ++i) {
        LayerOptions lo;
        lo.cls_only = opts.cls_only_last && i == cfg.n_layers - 1;
        lo.collect_attn = opts.collect_attns;
        LayerOutput lout = layer_forward(state, mask_schedule[i], w.layers[i], cfg, lo);
        state = std::move(lout.state);
        if (opts.hook && opts.hook->after_layer == i + 1) opts.hook->apply(state);
        if (opts.collect_states) res.states.push_back(state);
        if (opts.collect_attns) res.attns.push_back(std::move(lout.attn));
    }
    res.cls = slice_rows(state, 0, 1);
    return res;
}

float score(const Matrix& cls_rep, const Matrix& w_combine) {
    if (cls_rep.rows != 1 || w_combine.cols != 1 || cls_rep.cols != w_combine.rows) {
        throw input_error("score: cls_rep must be 1 x d and w_combine d x 1");
    }
    float acc = 0.0f;
    for (int j = 0; j < cls_rep.cols; ++j) acc += cls_rep.v[j] * w_combine.v[j];
    return acc;
}

EncoderCounters encoder_counters() {
    return {g_layer_calls.load(std::memory_order_relaxed),
            g_cls_only_layer_calls.load(std::memory_order_relaxed)};
}

void reset_encoder_counters() {
    g_layer_calls.store(0, std::memory_order_relaxed);
    g_cls_only_layer_calls.store(0, std::memory_order_relaxed);
}

}  // namespace prerank
