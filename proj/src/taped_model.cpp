#include "prerank/taped_model.hpp"

#include <cmath>

namespace prerank {

TapedWeights register_weights(Tape& tape, const Weights& w, Trainable which) {
    TapedWeights tw;
    const bool all = which == Trainable::All;
    auto reg = [&](const Matrix& m, bool trainable) {
        Tape::Var v = trainable ? tape.param(m) : tape.constant(m);
        tw.ordered.push_back(v);
        return v;
    };
    tw.tok_emb = reg(w.tok_emb, all);
    tw.seg_emb = reg(w.seg_emb, all);
    tw.pos_emb = reg(w.pos_emb, all);
    tw.emb_ln_g = reg(w.emb_ln_gamma, all);
    tw.emb_ln_b = reg(w.emb_ln_beta, all);
    for (const auto& lw : w.layers) {
        TapedWeights::Layer tl;
        tl.w_q = reg(lw.w_q, all);
        tl.w_k = reg(lw.w_k, all);
        tl.w_v = reg(lw.w_v, all);
        tl.w_o = reg(lw.w_o, all);
        tl.ff_w1 = reg(lw.ff_w1, all);
        tl.ff_b1 = reg(lw.ff_b1, all);
        tl.ff_w2 = reg(lw.ff_w2, all);
        tl.ff_b2 = reg(lw.ff_b2, all);
        tl.ln1_g = reg(lw.ln1_gamma, all);
        tl.ln1_b = reg(lw.ln1_beta, all);
        tl.ln2_g = reg(lw.ln2_gamma, all);
        tl.ln2_b = reg(lw.ln2_beta, all);
        tw.layers.push_back(tl);
    }
    tw.w_combine = reg(w.w_combine, all);
    if (!w.w_comp.empty()) {
        tw.has_compression = true;
        tw.w_comp = reg(w.w_comp, true);
        tw.b_comp = reg(w.b_comp, true);
        tw.w_decomp = reg(w.w_decomp, true);
        tw.b_decomp = reg(w.b_decomp, true);
        tw.dec_ln_g = reg(w.dec_ln_gamma, true);
        tw.dec_ln_b = reg(w.dec_ln_beta, true);
    }
    return tw;
}

namespace {

Tape::Var taped_embed(Tape& tape, const TapedWeights& tw, const EncodedSequence& seq) {
    Tape::Var tok = tape.gather_rows(tw.tok_emb, seq.token_ids);
    Tape::Var seg = tape.gather_rows(tw.seg_emb, seq.segment_ids);
    Tape::Var pos = tape.gather_rows(tw.pos_emb, seq.position_ids);
    return tape.layer_norm(tape.add(tape.add(tok, seg), pos), tw.emb_ln_g, tw.emb_ln_b);
}

struct TapedLayerOut {
    Tape::Var state;
    std::vector<Tape::Var> attn;
};

TapedLayerOut taped_layer(Tape& tape, const TapedWeights::Layer& lw, Tape::Var x,
                          const BoolMask& mask, const ModelConfig& cfg) {
    const int dh = cfg.head_dim();
    const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));
    Tape::Var q = tape.matmul(x, lw.w_q);
    Tape::Var k = tape.matmul(x, lw.w_k);
    Tape::Var v = tape.matmul(x, lw.w_v);
    std::vector<Tape::Var> contexts;
    TapedLayerOut out;
    for (int head = 0; head < cfg.n_heads; ++head) {
        const int c0 = head * dh;
        Tape::Var qh = tape.slice_cols(q, c0, c0 + dh);
        Tape::Var kh = tape.slice_cols(k, c0, c0 + dh);
        Tape::Var vh = tape.slice_cols(v, c0, c0 + dh);
        Tape::Var scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dh);
        Tape::Var attn = tape.masked_softmax(scores, mask);
        contexts.push_back(tape.matmul(attn, vh));
        out.attn.push_back(attn);
    }
    Tape::Var proj = tape.matmul(tape.concat_cols(contexts), lw.w_o);
    Tape::Var h1 = tape.layer_norm(tape.add(x, proj), lw.ln1_g, lw.ln1_b);
    Tape::Var ffh = tape.gelu(tape.add_row_vector(tape.matmul(h1, lw.ff_w1), lw.ff_b1));
    Tape::Var ff = tape.add_row_vector(tape.matmul(ffh, lw.ff_w2), lw.ff_b2);
    out.state = tape.layer_norm(tape.add(h1, ff), lw.ln2_g, lw.ln2_b);
    return out;
}

// compress + decompress spliced into the document rows.
Tape::Var taped_compression(Tape& tape, const TapedWeights& tw, Tape::Var state,
                            const std::vector<Side>& sides) {
    int doc_begin = -1;
    int doc_end = -1;
    for (std::size_t i = 0; i < sides.size(); ++i) {
        if (is_doc_side(sides[i])) {
            if (doc_begin < 0) doc_begin = static_cast<int>(i);
            doc_end = static_cast<int>(i) + 1;
        }
    }
    if (doc_begin < 0) return state;
    Tape::Var doc = tape.slice_rows(state, doc_begin, doc_end);
    Tape::Var r = tape.gelu(tape.add_row_vector(tape.matmul(doc, tw.w_comp), tw.b_comp));
    Tape::Var restored = tape.layer_norm(
        tape.add_row_vector(tape.matmul(r, tw.w_decomp), tw.b_decomp), tw.dec_ln_g, tw.dec_ln_b);
    return tape.overwrite_rows(state, restored, doc_begin);
}

}  // namespace

TapedForward taped_forward(Tape& tape, const TapedWeights& tw, const EncodedSequence& seq,
                           const ModelConfig& cfg, bool with_compression) {
    const MaskSchedule schedule = build_mask_schedule(seq.sides, cfg.split_layer, cfg.n_layers);
    TapedForward out;
    Tape::Var state = taped_embed(tape, tw, seq);
    if (with_compression && tw.has_compression && cfg.split_layer == 0) {
        state = taped_compression(tape, tw, state, seq.sides);
    }
    out.states.push_back(state);
    for (int i = 0; i < cfg.n_layers; ++i) {
        TapedLayerOut lo = taped_layer(tape, tw.layers[i], state, schedule[i], cfg);
        state = lo.state;
        if (with_compression && tw.has_compression && cfg.split_layer == i + 1) {
            state = taped_compression(tape, tw, state, seq.sides);
        }
        out.states.push_back(state);
        out.attns.push_back(std::move(lo.attn));
    }
    out.cls = tape.slice_rows(state, 0, 1);
    return out;
}

TapedForward taped_forward_from_split(Tape& tape, const TapedWeights& tw, const Matrix& s_l,
                                      const std::vector<Side>& sides, const ModelConfig& cfg) {
    if (!tw.has_compression) {
        throw input_error("taped_forward_from_split: compression unit required");
    }
    const BoolMask open = build_attention_mask(sides, /*cross_side_allowed=*/true);
    TapedForward out;
    Tape::Var state = taped_compression(tape, tw, tape.constant(s_l), sides);
    out.states.push_back(state);
    for (int i = cfg.split_layer; i < cfg.n_layers; ++i) {
        TapedLayerOut lo = taped_layer(tape, tw.layers[i], state, open, cfg);
        state = lo.state;
        out.states.push_back(state);
        out.attns.push_back(std::move(lo.attn));
    }
    out.cls = tape.slice_rows(state, 0, 1);
    return out;
}

Tape::Var taped_score(Tape& tape, const TapedWeights& tw, Tape::Var cls) {
    return tape.matmul(cls, tw.w_combine);
}

std::vector<Matrix> read_param_grads(const Tape& tape, const TapedWeights& tw, const Weights& w) {
    std::vector<Matrix> grads;
    grads.reserve(tw.ordered.size());
    std::size_t i = 0;
    for_each_param(w, [&](const std::string&, const Matrix& m) {
        const Matrix& g = tape.grad(tw.ordered[i]);
        grads.push_back(g.empty() ? Matrix(m.rows, m.cols) : g);
        ++i;
    });
    return grads;
}

}  // namespace prerank
