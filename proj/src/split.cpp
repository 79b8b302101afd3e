#include "prerank/split.hpp"

namespace prerank {

BoolMask build_attention_mask(const std::vector<Side>& sides, bool cross_side_allowed) {
    const int m = static_cast<int>(sides.size());
    BoolMask mask(m, m);
    for (int i = 0; i < m; ++i) {
        if (sides[i] == Side::Pad) {
            mask.set(i, i, true);
            continue;
        }
        for (int j = 0; j < m; ++j) {
            if (sides[j] == Side::Pad) continue;
            if (cross_side_allowed || is_query_side(sides[i]) == is_query_side(sides[j])) {
                mask.set(i, j, true);
            }
        }
    }
    return mask;
}

MaskSchedule build_mask_schedule(const std::vector<Side>& sides, int split_layer, int n_layers) {
    if (split_layer < 0 || split_layer > n_layers) {
        throw input_error("build_mask_schedule: split layer out of [0, n]");
    }
    const BoolMask within = build_attention_mask(sides, /*cross_side_allowed=*/false);
    const BoolMask open = build_attention_mask(sides, /*cross_side_allowed=*/true);
    MaskSchedule schedule;
    schedule.reserve(n_layers);
    for (int i = 1; i <= n_layers; ++i) schedule.push_back(i <= split_layer ? within : open);
    return schedule;
}

namespace {

// Runs layers 1..l of a single-side sequence. Within one side the cross-side
// rule is vacuous, so the mask is just the PAD-aware all-pairs mask.
Matrix encode_side(const EncodedSequence& seq, const Weights& w, const ModelConfig& cfg) {
    Matrix state = embed(seq, w, cfg);
    const BoolMask mask = build_attention_mask(seq.sides, /*cross_side_allowed=*/false);
    LayerOptions lo;
    lo.collect_attn = false;
    for (int i = 0; i < cfg.split_layer; ++i) {
        state = layer_forward(state, mask, w.layers[i], cfg, lo).state;
    }
    return state;
}

}  // namespace

PartialReps precompute_doc(const std::vector<int>& doc_tokens, const Weights& w,
                           const ModelConfig& cfg, const Digest256& model_fp) {
    const EncodedSequence seq = make_doc_sequence(doc_tokens, cfg);
    PartialReps out;
    out.kind = Side::Doc;
    out.reps = encode_side(seq, w, cfg);
    out.sides = seq.sides;
    out.split_layer = cfg.split_layer;
    out.fingerprint = model_fp;
    return out;
}

PartialReps encode_query(const std::vector<int>& query_tokens, const Weights& w,
                         const ModelConfig& cfg, const Digest256& model_fp) {
    const EncodedSequence seq = make_query_sequence(query_tokens, cfg);
    PartialReps out;
    out.kind = Side::Query;
    out.reps = encode_side(seq, w, cfg);
    out.sides = seq.sides;
    out.split_layer = cfg.split_layer;
    out.fingerprint = model_fp;
    return out;
}

float join_and_score(const PartialReps& q, const PartialReps& d, const Weights& w,
                     const ModelConfig& cfg, const Digest256& model_fp, bool cls_only_last) {
    if (q.kind != Side::Query || d.kind != Side::Doc) {
        throw input_error("join_and_score: need one query-side and one doc-side input");
    }
    if (q.fingerprint != model_fp || d.fingerprint != model_fp) {
        throw stale_model_error("join_and_score: representations from a different model");
    }
    if (q.split_layer != cfg.split_layer || d.split_layer != cfg.split_layer) {
        throw stale_model_error("join_and_score: representations from a different split layer");
    }

    Matrix state = concat_rows(q.reps, d.reps);
    std::vector<Side> sides = q.sides;
    sides.insert(sides.end(), d.sides.begin(), d.sides.end());

    const int l = cfg.split_layer;
    const int n = cfg.n_layers;
    if (l < n) {
        const BoolMask open = build_attention_mask(sides, /*cross_side_allowed=*/true);
        for (int i = l; i < n; ++i) {
            LayerOptions lo;
            lo.cls_only = cls_only_last && i == n - 1;
            lo.collect_attn = false;
            state = layer_forward(state, open, w.layers[i], cfg, lo).state;
        }
    }
    return score(slice_rows(state, 0, 1), w.w_combine);
}

PartialReps doc_partial_from_storage(const CompressedReps& stored, const Weights& w,
                                     const ModelConfig& cfg, const Digest256& model_fp) {
    PartialReps out;
    out.kind = Side::Doc;
    out.reps = reps_from_storage(stored, w, cfg);
    out.sides.assign(stored.rows, Side::Doc);
    if (!out.sides.empty()) out.sides.back() = Side::SepD;
    out.split_layer = cfg.split_layer;
    out.fingerprint = model_fp;
    return out;
}

ForwardResult full_sequence_forward(const EncodedSequence& seq, const Weights& w,
                                    const ModelConfig& cfg, const FullForwardOptions& opts) {
    const MaskSchedule schedule = build_mask_schedule(seq.sides, cfg.split_layer, cfg.n_layers);
    ForwardOptions fo;
    fo.cls_only_last = opts.cls_only_last;
    fo.collect_states = opts.collect_states;
    fo.collect_attns = opts.collect_attns;
    ForwardHook hook;
    if (opts.with_compression && cfg.compression_enabled()) {
        hook.after_layer = cfg.split_layer;
        hook.apply = [&](Matrix& state) { apply_compression_roundtrip(state, seq.sides, w, cfg); };
        fo.hook = &hook;
    }
    return forward(seq, schedule, w, cfg, fo);
}

float full_sequence_score(const std::vector<int>& query_tokens, const std::vector<int>& doc_tokens,
                          const Weights& w, const ModelConfig& cfg,
                          const FullForwardOptions& opts) {
    const EncodedSequence seq = make_joint_sequence(query_tokens, doc_tokens, cfg);
    const ForwardResult res = full_sequence_forward(seq, w, cfg, opts);
    return score(res.cls, w.w_combine);
}

}  // namespace prerank
