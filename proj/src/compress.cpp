#include "prerank/compress.hpp"

namespace prerank {

CompressedReps compress(const Matrix& s_l, const Weights& w, const ModelConfig& cfg) {
    if (!cfg.compression_enabled()) throw input_error("compress: compression unit disabled");
    if (s_l.cols != cfg.d_model) throw input_error("compress: input width != d_model");
    const Matrix r = gelu(add_row_vector(matmul(s_l, w.w_comp), w.b_comp));
    CompressedReps out;
    out.rows = r.rows;
    out.dim = cfg.comp_dim;
    out.precision = Precision::F32;
    out.f32 = r.v;
    return out;
}

Matrix decompress(const CompressedReps& r, const Weights& w, const ModelConfig& cfg) {
    if (!cfg.compression_enabled()) throw input_error("decompress: compression unit disabled");
    if (r.dim != cfg.comp_dim) throw input_error("decompress: input width != comp_dim");
    const CompressedReps wide = r.precision == Precision::F16 ? widen_reps(r) : r;
    Matrix rm(wide.rows, wide.dim, wide.f32);
    return layer_norm(add_row_vector(matmul(rm, w.w_decomp), w.b_decomp), w.dec_ln_gamma,
                      w.dec_ln_beta);
}

CompressedReps quantize_reps(const CompressedReps& r, std::size_t* clamped) {
    if (r.precision == Precision::F16) return r;
    CompressedReps out;
    out.rows = r.rows;
    out.dim = r.dim;
    out.precision = Precision::F16;
    HalfVector hv = to_half(r.f32);
    out.f16 = std::move(hv.bits);
    if (clamped) *clamped += hv.clamped;
    return out;
}

CompressedReps widen_reps(const CompressedReps& r) {
    if (r.precision == Precision::F32) return r;
    CompressedReps out;
    out.rows = r.rows;
    out.dim = r.dim;
    out.precision = Precision::F32;
    out.f32 = from_half(r.f16);
    return out;
}

CompressedReps reps_for_storage(const Matrix& s_l, const Weights& w, const ModelConfig& cfg,
                                Precision precision, std::size_t* clamped) {
    CompressedReps reps;
    if (cfg.compression_enabled()) {
        reps = compress(s_l, w, cfg);
    } else {
        reps.rows = s_l.rows;
        reps.dim = s_l.cols;
        reps.precision = Precision::F32;
        reps.f32 = s_l.v;
    }
    if (precision == Precision::F16) reps = quantize_reps(reps, clamped);
    return reps;
}

Matrix reps_from_storage(const CompressedReps& stored, const Weights& w, const ModelConfig& cfg) {
    if (cfg.compression_enabled()) return decompress(stored, w, cfg);
    const CompressedReps wide = stored.precision == Precision::F16 ? widen_reps(stored) : stored;
    if (wide.dim != cfg.d_model) throw input_error("reps_from_storage: width != d_model");
    return Matrix(wide.rows, wide.dim, wide.f32);
}

void apply_compression_roundtrip(Matrix& state, const std::vector<Side>& sides, const Weights& w,
                                 const ModelConfig& cfg) {
    if (!cfg.compression_enabled()) return;
    if (static_cast<int>(sides.size()) != state.rows) {
        throw input_error("apply_compression_roundtrip: sides/state row mismatch");
    }
    int doc_begin = -1;
    int doc_end = -1;
    for (int i = 0; i < state.rows; ++i) {
        if (is_doc_side(sides[i])) {
            if (doc_begin < 0) doc_begin = i;
            doc_end = i + 1;
        } else if (doc_begin >= 0) {
            throw input_error("apply_compression_roundtrip: document rows not contiguous");
        }
    }
    if (doc_begin < 0) return;
    const Matrix doc_rows = slice_rows(state, doc_begin, doc_end);
    const Matrix restored = decompress(compress(doc_rows, w, cfg), w, cfg);
    std::copy(restored.v.begin(), restored.v.end(), state.row(doc_begin));
}

double attention_match_loss(const std::vector<AttentionSlice>& orig,
                            const std::vector<AttentionSlice>& comp) {
    if (orig.empty() || orig.size() != comp.size()) {
        throw input_error("attention_match_loss: layer count mismatch or empty");
    }
    double layer_sum = 0.0;
    for (std::size_t i = 0; i < orig.size(); ++i) {
        if (orig[i].size() != comp[i].size()) {
            throw input_error("attention_match_loss: head count mismatch");
        }
        double sq = 0.0;
        std::size_t entries = 0;
        for (std::size_t h = 0; h < orig[i].size(); ++h) {
            const Matrix& a = orig[i][h];
            const Matrix& b = comp[i][h];
            if (!a.same_shape(b)) throw input_error("attention_match_loss: shape mismatch");
            for (std::size_t k = 0; k < a.v.size(); ++k) {
                const double delta = static_cast<double>(a.v[k]) - b.v[k];
                sq += delta * delta;
            }
            entries += a.v.size();
        }
        layer_sum += sq / static_cast<double>(entries);
    }
    return layer_sum / static_cast<double>(orig.size());
}

}  // namespace prerank
