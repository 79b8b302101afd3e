#include "prerank/model.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

namespace prerank {

void ModelConfig::validate() const {
    if (n_layers < 0) throw input_error("config: n_layers must be >= 0");
    if (d_model <= 0 || n_heads <= 0 || d_ff <= 0) throw input_error("config: dims must be positive");
    if (d_model % n_heads != 0) throw input_error("config: d_model must be divisible by n_heads");
    if (vocab_size <= kReservedIds) throw input_error("config: vocab_size too small");
    if (q_max <= 0) throw input_error("config: q_max must be positive");
    if (max_len < q_max + 3) throw input_error("config: max_len must be >= q_max + 3");
    if (split_layer < 0 || split_layer > n_layers) {
        throw input_error("config: split_layer must be in [0, n_layers]");
    }
    if (comp_dim < 0 || comp_dim > d_model) {
        throw input_error("config: comp_dim must be in [0, d_model]");
    }
}

std::string ModelConfig::to_json() const {
    nlohmann::ordered_json j;
    j["n_layers"] = n_layers;
    j["d_model"] = d_model;
    j["n_heads"] = n_heads;
    j["d_ff"] = d_ff;
    j["vocab_size"] = vocab_size;
    j["max_len"] = max_len;
    j["q_max"] = q_max;
    j["split_layer"] = split_layer;
    j["comp_dim"] = comp_dim;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("config: bad JSON: ") + e.what());
    }
    ModelConfig cfg;
    const std::vector<std::string> known = {"n_layers", "d_model",  "n_heads", "d_ff",    "vocab_size",
                                            "max_len",  "q_max", "split_layer", "comp_dim"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) ok = ok || it.key() == k;
        if (!ok) throw input_error("config: unknown key '" + it.key() + "'");
    }
    auto get = [&](const char* key, int fallback) { return j.contains(key) ? j.at(key).get<int>() : fallback; };
    cfg.n_layers = get("n_layers", cfg.n_layers);
    cfg.d_model = get("d_model", cfg.d_model);
    cfg.n_heads = get("n_heads", cfg.n_heads);
    cfg.d_ff = get("d_ff", cfg.d_ff);
    cfg.vocab_size = get("vocab_size", cfg.vocab_size);
    cfg.max_len = get("max_len", cfg.max_len);
    cfg.q_max = get("q_max", cfg.q_max);
    cfg.split_layer = get("split_layer", cfg.split_layer);
    cfg.comp_dim = get("comp_dim", cfg.comp_dim);
    cfg.validate();
    return cfg;
}

namespace {

// Box-Muller from the raw 64-bit stream; resamples outside two standard
// deviations. Avoids std::normal_distribution so trajectories only depend on
// the mt19937_64 stream.
class TruncNormal {
  public:
    explicit TruncNormal(std::uint64_t seed) : rng_(seed) {}

    float next(float std_dev) {
        for (;;) {
            if (!have_spare_) {
                const double u1 = uniform01();
                const double u2 = uniform01();
                const double r = std::sqrt(-2.0 * std::log(u1));
                spare_ = r * std::sin(6.283185307179586 * u2);
                have_spare_ = true;
                const double z = r * std::cos(6.283185307179586 * u2);
                if (std::abs(z) <= 2.0) return static_cast<float>(z * std_dev);
                continue;
            }
            have_spare_ = false;
            if (std::abs(spare_) <= 2.0) return static_cast<float>(spare_ * std_dev);
        }
    }

    void fill(Matrix& m, float std_dev) {
        for (auto& x : m.v) x = next(std_dev);
    }

  private:
    double uniform01() {
        // (0, 1]: log() stays finite.
        return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

Matrix ones(int r, int c) {
    Matrix m(r, c);
    for (auto& x : m.v) x = 1.0f;
    return m;
}

}  // namespace

Weights init_weights(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    constexpr float kStd = 0.02f;
    TruncNormal rng(seed);
    Weights w;
    w.tok_emb = Matrix(cfg.vocab_size, cfg.d_model);
    rng.fill(w.tok_emb, kStd);
    w.seg_emb = Matrix(2, cfg.d_model);
    rng.fill(w.seg_emb, kStd);
    w.pos_emb = Matrix(cfg.max_len, cfg.d_model);
    rng.fill(w.pos_emb, kStd);
    w.emb_ln_gamma = ones(1, cfg.d_model);
    w.emb_ln_beta = Matrix(1, cfg.d_model);

    w.layers.resize(cfg.n_layers);
    for (auto& lw : w.layers) {
        lw.w_q = Matrix(cfg.d_model, cfg.d_model);
        lw.w_k = Matrix(cfg.d_model, cfg.d_model);
        lw.w_v = Matrix(cfg.d_model, cfg.d_model);
        lw.w_o = Matrix(cfg.d_model, cfg.d_model);
        rng.fill(lw.w_q, kStd);
        rng.fill(lw.w_k, kStd);
        rng.fill(lw.w_v, kStd);
        rng.fill(lw.w_o, kStd);
        lw.ff_w1 = Matrix(cfg.d_model, cfg.d_ff);
        lw.ff_b1 = Matrix(1, cfg.d_ff);
        lw.ff_w2 = Matrix(cfg.d_ff, cfg.d_model);
        lw.ff_b2 = Matrix(1, cfg.d_model);
        rng.fill(lw.ff_w1, kStd);
        rng.fill(lw.ff_w2, kStd);
        lw.ln1_gamma = ones(1, cfg.d_model);
        lw.ln1_beta = Matrix(1, cfg.d_model);
        lw.ln2_gamma = ones(1, cfg.d_model);
        lw.ln2_beta = Matrix(1, cfg.d_model);
    }

    w.w_combine = Matrix(cfg.d_model, 1);
    rng.fill(w.w_combine, kStd);

    if (cfg.compression_enabled()) {
        w.w_comp = Matrix(cfg.d_model, cfg.comp_dim);
        w.b_comp = Matrix(1, cfg.comp_dim);
        w.w_decomp = Matrix(cfg.comp_dim, cfg.d_model);
        w.b_decomp = Matrix(1, cfg.d_model);
        rng.fill(w.w_comp, kStd);
        rng.fill(w.w_decomp, kStd);
        w.dec_ln_gamma = ones(1, cfg.d_model);
        w.dec_ln_beta = Matrix(1, cfg.d_model);
    }
    return w;
}

namespace {

template <typename W, typename Fn>
void visit_params(W& w, const Fn& fn) {
    fn("tok_emb", w.tok_emb);
    fn("seg_emb", w.seg_emb);
    fn("pos_emb", w.pos_emb);
    fn("emb_ln_gamma", w.emb_ln_gamma);
    fn("emb_ln_beta", w.emb_ln_beta);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        auto& lw = w.layers[i];
        const std::string p = "layer" + std::to_string(i) + ".";
        fn(p + "w_q", lw.w_q);
        fn(p + "w_k", lw.w_k);
        fn(p + "w_v", lw.w_v);
        fn(p + "w_o", lw.w_o);
        fn(p + "ff_w1", lw.ff_w1);
        fn(p + "ff_b1", lw.ff_b1);
        fn(p + "ff_w2", lw.ff_w2);
        fn(p + "ff_b2", lw.ff_b2);
        fn(p + "ln1_gamma", lw.ln1_gamma);
        fn(p + "ln1_beta", lw.ln1_beta);
        fn(p + "ln2_gamma", lw.ln2_gamma);
        fn(p + "ln2_beta", lw.ln2_beta);
    }
    fn("w_combine", w.w_combine);
    if (!w.w_comp.empty()) {
        fn("w_comp", w.w_comp);
        fn("b_comp", w.b_comp);
        fn("w_decomp", w.w_decomp);
        fn("b_decomp", w.b_decomp);
        fn("dec_ln_gamma", w.dec_ln_gamma);
        fn("dec_ln_beta", w.dec_ln_beta);
    }
}

}  // namespace

void for_each_param(Weights& w, const std::function<void(const std::string&, Matrix&)>& fn) {
    visit_params(w, fn);
}

void for_each_param(const Weights& w,
                    const std::function<void(const std::string&, const Matrix&)>& fn) {
    visit_params(w, fn);
}

std::size_t count_params(const Weights& w) {
    std::size_t total = 0;
    for_each_param(w, [&](const std::string&, const Matrix& m) { total += m.size(); });
    return total;
}

EncodedSequence make_joint_sequence(const std::vector<int>& query_ids,
                                    const std::vector<int>& doc_ids, const ModelConfig& cfg) {
    if (query_ids.empty()) throw input_error("sequence: empty query");
    if (doc_ids.empty()) throw input_error("sequence: empty document");
    EncodedSequence q = make_query_sequence(query_ids, cfg);
    EncodedSequence d = make_doc_sequence(doc_ids, cfg);
    EncodedSequence s = q;
    s.token_ids.insert(s.token_ids.end(), d.token_ids.begin(), d.token_ids.end());
    s.segment_ids.insert(s.segment_ids.end(), d.segment_ids.begin(), d.segment_ids.end());
    s.position_ids.insert(s.position_ids.end(), d.position_ids.begin(), d.position_ids.end());
    s.sides.insert(s.sides.end(), d.sides.begin(), d.sides.end());
    return s;
}

EncodedSequence make_query_sequence(const std::vector<int>& query_ids, const ModelConfig& cfg) {
    if (query_ids.empty()) throw input_error("sequence: empty query");
    const int q_len = std::min<int>(static_cast<int>(query_ids.size()), cfg.q_max);
    EncodedSequence s;
    const int m = cfg.q_max + 2;
    s.token_ids.reserve(m);
    s.token_ids.push_back(kClsId);
    s.sides.push_back(Side::ClsQ);
    for (int i = 0; i < cfg.q_max; ++i) {
        if (i < q_len) {
            s.token_ids.push_back(query_ids[i]);
            s.sides.push_back(Side::Query);
        } else {
            s.token_ids.push_back(kPadId);
            s.sides.push_back(Side::Pad);
        }
    }
    s.token_ids.push_back(kSepId);
    s.sides.push_back(Side::SepQ);
    for (int i = 0; i < m; ++i) {
        s.segment_ids.push_back(0);
        s.position_ids.push_back(i);
    }
    return s;
}

EncodedSequence make_doc_sequence(const std::vector<int>& doc_ids, const ModelConfig& cfg) {
    if (doc_ids.empty()) throw input_error("sequence: empty document");
    const int d_len = std::min<int>(static_cast<int>(doc_ids.size()), cfg.max_doc_tokens());
    EncodedSequence s;
    s.token_ids.reserve(d_len + 1);
    for (int i = 0; i < d_len; ++i) {
        s.token_ids.push_back(doc_ids[i]);
        s.sides.push_back(Side::Doc);
    }
    s.token_ids.push_back(kSepId);
    s.sides.push_back(Side::SepD);
    const int base = cfg.q_max + 2;
    for (int i = 0; i <= d_len; ++i) {
        s.segment_ids.push_back(1);
        s.position_ids.push_back(base + i);
    }
    return s;
}

}  // namespace prerank
