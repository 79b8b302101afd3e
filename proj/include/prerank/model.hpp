#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prerank/matrix.hpp"

namespace prerank {

// Reserved token ids; everything hashed by the tokenizer lands at >= kReservedIds.
constexpr int kPadId = 0;
constexpr int kClsId = 1;
constexpr int kSepId = 2;
constexpr int kMaskId = 3;
constexpr int kReservedIds = 8;

// comp_dim == 0 disables the compression unit.
struct ModelConfig {
    int n_layers = 2;
    int d_model = 16;
    int n_heads = 2;
    int d_ff = 32;
    int vocab_size = 256;
    int max_len = 48;
    int q_max = 8;
    int split_layer = 1;
    int comp_dim = 0;

    int head_dim() const { return d_model / n_heads; }
    // Longest document (including its trailing separator slot) that fits.
    int max_doc_tokens() const { return max_len - q_max - 3; }
    bool compression_enabled() const { return comp_dim > 0; }

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

struct LayerWeights {
    Matrix w_q, w_k, w_v, w_o;        // d x d
    Matrix ff_w1, ff_b1;              // d x d_ff, 1 x d_ff
    Matrix ff_w2, ff_b2;              // d_ff x d, 1 x d
    Matrix ln1_gamma, ln1_beta;       // 1 x d
    Matrix ln2_gamma, ln2_beta;       // 1 x d
};

struct Weights {
    Matrix tok_emb;                   // vocab x d
    Matrix seg_emb;                   // 2 x d
    Matrix pos_emb;                   // max_len x d
    Matrix emb_ln_gamma, emb_ln_beta; // 1 x d
    std::vector<LayerWeights> layers;
    Matrix w_combine;                 // d x 1
    // Compression unit; empty when comp_dim == 0.
    Matrix w_comp, b_comp;            // d x e, 1 x e
    Matrix w_decomp, b_decomp;        // e x d, 1 x d
    Matrix dec_ln_gamma, dec_ln_beta; // 1 x d
};

// Truncated normal (|z| <= 2 std), std 0.02, biases 0, layer-norm gamma 1 beta 0.
Weights init_weights(const ModelConfig& cfg, std::uint64_t seed);

// Visits every trainable parameter in a fixed order. Compression parameters are
// visited only when allocated. The order is the contract shared by Adam state,
// gradients, and the checkpoint container.
void for_each_param(Weights& w, const std::function<void(const std::string&, Matrix&)>& fn);
void for_each_param(const Weights& w, const std::function<void(const std::string&, const Matrix&)>& fn);
std::size_t count_params(const Weights& w);

enum class Side : std::uint8_t { ClsQ = 0, Query = 1, SepQ = 2, Doc = 3, SepD = 4, Pad = 5 };

inline bool is_query_side(Side s) { return s == Side::ClsQ || s == Side::Query || s == Side::SepQ; }
inline bool is_doc_side(Side s) { return s == Side::Doc || s == Side::SepD; }

// Layout: [CLS], q_max query slots (trailing slots PAD), [SEP] at q_max+1,
// document tokens from q_max+2, trailing [SEP]. Absolute positions are fixed
// by q_max so document rows never depend on the query length.
struct EncodedSequence {
    std::vector<int> token_ids;
    std::vector<int> segment_ids;   // 0 = A (query side), 1 = B (document side)
    std::vector<int> position_ids;
    std::vector<Side> sides;

    int size() const { return static_cast<int>(token_ids.size()); }
};

// Query tokens beyond q_max are truncated; document tokens beyond
// max_doc_tokens() are truncated. Empty query or document is rejected.
EncodedSequence make_joint_sequence(const std::vector<int>& query_ids,
                                    const std::vector<int>& doc_ids, const ModelConfig& cfg);
// Rows 0 .. q_max+1 of the joint layout, without a document.
EncodedSequence make_query_sequence(const std::vector<int>& query_ids, const ModelConfig& cfg);
// Document rows of the joint layout, at their joint-sequence absolute positions.
EncodedSequence make_doc_sequence(const std::vector<int>& doc_ids, const ModelConfig& cfg);

}  // namespace prerank
