#pragma once

#include <vector>

#include "prerank/compress.hpp"
#include "prerank/digest.hpp"
#include "prerank/encoder.hpp"
#include "prerank/matrix.hpp"
#include "prerank/model.hpp"

namespace prerank {

// One mask per layer. Layers 1..l forbid query<->document attention; layers
// l+1..n allow every non-PAD pair. PAD rows attend only to themselves and are
// never attended to.
using MaskSchedule = std::vector<BoolMask>;

BoolMask build_attention_mask(const std::vector<Side>& sides, bool cross_side_allowed);
MaskSchedule build_mask_schedule(const std::vector<Side>& sides, int split_layer, int n_layers);

// Token representations at the split layer for one side of the sequence.
struct PartialReps {
    Side kind = Side::Query;        // Side::Query or Side::Doc
    Matrix reps;                    // rows at their joint-layout positions
    std::vector<Side> sides;        // per-row labels (query side carries PAD slots)
    int split_layer = 0;
    Digest256 fingerprint{};        // of the producing model
};

// Index-time path: document-only sequence through layers 1..l.
PartialReps precompute_doc(const std::vector<int>& doc_tokens, const Weights& w,
                           const ModelConfig& cfg, const Digest256& model_fp);

// Query-time path: [CLS] + padded query + [SEP] through layers 1..l.
PartialReps encode_query(const std::vector<int>& query_tokens, const Weights& w,
                         const ModelConfig& cfg, const Digest256& model_fp);

// Concatenates the two partial representations and runs layers l+1..n to the
// ranking score. Refuses mismatched fingerprints or split layers.
float join_and_score(const PartialReps& q, const PartialReps& d, const Weights& w,
                     const ModelConfig& cfg, const Digest256& model_fp, bool cls_only_last);

// Rebuilds a document PartialReps from its stored form (widen + decompress).
PartialReps doc_partial_from_storage(const CompressedReps& stored, const Weights& w,
                                     const ModelConfig& cfg, const Digest256& model_fp);

struct FullForwardOptions {
    bool with_compression = false;  // splice compress/decompress at the split layer
    bool cls_only_last = false;
    bool collect_states = false;
    bool collect_attns = false;
};

// Reference single-pass route: the full masked sequence through all n layers.
// The split path above must agree with this one.
ForwardResult full_sequence_forward(const EncodedSequence& seq, const Weights& w,
                                    const ModelConfig& cfg, const FullForwardOptions& opts = {});
float full_sequence_score(const std::vector<int>& query_tokens, const std::vector<int>& doc_tokens,
                          const Weights& w, const ModelConfig& cfg,
                          const FullForwardOptions& opts = {});

}  // namespace prerank
