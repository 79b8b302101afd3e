#pragma once

#include <string>
#include <vector>

#include "prerank/compress.hpp"
#include "prerank/model.hpp"
#include "prerank/rep_store.hpp"

namespace prerank {

struct BenchOptions {
    int docs_per_query = 16;
    int repeats = 5;
    int warmup = 2;
    bool cls_only_last = false;
    Precision precision = Precision::F32;
    int threads = 1;  // > 1 additionally measures parallel scoring throughput
};

// Wall-clock medians per phase for one split-layer configuration. total is the
// sum of the per-phase medians; speedup is base_total / total against the
// sweep's l = 0 row.
struct PhaseTimings {
    int split_layer = 0;
    double query_ms = 0.0;
    double decompress_ms = 0.0;
    double combine_ms = 0.0;
    double total_ms = 0.0;
    double speedup_vs_base = 0.0;
    double throughput_docs_per_s = 0.0;  // 0 unless threads > 1
};

// Preloaded in-memory store slice: one stored record per candidate document.
// Store I/O is excluded from the timings by construction.
PhaseTimings bench_preloaded(const Weights& w, const ModelConfig& cfg,
                             const std::vector<std::vector<int>>& queries,
                             const std::vector<CompressedReps>& preloaded_docs,
                             const BenchOptions& opts);

// Times one l per supplied value, rebuilding the in-memory index per l, and
// fills speedup_vs_base against the l = 0 timing (which is appended to the
// sweep if absent).
std::vector<PhaseTimings> run_bench_sweep(const Weights& w, ModelConfig cfg,
                                          const std::vector<std::vector<int>>& queries,
                                          const std::vector<std::vector<int>>& doc_tokens,
                                          std::vector<int> split_layers, const BenchOptions& opts);

// Store-backed single measurement; refuses a store built for another model or
// split layer. Records are preloaded before any clock starts.
PhaseTimings run_bench_store(const Weights& w, const ModelConfig& cfg, const StoreReader& store,
                             const std::vector<std::vector<int>>& queries,
                             const BenchOptions& opts);

// CSV columns: l,query_ms,decompress_ms,combine_ms,total_ms,speedup
std::string bench_csv(const std::vector<PhaseTimings>& rows);
std::vector<PhaseTimings> parse_bench_csv(const std::string& csv);
std::string bench_table(const std::vector<PhaseTimings>& rows);

}  // namespace prerank
