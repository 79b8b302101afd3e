#include "prerank/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

#include "prerank/checkpoint.hpp"
#include "prerank/split.hpp"

namespace prerank {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

struct PhaseSample {
    double query_ms = 0.0;
    double decompress_ms = 0.0;
    double combine_ms = 0.0;
};

PhaseSample one_pass(const Weights& w, const ModelConfig& cfg, const Digest256& fp,
                     const std::vector<std::vector<int>>& queries,
                     const std::vector<CompressedReps>& docs, bool cls_only_last,
                     float* score_sink) {
    PhaseSample s;
    float sink = 0.0f;
    for (const auto& query : queries) {
        const auto t0 = Clock::now();
        const PartialReps q = encode_query(query, w, cfg, fp);
        const auto t1 = Clock::now();
        std::vector<PartialReps> restored;
        restored.reserve(docs.size());
        for (const CompressedReps& stored : docs) {
            restored.push_back(doc_partial_from_storage(stored, w, cfg, fp));
        }
        const auto t2 = Clock::now();
        for (const PartialReps& d : restored) {
            sink += join_and_score(q, d, w, cfg, fp, cls_only_last);
        }
        const auto t3 = Clock::now();
        s.query_ms += ms_between(t0, t1);
        s.decompress_ms += ms_between(t1, t2);
        s.combine_ms += ms_between(t2, t3);
    }
    if (score_sink) *score_sink = sink;
    return s;
}

double parallel_throughput(const Weights& w, const ModelConfig& cfg, const Digest256& fp,
                           const std::vector<std::vector<int>>& queries,
                           const std::vector<CompressedReps>& docs, bool cls_only_last,
                           int threads) {
    std::vector<PartialReps> restored;
    restored.reserve(docs.size());
    for (const CompressedReps& stored : docs) {
        restored.push_back(doc_partial_from_storage(stored, w, cfg, fp));
    }
    std::vector<PartialReps> encoded;
    encoded.reserve(queries.size());
    for (const auto& query : queries) encoded.push_back(encode_query(query, w, cfg, fp));

    const std::size_t total = encoded.size() * restored.size();
    std::vector<float> sinks(threads, 0.0f);
    const auto t0 = Clock::now();
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t) {
        workers.emplace_back([&, t]() {
            float local = 0.0f;
            for (std::size_t i = t; i < total; i += threads) {
                const PartialReps& q = encoded[i / restored.size()];
                const PartialReps& d = restored[i % restored.size()];
                local += join_and_score(q, d, w, cfg, fp, cls_only_last);
            }
            sinks[t] = local;
        });
    }
    for (auto& th : workers) th.join();
    const double seconds = ms_between(t0, Clock::now()) / 1000.0;
    return seconds > 0.0 ? static_cast<double>(total) / seconds : 0.0;
}

}  // namespace

PhaseTimings bench_preloaded(const Weights& w, const ModelConfig& cfg,
                             const std::vector<std::vector<int>>& queries,
                             const std::vector<CompressedReps>& preloaded_docs,
                             const BenchOptions& opts) {
    if (opts.repeats < 1) throw input_error("bench: repeats must be >= 1");
    const Digest256 fp = model_fingerprint(cfg, w);
    volatile float guard = 0.0f;

    for (int i = 0; i < opts.warmup; ++i) {
        float sink = 0.0f;
        one_pass(w, cfg, fp, queries, preloaded_docs, opts.cls_only_last, &sink);
        guard = guard + sink;
    }
    std::vector<double> q_ms, d_ms, c_ms;
    for (int i = 0; i < opts.repeats; ++i) {
        float sink = 0.0f;
        const PhaseSample s =
            one_pass(w, cfg, fp, queries, preloaded_docs, opts.cls_only_last, &sink);
        guard = guard + sink;
        q_ms.push_back(s.query_ms);
        d_ms.push_back(s.decompress_ms);
        c_ms.push_back(s.combine_ms);
    }
    PhaseTimings t;
    t.split_layer = cfg.split_layer;
    t.query_ms = median(q_ms);
    t.decompress_ms = median(d_ms);
    t.combine_ms = median(c_ms);
    t.total_ms = t.query_ms + t.decompress_ms + t.combine_ms;
    if (opts.threads > 1) {
        t.throughput_docs_per_s = parallel_throughput(w, cfg, fp, queries, preloaded_docs,
                                                      opts.cls_only_last, opts.threads);
    }
    return t;
}

std::vector<PhaseTimings> run_bench_sweep(const Weights& w, ModelConfig cfg,
                                          const std::vector<std::vector<int>>& queries,
                                          const std::vector<std::vector<int>>& doc_tokens,
                                          std::vector<int> split_layers, const BenchOptions& opts) {
    if (std::find(split_layers.begin(), split_layers.end(), 0) == split_layers.end()) {
        split_layers.insert(split_layers.begin(), 0);
    }
    std::vector<PhaseTimings> rows;
    double base_total = 0.0;
    for (int l : split_layers) {
        cfg.split_layer = l;
        cfg.validate();
        const Digest256 fp = model_fingerprint(cfg, w);
        std::vector<CompressedReps> preloaded;
        preloaded.reserve(doc_tokens.size());
        const std::size_t take =
            std::min<std::size_t>(doc_tokens.size(), static_cast<std::size_t>(opts.docs_per_query));
        for (std::size_t i = 0; i < take; ++i) {
            const PartialReps reps = precompute_doc(doc_tokens[i], w, cfg, fp);
            preloaded.push_back(reps_for_storage(reps.reps, w, cfg, opts.precision));
        }
        PhaseTimings t = bench_preloaded(w, cfg, queries, preloaded, opts);
        if (l == 0) base_total = t.total_ms;
        t.speedup_vs_base = t.total_ms > 0.0 ? base_total / t.total_ms : 0.0;
        rows.push_back(t);
    }
    return rows;
}

PhaseTimings run_bench_store(const Weights& w, const ModelConfig& cfg, const StoreReader& store,
                             const std::vector<std::vector<int>>& queries,
                             const BenchOptions& opts) {
    store.require_model(model_fingerprint(cfg, w));
    if (store.header().split_layer != cfg.split_layer) {
        throw stale_model_error("bench: store split layer does not match the model");
    }
    std::vector<CompressedReps> preloaded;
    const std::vector<std::string> ids = store.doc_ids();
    const std::size_t take =
        std::min<std::size_t>(ids.size(), static_cast<std::size_t>(opts.docs_per_query));
    for (std::size_t i = 0; i < take; ++i) preloaded.push_back(store.read_doc(ids[i]));
    return bench_preloaded(w, cfg, queries, preloaded, opts);
}

std::string bench_csv(const std::vector<PhaseTimings>& rows) {
    std::string out = "l,query_ms,decompress_ms,combine_ms,total_ms,speedup\n";
    char buf[200];
    for (const PhaseTimings& t : rows) {
        // %.17g keeps doubles bit-exact across a parse roundtrip.
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", t.split_layer,
                      t.query_ms, t.decompress_ms, t.combine_ms, t.total_ms, t.speedup_vs_base);
        out += buf;
    }
    return out;
}

std::vector<PhaseTimings> parse_bench_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "l,query_ms,decompress_ms,combine_ms,total_ms,speedup") {
        throw input_error("bench csv: bad header");
    }
    std::vector<PhaseTimings> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        PhaseTimings t;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &t.split_layer, &t.query_ms,
                        &t.decompress_ms, &t.combine_ms, &t.total_ms, &t.speedup_vs_base) != 6) {
            throw input_error("bench csv: malformed row '" + line + "'");
        }
        rows.push_back(t);
    }
    return rows;
}

std::string bench_table(const std::vector<PhaseTimings>& rows) {
    std::string out = "   l     query    decom.   combine     total   speedup\n";
    char buf[160];
    for (const PhaseTimings& t : rows) {
        std::snprintf(buf, sizeof(buf), "%4d %8.2fms %8.2fms %8.2fms %8.2fms %8.2fx\n",
                      t.split_layer, t.query_ms, t.decompress_ms, t.combine_ms, t.total_ms,
                      t.speedup_vs_base);
        out += buf;
    }
    return out;
}

}  // namespace prerank
