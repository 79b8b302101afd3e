#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "prerank/bench.hpp"
#include "prerank/checkpoint.hpp"
#include "prerank/split.hpp"

using namespace prerank;

namespace {

ModelConfig bench_config(int n = 4) {
    ModelConfig cfg;
    cfg.n_layers = n;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.vocab_size = 128;
    cfg.max_len = 40;
    cfg.q_max = 4;
    cfg.split_layer = 0;
    return cfg;
}

std::vector<std::vector<int>> random_token_lists(std::mt19937_64& rng, int count, int len,
                                                 int vocab) {
    std::vector<std::vector<int>> lists(count);
    for (auto& l : lists) {
        l.resize(len);
        for (auto& t : l) t = kReservedIds + static_cast<int>(rng() % (vocab - kReservedIds));
    }
    return lists;
}

}  // namespace

TEST_CASE("bench csv: empty input yields a header-only file") {
    const std::string csv = bench_csv({});
    CHECK(csv == "l,query_ms,decompress_ms,combine_ms,total_ms,speedup\n");
    CHECK(parse_bench_csv(csv).empty());
}

TEST_CASE("bench csv roundtrips one row") {
    PhaseTimings t;
    t.split_layer = 3;
    t.query_ms = 1.25;
    t.decompress_ms = 0.5;
    t.combine_ms = 7.75;
    t.total_ms = 9.5;
    t.speedup_vs_base = 2.0;
    const auto rows = parse_bench_csv(bench_csv({t}));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].split_layer == 3);
    CHECK(rows[0].query_ms == doctest::Approx(1.25));
    CHECK(rows[0].total_ms == doctest::Approx(9.5));
    CHECK(rows[0].speedup_vs_base == doctest::Approx(2.0));
}

TEST_CASE("speedup column equals base_total over total recomputed from the CSV") {
    std::mt19937_64 rng(1);
    ModelConfig cfg = bench_config(2);
    const Weights w = init_weights(cfg, 1);
    const auto queries = random_token_lists(rng, 2, 3, cfg.vocab_size);
    const auto docs = random_token_lists(rng, 4, 10, cfg.vocab_size);
    BenchOptions opts;
    opts.docs_per_query = 4;
    opts.repeats = 3;
    opts.warmup = 1;
    const auto rows = run_bench_sweep(w, cfg, queries, docs, {0, 1, 2}, opts);
    const auto parsed = parse_bench_csv(bench_csv(rows));
    REQUIRE(parsed.size() == 3);
    const double base_total = parsed[0].total_ms;
    for (const PhaseTimings& t : parsed) {
        CHECK(std::abs(t.speedup_vs_base - base_total / t.total_ms) <= 1e-9 * t.speedup_vs_base +
                                                                           1e-9);
        CHECK(t.total_ms >= t.query_ms);
        CHECK(t.total_ms >= t.decompress_ms);
        CHECK(t.total_ms >= t.combine_ms);
    }
}

TEST_CASE("store-backed bench refuses a store from another model or split layer") {
    std::mt19937_64 rng(2);
    ModelConfig cfg = bench_config(2);
    cfg.split_layer = 1;
    const Weights w = init_weights(cfg, 3);
    const Digest256 fp = model_fingerprint(cfg, w);
    const auto docs = random_token_lists(rng, 3, 8, cfg.vocab_size);

    const std::string path = "/tmp/prerank_bench_store_test.pttr";
    StoreHeader header;
    header.comp_dim = static_cast<std::uint16_t>(cfg.d_model);
    header.precision = Precision::F32;
    header.split_layer = static_cast<std::uint8_t>(cfg.split_layer);
    header.fingerprint = fp;
    {
        StoreWriter writer(path, header);
        int i = 0;
        for (const auto& d : docs) {
            const PartialReps reps = precompute_doc(d, w, cfg, fp);
            writer.add("doc" + std::to_string(i++), reps_for_storage(reps.reps, w, cfg,
                                                                     Precision::F32));
        }
        writer.finalize();
    }
    const StoreReader store(path);
    const auto queries = random_token_lists(rng, 1, 2, cfg.vocab_size);
    BenchOptions opts;
    opts.docs_per_query = 3;
    opts.repeats = 2;
    opts.warmup = 0;
    CHECK_NOTHROW(run_bench_store(w, cfg, store, queries, opts));

    const Weights other = init_weights(cfg, 999);
    CHECK_THROWS_AS(run_bench_store(other, cfg, store, queries, opts), stale_model_error);

    ModelConfig other_l = cfg;
    other_l.split_layer = 2;
    CHECK_THROWS_AS(run_bench_store(w, other_l, store, queries, opts), stale_model_error);
    std::remove(path.c_str());
}

TEST_CASE("combine cost shrinks as the split layer grows (coarse smoke check)") {
    std::mt19937_64 rng(4);
    ModelConfig cfg = bench_config(4);
    const Weights w = init_weights(cfg, 5);
    const auto queries = random_token_lists(rng, 2, 3, cfg.vocab_size);
    const auto docs = random_token_lists(rng, 8, 24, cfg.vocab_size);
    BenchOptions opts;
    opts.docs_per_query = 8;
    opts.repeats = 5;
    opts.warmup = 2;
    const auto rows = run_bench_sweep(w, cfg, queries, docs, {0, 4}, opts);
    REQUIRE(rows.size() == 2);
    // l = n runs no combine layers at all; l = 0 runs every layer per doc.
    CHECK(rows[1].combine_ms < rows[0].combine_ms);
    CHECK(rows[1].speedup_vs_base > 1.0);
}

TEST_CASE("parallel scoring reports a throughput figure") {
    std::mt19937_64 rng(6);
    ModelConfig cfg = bench_config(2);
    const Weights w = init_weights(cfg, 7);
    const auto queries = random_token_lists(rng, 2, 2, cfg.vocab_size);
    const auto docs = random_token_lists(rng, 4, 8, cfg.vocab_size);
    BenchOptions opts;
    opts.docs_per_query = 4;
    opts.repeats = 2;
    opts.warmup = 0;
    opts.threads = 2;
    const auto rows = run_bench_sweep(w, cfg, queries, docs, {1}, opts);
    for (const PhaseTimings& t : rows) CHECK(t.throughput_docs_per_s > 0.0);
}
