#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "prerank/binio.hpp"
#include "prerank/checkpoint.hpp"
#include "prerank/rep_store.hpp"

using namespace prerank;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("prerank_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

CompressedReps random_reps(std::mt19937_64& rng, int rows, int dim, Precision prec) {
    CompressedReps r;
    r.rows = rows;
    r.dim = dim;
    r.precision = Precision::F32;
    r.f32.resize(static_cast<std::size_t>(rows) * dim);
    for (auto& x : r.f32) x = static_cast<float>(rng() % 20001) / 10000.0f - 1.0f;
    if (prec == Precision::F16) r = quantize_reps(r);
    return r;
}

StoreHeader make_header(int e, Precision prec, int l) {
    StoreHeader h;
    h.comp_dim = static_cast<std::uint16_t>(e);
    h.precision = prec;
    h.split_layer = static_cast<std::uint8_t>(l);
    for (std::size_t i = 0; i < h.fingerprint.size(); ++i) {
        h.fingerprint[i] = static_cast<std::uint8_t>(i);
    }
    return h;
}

}  // namespace

TEST_CASE("empty store roundtrips") {
    TempDir tmp;
    const std::string path = tmp.file("empty.pttr");
    const StoreWriteSummary s = write_store(path, make_header(8, Precision::F32, 2), {});
    CHECK(s.doc_count == 0);
    CHECK(s.payload_bytes == 0);
    const StoreReader reader(path);
    CHECK(reader.header().doc_count == 0);
    CHECK(reader.doc_ids().empty());
    CHECK_FALSE(reader.contains("nope"));
}

TEST_CASE("write then read 100 random records bit-identically, both precisions") {
    std::mt19937_64 rng(1);
    for (Precision prec : {Precision::F32, Precision::F16}) {
        TempDir tmp;
        const std::string path = tmp.file("store.pttr");
        const int e = 6;
        std::vector<std::pair<std::string, CompressedReps>> records;
        for (int i = 0; i < 100; ++i) {
            records.emplace_back("doc" + std::to_string(i),
                                 random_reps(rng, 1 + static_cast<int>(rng() % 12), e, prec));
        }
        const StoreWriteSummary summary = write_store(path, make_header(e, prec, 3), records);
        CHECK(summary.doc_count == 100);

        const StoreReader reader(path);
        CHECK(reader.header().comp_dim == e);
        CHECK(reader.header().precision == prec);
        CHECK(reader.header().split_layer == 3);
        for (const auto& [id, want] : records) {
            const CompressedReps got = reader.read_doc(id);
            CHECK(got.rows == want.rows);
            if (prec == Precision::F32) {
                CHECK(got.f32 == want.f32);
            } else {
                CHECK(got.f16 == want.f16);
            }
        }
    }
}

TEST_CASE("payload bytes match the analytic size formula exactly") {
    std::mt19937_64 rng(2);
    TempDir tmp;
    const std::string path = tmp.file("sized.pttr");
    const int e = 5;
    std::vector<std::pair<std::string, CompressedReps>> records;
    std::uint64_t total_tokens = 0;
    for (int i = 0; i < 50; ++i) {
        const int rows = 1 + static_cast<int>(rng() % 9);
        total_tokens += rows;
        records.emplace_back("d" + std::to_string(i), random_reps(rng, rows, e, Precision::F16));
    }
    const StoreWriteSummary s = write_store(path, make_header(e, Precision::F16, 1), records);
    CHECK(s.payload_bytes == total_tokens * e * 2);
    const double avg = static_cast<double>(total_tokens) / 50.0;
    CHECK(estimate_storage(50, avg, e, 2) == s.payload_bytes);
    // bytes_written = payload + header + per-record framing + table + footer.
    std::uint64_t overhead = kStoreHeaderBytes + 8;
    for (const auto& [id, reps] : records) overhead += (2 + id.size() + 2) + (2 + id.size() + 8);
    CHECK(s.bytes_written == s.payload_bytes + overhead);
}

TEST_CASE("duplicate ids and wrong record shapes are rejected") {
    TempDir tmp;
    std::mt19937_64 rng(3);
    StoreWriter w(tmp.file("dup.pttr"), make_header(4, Precision::F32, 0));
    w.add("a", random_reps(rng, 3, 4, Precision::F32));
    CHECK_THROWS_AS(w.add("a", random_reps(rng, 2, 4, Precision::F32)), input_error);
    CHECK_THROWS_AS(w.add("b", random_reps(rng, 2, 5, Precision::F32)), input_error);
    CHECK_THROWS_AS(w.add("c", random_reps(rng, 2, 4, Precision::F16)), input_error);
    w.finalize();
}

TEST_CASE("missing ids and corrupted files surface as typed errors") {
    TempDir tmp;
    std::mt19937_64 rng(4);
    const std::string path = tmp.file("probe.pttr");
    write_store(path, make_header(4, Precision::F32, 1),
                {{"present", random_reps(rng, 2, 4, Precision::F32)}});

    const StoreReader reader(path);
    CHECK_THROWS_AS(reader.read_doc("absent"), doc_not_found_error);

    std::string bytes = read_file_bytes(path);
    bytes[0] = 'X';  // break the magic
    const std::string bad = tmp.file("bad_magic.pttr");
    write_file_bytes(bad, bytes);
    CHECK_THROWS_AS(StoreReader{bad}, store_integrity_error);

    const std::string truncated = tmp.file("trunc.pttr");
    write_file_bytes(truncated, read_file_bytes(path).substr(0, 20));
    CHECK_THROWS_AS(StoreReader{truncated}, store_integrity_error);
}

TEST_CASE("fingerprint mismatch is refused before any scoring") {
    TempDir tmp;
    std::mt19937_64 rng(5);
    const std::string path = tmp.file("fp.pttr");
    write_store(path, make_header(4, Precision::F32, 1),
                {{"doc", random_reps(rng, 2, 4, Precision::F32)}});
    const StoreReader reader(path);
    Digest256 other{};
    other[0] = 0xaa;
    CHECK_THROWS_AS(reader.require_model(other), stale_model_error);
}

TEST_CASE("estimate_storage reproduces the published storage ratios") {
    // Inputs chosen to land the d = 768 f32 baseline at ~34TB (spam-filtered
    // web collection scale); the e = 128 and f16 ratios follow from linearity.
    const double docs = 15.2e6;
    const double avg_tokens = 729.0;
    const double base = static_cast<double>(estimate_storage(docs, avg_tokens, 768, 4));
    CHECK(base == doctest::Approx(34e12).epsilon(0.02));
    const double compressed = static_cast<double>(estimate_storage(docs, avg_tokens, 128, 4));
    CHECK(compressed == doctest::Approx(5.7e12).epsilon(0.02));
    const double halved = static_cast<double>(estimate_storage(docs, avg_tokens, 128, 2));
    CHECK(halved == doctest::Approx(2.8e12).epsilon(0.02));

    // Newswire-scale check: 528k docs at e = 256 f32 in ~195GB implies ~361
    // tokens per document (algebraic inversion of the formula).
    const double robust_avg = 195e9 / (528e3 * 256 * 4);
    CHECK(robust_avg == doctest::Approx(361.0).epsilon(0.01));
    CHECK(static_cast<double>(estimate_storage(528e3, 361.0, 256, 4)) ==
          doctest::Approx(195e9).epsilon(0.01));
}

TEST_CASE("estimate_storage is linear in every argument") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const double docs = 1.0 + static_cast<double>(rng() % 100000);
        const double avg = 1.0 + static_cast<double>(rng() % 1000);
        const double e = 1.0 + static_cast<double>(rng() % 512);
        const std::uint64_t base = estimate_storage(docs, avg, e, 4);
        CHECK(estimate_storage(2 * docs, avg, e, 4) == 2 * base);
        CHECK(estimate_storage(docs, 2 * avg, e, 4) == 2 * base);
        CHECK(estimate_storage(docs, avg, 2 * e, 4) == 2 * base);
        CHECK(estimate_storage(docs, avg, e, 2) == base / 2);
    }
    CHECK_THROWS_AS(estimate_storage(0, 1, 1, 1), input_error);
}

TEST_CASE("checkpoint container roundtrips and fingerprints are stable") {
    TempDir tmp;
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    cfg.vocab_size = 32;
    cfg.max_len = 20;
    cfg.q_max = 4;
    cfg.split_layer = 1;
    cfg.comp_dim = 4;
    const Weights w = init_weights(cfg, 7);
    const std::string path = tmp.file("model.ptwt");
    save_checkpoint(path, cfg, w);
    const Checkpoint ckpt = load_checkpoint(path);
    CHECK(ckpt.cfg.to_json() == cfg.to_json());
    CHECK(ckpt.fingerprint == model_fingerprint(cfg, w));

    std::vector<float> a;
    std::vector<float> b;
    for_each_param(w, [&](const std::string&, const Matrix& m) {
        a.insert(a.end(), m.v.begin(), m.v.end());
    });
    for_each_param(ckpt.weights, [&](const std::string&, const Matrix& m) {
        b.insert(b.end(), m.v.begin(), m.v.end());
    });
    CHECK(a == b);

    // Any weight change shifts the fingerprint.
    Weights w2 = w;
    w2.w_combine.v[0] += 1.0f;
    CHECK(model_fingerprint(cfg, w2) != ckpt.fingerprint);

    std::string bytes = read_file_bytes(path);
    bytes[1] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(bytes), store_integrity_error);
}

TEST_CASE("sha256 known vectors") {
    CHECK(digest_hex(sha256(std::string(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(digest_hex(sha256(std::string("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // 56 bytes exercises the two-block padding path.
    CHECK(digest_hex(sha256(std::string("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}
