// End-to-end checks through the installed CLI binary (path via PRERANK_CLI).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "prerank/bench.hpp"
#include "prerank/binio.hpp"
#include "prerank/checkpoint.hpp"
#include "prerank/digest.hpp"
#include "prerank/rep_store.hpp"
#include "prerank/run_file.hpp"

using namespace prerank;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string stdout_text;
    std::string stderr_text;
};

std::string cli_path() {
#ifdef PRERANK_CLI
    return PRERANK_CLI;
#else
    return "prerank";
#endif
}

CliResult run_cli(const std::string& args, const std::string& workdir) {
    const std::string out_file = workdir + "/cli_stdout.txt";
    const std::string err_file = workdir + "/cli_stderr.txt";
    const std::string cmd =
        "cd " + workdir + " && " + cli_path() + " " + args + " > " + out_file + " 2> " + err_file;
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.stdout_text = read_file_bytes(out_file);
    r.stderr_text = read_file_bytes(err_file);
    return r;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("prerank_cli_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

void write_config(const std::string& path) {
    write_file_bytes(path, R"({
  "config_version": 1,
  "model": {"n_layers": 2, "d_model": 16, "n_heads": 2, "d_ff": 32, "vocab_size": 512,
            "max_len": 40, "q_max": 4, "split_layer": 1, "comp_dim": 8},
  "train": {"lr": 0.001, "batch_pairs": 4, "val_every": 8, "val_k": 5, "max_batches": 8},
  "pretrain": {"lr": 0.002, "batch_pairs": 8, "eval_every": 5, "patience": 3, "pairs": 60,
               "holdout": 20},
  "bench": {"docs_per_query": 4, "repeats": 3, "warmup": 1},
  "seed": 7,
  "threads": 2
})");
}

// synth + train once per suite; later cases reuse the artifacts.
struct Fixture {
    TempDir tmp;
    std::string dir;
    Fixture() : dir(tmp.str()) {
        write_config(dir + "/config.json");
        REQUIRE(run_cli("--config config.json synth --out-dir data --queries 4 --candidates 12"
                        " --relevant 3 --doc-tokens 20 --pairs 40",
                        dir)
                    .exit_code == 0);
        REQUIRE(run_cli("--config config.json train --corpus data/corpus.jsonl"
                        " --queries data/queries.tsv --candidates data/candidates.run"
                        " --qrels data/qrels.txt --val-queries data/queries.tsv"
                        " --val-candidates data/candidates.run --val-qrels data/qrels.txt"
                        " --out model.ptwt --log train.jsonl",
                        dir)
                    .exit_code == 0);
    }
};

}  // namespace

TEST_CASE("cli pipeline: synth, train, index, rerank, bench, estimate") {
    Fixture fx;
    const std::string& dir = fx.dir;

    SUBCASE("resolved config and seed are printed") {
        const CliResult r = run_cli("--config config.json estimate --docs 10 --avg-tokens 5"
                                    " --dim 4 --precision f32",
                                    dir);
        CHECK(r.exit_code == 0);
        CHECK(r.stdout_text.find("\"resolved_config\"") != std::string::npos);
        CHECK(r.stdout_text.find("\"seed\":7") != std::string::npos);
        CHECK(r.stdout_text.find("\"payload_bytes\":800") != std::string::npos);
    }

    SUBCASE("index and rerank produce a valid, deterministic run file") {
        CHECK(run_cli("--config config.json index --corpus data/corpus.jsonl"
                      " --checkpoint model.ptwt --out store.pttr",
                      dir)
                  .exit_code == 0);
        CHECK(run_cli("--config config.json index --corpus data/corpus.jsonl"
                      " --checkpoint model.ptwt --out store2.pttr",
                      dir)
                  .exit_code == 0);
        CHECK(sha256(read_file_bytes(dir + "/store.pttr")) ==
              sha256(read_file_bytes(dir + "/store2.pttr")));

        CHECK(run_cli("--config config.json rerank --store store.pttr --checkpoint model.ptwt"
                      " --queries data/queries.tsv --candidates data/candidates.run -k 12"
                      " --out reranked.run",
                      dir)
                  .exit_code == 0);
        const RunFile run = read_run_file(dir + "/reranked.run");
        CHECK_FALSE(run.empty());
        for (const auto& [qid, entries] : run_by_query(run)) {
            CHECK(entries.size() == 12);
            for (std::size_t i = 0; i < entries.size(); ++i) {
                CHECK(entries[i].rank == static_cast<int>(i) + 1);
                if (i > 0) CHECK(entries[i].score <= entries[i - 1].score);
            }
        }
        CHECK(run_cli("--config config.json rerank --store store.pttr --checkpoint model.ptwt"
                      " --queries data/queries.tsv --candidates data/candidates.run -k 12"
                      " --out reranked2.run",
                      dir)
                  .exit_code == 0);
        CHECK(read_file_bytes(dir + "/reranked.run") == read_file_bytes(dir + "/reranked2.run"));

        // k = 1 keeps the single candidate in place.
        CHECK(run_cli("--config config.json rerank --store store.pttr --checkpoint model.ptwt"
                      " --queries data/queries.tsv --candidates data/candidates.run -k 1"
                      " --out top1.run",
                      dir)
                  .exit_code == 0);
        const RunFile top1 = read_run_file(dir + "/top1.run");
        const RunFile cands = read_run_file(dir + "/data/candidates.run");
        const auto top1_groups = run_by_query(top1);
        const auto cand_groups = run_by_query(cands);
        REQUIRE(top1_groups.size() == cand_groups.size());
        for (std::size_t g = 0; g < top1_groups.size(); ++g) {
            REQUIRE(top1_groups[g].second.size() == 1);
            CHECK(top1_groups[g].second[0].doc_id == cand_groups[g].second[0].doc_id);
        }
    }

    SUBCASE("training twice with the same seed gives the same checkpoint digest") {
        const CliResult again = run_cli(
            "--config config.json train --corpus data/corpus.jsonl --queries data/queries.tsv"
            " --candidates data/candidates.run --qrels data/qrels.txt"
            " --val-queries data/queries.tsv --val-candidates data/candidates.run"
            " --val-qrels data/qrels.txt --out model_b.ptwt",
            dir);
        CHECK(again.exit_code == 0);
        CHECK(sha256(read_file_bytes(dir + "/model.ptwt")) ==
              sha256(read_file_bytes(dir + "/model_b.ptwt")));
    }

    SUBCASE("pretrain-compressor runs and saves a loadable checkpoint") {
        const CliResult r = run_cli("--config config.json pretrain-compressor"
                                    " --checkpoint model.ptwt --out model_comp.ptwt"
                                    " --pairs data/pairs.jsonl --log pretrain.jsonl",
                                    dir);
        CHECK(r.exit_code == 0);
        const Checkpoint ckpt = load_checkpoint(dir + "/model_comp.ptwt");
        CHECK(ckpt.cfg.comp_dim == 8);
        CHECK(read_file_bytes(dir + "/pretrain.jsonl").find("\"loss\"") != std::string::npos);
    }

    SUBCASE("bench emits a parseable CSV") {
        const CliResult r = run_cli("--config config.json bench --checkpoint model.ptwt"
                                    " --csv bench.csv",
                                    dir);
        CHECK(r.exit_code == 0);
        const auto rows = parse_bench_csv(read_file_bytes(dir + "/bench.csv"));
        CHECK(rows.size() == 3);  // l in {0, 1, 2}
        CHECK(rows[0].speedup_vs_base == doctest::Approx(1.0));
    }

    SUBCASE("missing doc policy: error by default, skip drops, encode recomputes") {
        CHECK(run_cli("--config config.json index --corpus data/corpus.jsonl"
                      " --checkpoint model.ptwt --out store.pttr",
                      dir)
                  .exit_code == 0);
        // Candidates referencing a doc that is not in the store.
        write_file_bytes(dir + "/ghost.run", "q0 Q0 ghostdoc 1 1.000000 t\n");
        const CliResult err = run_cli("--config config.json rerank --store store.pttr"
                                      " --checkpoint model.ptwt --queries data/queries.tsv"
                                      " --candidates ghost.run -k 5 --out ghost_out.run",
                                      dir);
        CHECK(err.exit_code != 0);
        CHECK(err.stderr_text.find("\"error\"") != std::string::npos);

        const CliResult skip = run_cli("--config config.json rerank --store store.pttr"
                                       " --checkpoint model.ptwt --queries data/queries.tsv"
                                       " --candidates ghost.run -k 5 --out skip_out.run"
                                       " --on-missing skip",
                                       dir);
        CHECK(skip.exit_code == 0);
        CHECK(read_run_file(dir + "/skip_out.run").empty());

        write_file_bytes(dir + "/ghost_corpus.jsonl",
                         "{\"doc_id\": \"ghostdoc\", \"text\": \"zuma loko pema\"}\n");
        const CliResult enc = run_cli("--config config.json rerank --store store.pttr"
                                      " --checkpoint model.ptwt --queries data/queries.tsv"
                                      " --candidates ghost.run -k 5 --out enc_out.run"
                                      " --on-missing encode --corpus ghost_corpus.jsonl",
                                      dir);
        CHECK(enc.exit_code == 0);
        CHECK(read_run_file(dir + "/enc_out.run").size() == 1);
    }

    SUBCASE("store/model mismatch is refused") {
        CHECK(run_cli("--config config.json index --corpus data/corpus.jsonl"
                      " --checkpoint model.ptwt --out store.pttr",
                      dir)
                  .exit_code == 0);
        // A different seed gives a different model, so the store must be refused.
        CHECK(run_cli("--config config.json --seed 99 train --corpus data/corpus.jsonl"
                      " --queries data/queries.tsv --candidates data/candidates.run"
                      " --qrels data/qrels.txt --val-queries data/queries.tsv"
                      " --val-candidates data/candidates.run --val-qrels data/qrels.txt"
                      " --out other.ptwt",
                      dir)
                  .exit_code == 0);
        const CliResult r = run_cli("--config config.json rerank --store store.pttr"
                                    " --checkpoint other.ptwt --queries data/queries.tsv"
                                    " --candidates data/candidates.run -k 4 --out x.run",
                                    dir);
        CHECK(r.exit_code != 0);
        CHECK(r.stderr_text.find("fingerprint") != std::string::npos);
    }

    SUBCASE("unknown config keys are refused") {
        write_file_bytes(dir + "/bad.json", R"({"config_version": 1, "modle": {}})");
        const CliResult r = run_cli("--config bad.json estimate --docs 1 --avg-tokens 1 --dim 1",
                                    dir);
        CHECK(r.exit_code != 0);
        CHECK(r.stderr_text.find("unknown key") != std::string::npos);
    }

    SUBCASE("empty corpus still builds a valid store") {
        write_file_bytes(dir + "/empty.jsonl", "");
        CHECK(run_cli("--config config.json index --corpus empty.jsonl --checkpoint model.ptwt"
                      " --out empty.pttr",
                      dir)
                  .exit_code == 0);
        const StoreReader reader(dir + "/empty.pttr");
        CHECK(reader.header().doc_count == 0);
    }
}
