// prerank: transformer re-ranker with index-time document encoding.
//
// Subcommands: synth, index, rerank, pretrain-compressor, train, bench,
// estimate. Every command prints its resolved configuration (including the
// seed) before doing any work; failures exit nonzero with a single
// machine-readable JSON error line on stderr.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "prerank/bench.hpp"
#include "prerank/binio.hpp"
#include "prerank/checkpoint.hpp"
#include "prerank/corpus.hpp"
#include "prerank/pretrain.hpp"
#include "prerank/rep_store.hpp"
#include "prerank/run_file.hpp"
#include "prerank/split.hpp"
#include "prerank/tokenize.hpp"
#include "prerank/train.hpp"

using namespace prerank;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct AppConfig {
    int config_version = 1;
    ModelConfig model;
    TrainHyper train;
    PretrainHyper pretrain;
    int pretrain_pairs = 2000;
    int pretrain_holdout = 128;
    BenchOptions bench;
    std::uint64_t seed = 1;
    int threads = 1;
    Precision precision = Precision::F32;
    bool cls_only_last = false;
};

void require_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw input_error("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

Precision parse_precision(const std::string& s) {
    if (s == "f32") return Precision::F32;
    if (s == "f16") return Precision::F16;
    throw input_error("precision must be f32 or f16, got '" + s + "'");
}

AppConfig load_app_config(const std::string& path) {
    AppConfig cfg;
    if (path.empty()) return cfg;
    json j;
    try {
        j = json::parse(read_file_bytes(path));
    } catch (const json::exception& e) {
        throw input_error(std::string("config: bad JSON: ") + e.what());
    }
    require_keys(j,
                 {"config_version", "model", "train", "pretrain", "bench", "seed", "threads",
                  "precision", "cls_only_last"},
                 "top level");
    if (j.contains("config_version")) cfg.config_version = j["config_version"].get<int>();
    if (cfg.config_version != 1) {
        throw input_error("config: unsupported config_version " +
                          std::to_string(cfg.config_version));
    }
    if (j.contains("model")) cfg.model = ModelConfig::from_json(j["model"].dump());
    if (j.contains("train")) {
        const json& t = j["train"];
        require_keys(t,
                     {"lr", "beta1", "beta2", "eps", "batch_pairs", "accum_chunk", "val_every",
                      "val_k", "max_batches"},
                     "train");
        if (t.contains("lr")) cfg.train.adam.lr = t["lr"].get<float>();
        if (t.contains("beta1")) cfg.train.adam.beta1 = t["beta1"].get<float>();
        if (t.contains("beta2")) cfg.train.adam.beta2 = t["beta2"].get<float>();
        if (t.contains("eps")) cfg.train.adam.eps = t["eps"].get<float>();
        if (t.contains("batch_pairs")) cfg.train.batch_pairs = t["batch_pairs"].get<int>();
        if (t.contains("accum_chunk")) cfg.train.accum_chunk = t["accum_chunk"].get<int>();
        if (t.contains("val_every")) cfg.train.val_every = t["val_every"].get<int>();
        if (t.contains("val_k")) cfg.train.val_k = t["val_k"].get<int>();
        if (t.contains("max_batches")) cfg.train.max_batches = t["max_batches"].get<int>();
    }
    if (j.contains("pretrain")) {
        const json& p = j["pretrain"];
        require_keys(p, {"lr", "batch_pairs", "eval_every", "patience", "pairs", "holdout"},
                     "pretrain");
        if (p.contains("lr")) cfg.pretrain.adam.lr = p["lr"].get<float>();
        if (p.contains("batch_pairs")) cfg.pretrain.batch_pairs = p["batch_pairs"].get<int>();
        if (p.contains("eval_every")) cfg.pretrain.eval_every = p["eval_every"].get<int>();
        if (p.contains("patience")) cfg.pretrain.patience = p["patience"].get<int>();
        if (p.contains("pairs")) cfg.pretrain_pairs = p["pairs"].get<int>();
        if (p.contains("holdout")) cfg.pretrain_holdout = p["holdout"].get<int>();
    }
    if (j.contains("bench")) {
        const json& b = j["bench"];
        require_keys(b, {"docs_per_query", "repeats", "warmup"}, "bench");
        if (b.contains("docs_per_query")) cfg.bench.docs_per_query = b["docs_per_query"].get<int>();
        if (b.contains("repeats")) cfg.bench.repeats = b["repeats"].get<int>();
        if (b.contains("warmup")) cfg.bench.warmup = b["warmup"].get<int>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    if (j.contains("precision")) cfg.precision = parse_precision(j["precision"].get<std::string>());
    if (j.contains("cls_only_last")) cfg.cls_only_last = j["cls_only_last"].get<bool>();
    return cfg;
}

ordered_json resolved_json(const AppConfig& cfg) {
    ordered_json out;
    out["config_version"] = cfg.config_version;
    out["model"] = json::parse(cfg.model.to_json());
    out["train"] = {{"lr", cfg.train.adam.lr},
                    {"beta1", cfg.train.adam.beta1},
                    {"beta2", cfg.train.adam.beta2},
                    {"eps", cfg.train.adam.eps},
                    {"batch_pairs", cfg.train.batch_pairs},
                    {"accum_chunk", cfg.train.accum_chunk},
                    {"val_every", cfg.train.val_every},
                    {"val_k", cfg.train.val_k},
                    {"max_batches", cfg.train.max_batches}};
    out["pretrain"] = {{"lr", cfg.pretrain.adam.lr},
                       {"batch_pairs", cfg.pretrain.batch_pairs},
                       {"eval_every", cfg.pretrain.eval_every},
                       {"patience", cfg.pretrain.patience},
                       {"pairs", cfg.pretrain_pairs},
                       {"holdout", cfg.pretrain_holdout}};
    out["bench"] = {{"docs_per_query", cfg.bench.docs_per_query},
                    {"repeats", cfg.bench.repeats},
                    {"warmup", cfg.bench.warmup}};
    out["seed"] = cfg.seed;
    out["threads"] = cfg.threads;
    out["precision"] = cfg.precision == Precision::F32 ? "f32" : "f16";
    out["cls_only_last"] = cfg.cls_only_last;
    return out;
}

void print_resolved(const std::string& command, const AppConfig& cfg) {
    ordered_json out;
    out["command"] = command;
    out["resolved_config"] = resolved_json(cfg);
    std::cout << out.dump() << "\n";
}

// Bounded worker pool; results land at their input index so output order is
// independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t count, int threads, const Fn& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int n = std::min<int>(threads, static_cast<int>(count));
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

// ---- subcommand implementations -------------------------------------------

int cmd_synth(const AppConfig& app, const std::string& out_dir, int n_queries, int candidates,
              int relevant, int doc_tokens, int pair_count) {
    std::filesystem::create_directories(out_dir);
    SyntheticRankingOptions opts;
    opts.n_queries = n_queries;
    opts.candidates_per_query = candidates;
    opts.relevant_per_query = relevant;
    opts.doc_tokens = doc_tokens;
    opts.vocab_size = app.model.vocab_size;
    opts.seed = app.seed;
    const SyntheticRanking data = make_synthetic_ranking(opts);
    const auto dir = std::filesystem::path(out_dir);
    write_corpus_jsonl((dir / "corpus.jsonl").string(), data.corpus);
    write_queries_tsv((dir / "queries.tsv").string(), data.queries);
    write_run_file((dir / "candidates.run").string(), data.candidates);
    std::string qrels_text;
    for (const auto& [qid, docs] : data.qrels) {
        for (const auto& [docid, grade] : docs) {
            qrels_text += qid + " 0 " + docid + " " + std::to_string(grade) + "\n";
        }
    }
    write_file_bytes((dir / "qrels.txt").string(), qrels_text);

    const auto pairs = make_synthetic_text_pairs(pair_count, app.seed + 1);
    std::string pairs_text;
    for (const RawTextPair& p : pairs) {
        ordered_json j;
        j["heading"] = p.heading;
        j["paragraph"] = p.paragraph;
        j["matched"] = p.matched;
        pairs_text += j.dump();
        pairs_text += '\n';
    }
    write_file_bytes((dir / "pairs.jsonl").string(), pairs_text);

    std::cout << "wrote " << data.corpus.size() << " docs, " << data.queries.size()
              << " queries, " << pairs.size() << " text pairs to " << out_dir << "\n";
    return 0;
}

int cmd_index(const AppConfig& app, const std::string& corpus_path,
              const std::string& checkpoint_path, const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const ModelConfig& cfg = ckpt.cfg;

    std::size_t skipped = 0;
    const std::vector<CorpusDoc> docs = read_corpus_jsonl(corpus_path, &skipped);
    if (skipped > 0) std::cerr << "warning: skipped " << skipped << " malformed corpus lines\n";

    StoreHeader header;
    header.comp_dim = static_cast<std::uint16_t>(cfg.compression_enabled() ? cfg.comp_dim
                                                                           : cfg.d_model);
    header.precision = app.precision;
    header.split_layer = static_cast<std::uint8_t>(cfg.split_layer);
    header.fingerprint = ckpt.fingerprint;

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<CompressedReps> reps(docs.size());
    std::vector<std::uint8_t> empty_doc(docs.size(), 0);
    std::atomic<std::size_t> clamped{0};
    parallel_for(docs.size(), app.threads, [&](std::size_t i) {
        const std::vector<int> tokens = tokenize(docs[i].text, cfg.vocab_size);
        if (tokens.empty()) {
            empty_doc[i] = 1;
            return;
        }
        const PartialReps partial = precompute_doc(tokens, ckpt.weights, cfg, ckpt.fingerprint);
        std::size_t local_clamped = 0;
        reps[i] = reps_for_storage(partial.reps, ckpt.weights, cfg, app.precision, &local_clamped);
        if (local_clamped > 0) clamped.fetch_add(local_clamped);
    });

    StoreWriter writer(out_path, header);
    std::uint64_t total_tokens = 0;
    std::size_t written = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (empty_doc[i]) {
            std::cerr << "warning: skipping empty document " << docs[i].doc_id << "\n";
            continue;
        }
        writer.add(docs[i].doc_id, reps[i]);
        total_tokens += reps[i].rows;
        ++written;
    }
    const StoreWriteSummary summary = writer.finalize();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ordered_json report;
    report["docs_indexed"] = summary.doc_count;
    report["docs_per_sec"] = seconds > 0 ? static_cast<double>(written) / seconds : 0.0;
    report["payload_bytes"] = summary.payload_bytes;
    report["bytes_written"] = summary.bytes_written;
    report["tokens_stored"] = total_tokens;
    if (summary.doc_count > 0) {
        const double avg_tokens =
            static_cast<double>(total_tokens) / static_cast<double>(summary.doc_count);
        report["avg_tokens_per_doc"] = avg_tokens;
        report["projected_payload_bytes"] =
            estimate_storage(static_cast<double>(summary.doc_count), avg_tokens,
                             header.comp_dim, bytes_per_value(app.precision));
    }
    if (clamped.load() > 0) report["f16_clamped_values"] = clamped.load();
    std::cout << report.dump() << "\n";
    return 0;
}

enum class MissingPolicy { Error, Encode, Skip };

int cmd_rerank(const AppConfig& app, const std::string& store_path,
               const std::string& checkpoint_path, const std::string& queries_path,
               const std::string& candidates_path, int k, const std::string& out_path,
               const std::string& on_missing, const std::string& corpus_path,
               const std::string& tag) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const ModelConfig& cfg = ckpt.cfg;
    MissingPolicy policy = MissingPolicy::Error;
    if (on_missing == "encode") policy = MissingPolicy::Encode;
    else if (on_missing == "skip") policy = MissingPolicy::Skip;
    else if (on_missing != "error") throw input_error("--on-missing must be error|encode|skip");

    const StoreReader store(store_path);
    store.require_model(ckpt.fingerprint);
    if (store.header().split_layer != cfg.split_layer) {
        throw stale_model_error("rerank: store split layer does not match the model");
    }

    std::map<std::string, std::string> query_text;
    for (const auto& [qid, text] : read_queries_tsv(queries_path)) query_text[qid] = text;

    std::map<std::string, std::string> doc_text;
    if (policy == MissingPolicy::Encode) {
        if (corpus_path.empty()) {
            throw input_error("--on-missing encode requires --corpus for re-encoding");
        }
        for (const CorpusDoc& d : read_corpus_jsonl(corpus_path)) doc_text[d.doc_id] = d.text;
    }

    const RunFile candidates = read_run_file(candidates_path);
    const auto groups = run_by_query(candidates);

    RunFile out;
    for (const auto& [qid, entries] : groups) {
        auto qt = query_text.find(qid);
        if (qt == query_text.end()) throw input_error("rerank: no query text for id " + qid);
        const std::vector<int> q_tokens = tokenize(qt->second, cfg.vocab_size);
        if (q_tokens.empty()) throw input_error("rerank: query " + qid + " tokenizes to nothing");
        const PartialReps q_reps = encode_query(q_tokens, ckpt.weights, cfg, ckpt.fingerprint);

        const std::size_t take = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(k));
        std::vector<std::pair<float, std::string>> scored(take);
        std::vector<std::uint8_t> skipped(take, 0);
        parallel_for(take, app.threads, [&](std::size_t i) {
            const std::string& doc_id = entries[i].doc_id;
            PartialReps d_reps;
            if (store.contains(doc_id)) {
                d_reps = doc_partial_from_storage(store.read_doc(doc_id), ckpt.weights, cfg,
                                                  ckpt.fingerprint);
            } else if (policy == MissingPolicy::Encode) {
                auto dt = doc_text.find(doc_id);
                if (dt == doc_text.end()) {
                    throw doc_not_found_error(doc_id);
                }
                const std::vector<int> tokens = tokenize(dt->second, cfg.vocab_size);
                d_reps = precompute_doc(tokens, ckpt.weights, cfg, ckpt.fingerprint);
            } else if (policy == MissingPolicy::Skip) {
                skipped[i] = 1;
                return;
            } else {
                throw doc_not_found_error(doc_id);
            }
            scored[i] = {join_and_score(q_reps, d_reps, ckpt.weights, cfg, ckpt.fingerprint,
                                        app.cls_only_last),
                         doc_id};
        });
        std::vector<std::pair<float, std::string>> kept;
        for (std::size_t i = 0; i < take; ++i) {
            if (!skipped[i]) kept.push_back(scored[i]);
        }
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t i = 0; i < kept.size(); ++i) {
            RunEntry e;
            e.query_id = qid;
            e.doc_id = kept[i].second;
            e.rank = static_cast<int>(i) + 1;
            e.score = kept[i].first;
            e.tag = tag;
            out.push_back(std::move(e));
        }
    }
    write_run_file(out_path, out);
    std::cout << "wrote " << out.size() << " entries for " << groups.size() << " queries to "
              << out_path << "\n";
    return 0;
}

std::vector<TextPair> load_text_pairs(const AppConfig& app, const std::string& pairs_path,
                                      int synth_count) {
    std::vector<TextPair> pairs;
    auto add_pair = [&](const std::string& heading, const std::string& paragraph, bool matched) {
        TextPair p;
        p.heading = tokenize(heading, app.model.vocab_size);
        p.paragraph = tokenize(paragraph, app.model.vocab_size);
        p.matched = matched;
        if (!p.heading.empty() && !p.paragraph.empty()) pairs.push_back(std::move(p));
    };
    if (!pairs_path.empty()) {
        std::istringstream in(read_file_bytes(pairs_path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            add_pair(j.at("heading").get<std::string>(), j.at("paragraph").get<std::string>(),
                     j.value("matched", true));
        }
    } else {
        for (const RawTextPair& p : make_synthetic_text_pairs(synth_count, app.seed + 1)) {
            add_pair(p.heading, p.paragraph, p.matched);
        }
    }
    if (pairs.empty()) throw input_error("pretrain: no usable text pairs");
    return pairs;
}

int cmd_pretrain_compressor(const AppConfig& app, const std::string& checkpoint_path,
                            const std::string& out_path, const std::string& pairs_path,
                            const std::string& log_path) {
    Checkpoint ckpt;
    if (!checkpoint_path.empty()) {
        ckpt = load_checkpoint(checkpoint_path);
    } else {
        ckpt.cfg = app.model;
        ckpt.weights = init_weights(app.model, app.seed);
    }
    if (!ckpt.cfg.compression_enabled()) {
        throw input_error("pretrain: model has no compression unit (comp_dim is 0)");
    }

    std::vector<TextPair> pairs = load_text_pairs(app, pairs_path, app.pretrain_pairs);
    const int holdout_n =
        std::min<int>(app.pretrain_holdout, static_cast<int>(pairs.size()) / 5 + 1);
    const std::vector<TextPair> holdout(pairs.end() - holdout_n, pairs.end());
    pairs.resize(pairs.size() - holdout_n);

    PretrainHyper hyper = app.pretrain;
    hyper.seed = app.seed;
    const PretrainResult result = pretrain_compressor(ckpt.cfg, ckpt.weights, pairs, holdout,
                                                      hyper);
    save_checkpoint(out_path, ckpt.cfg, result.weights);

    if (!log_path.empty()) {
        std::string log;
        for (std::size_t i = 0; i < result.step_losses.size(); ++i) {
            ordered_json j;
            j["step"] = i + 1;
            j["loss"] = result.step_losses[i];
            log += j.dump();
            log += '\n';
        }
        write_file_bytes(log_path, log);
    }

    ordered_json report;
    report["steps"] = result.steps_run;
    report["train_pairs"] = pairs.size();
    report["holdout_pairs"] = holdout.size();
    report["initial_holdout_loss"] = result.initial_holdout_loss;
    report["best_holdout_loss"] = result.best_holdout_loss;
    report["best_step"] = result.best_step;
    report["checkpoint"] = out_path;
    std::cout << report.dump() << "\n";
    return 0;
}

struct LabeledQuery {
    std::string qid;
    std::vector<int> tokens;
    std::vector<std::pair<std::string, std::vector<int>>> positives;
    std::vector<std::pair<std::string, std::vector<int>>> negatives;
};

int cmd_train(const AppConfig& app, const std::string& corpus_path, const std::string& queries_path,
              const std::string& candidates_path, const std::string& qrels_path,
              const std::string& val_queries_path, const std::string& val_candidates_path,
              const std::string& val_qrels_path, const std::string& out_path,
              const std::string& log_path) {
    const ModelConfig cfg = app.model;
    cfg.validate();

    std::map<std::string, std::string> doc_text;
    for (const CorpusDoc& d : read_corpus_jsonl(corpus_path)) doc_text[d.doc_id] = d.text;
    auto doc_tokens = [&](const std::string& doc_id) {
        auto it = doc_text.find(doc_id);
        if (it == doc_text.end()) throw input_error("train: candidate doc missing from corpus: " +
                                                    doc_id);
        return tokenize(it->second, cfg.vocab_size);
    };

    // Training pools: positives are graded relevant, negatives are the other
    // top-ranked candidates of the same query.
    const Qrels qrels = read_qrels(qrels_path);
    std::map<std::string, std::string> query_text;
    for (const auto& [qid, text] : read_queries_tsv(queries_path)) query_text[qid] = text;
    std::vector<LabeledQuery> pool;
    for (const auto& [qid, entries] : run_by_query(read_run_file(candidates_path))) {
        auto qt = query_text.find(qid);
        if (qt == query_text.end()) continue;
        LabeledQuery lq;
        lq.qid = qid;
        lq.tokens = tokenize(qt->second, cfg.vocab_size);
        if (lq.tokens.empty()) continue;
        auto qr = qrels.find(qid);
        for (const RunEntry& e : entries) {
            const std::vector<int> tokens = doc_tokens(e.doc_id);
            if (tokens.empty()) continue;
            const bool positive =
                qr != qrels.end() && qr->second.count(e.doc_id) && qr->second.at(e.doc_id) > 0;
            (positive ? lq.positives : lq.negatives).emplace_back(e.doc_id, tokens);
        }
        if (!lq.positives.empty() && !lq.negatives.empty()) pool.push_back(std::move(lq));
    }
    if (pool.empty()) throw input_error("train: no query with both positive and negative docs");

    auto sample_pair = [&pool](std::mt19937_64& rng) {
        const LabeledQuery& lq = pool[rng() % pool.size()];
        TrainPair p;
        p.query = lq.tokens;
        p.pos_doc = lq.positives[rng() % lq.positives.size()].second;
        p.neg_doc = lq.negatives[rng() % lq.negatives.size()].second;
        return p;
    };

    // Validation set with graded labels.
    std::map<std::string, std::string> val_query_text;
    for (const auto& [qid, text] : read_queries_tsv(val_queries_path)) val_query_text[qid] = text;
    const Qrels val_qrels = read_qrels(val_qrels_path);
    std::vector<ValQuery> val;
    for (const auto& [qid, entries] : run_by_query(read_run_file(val_candidates_path))) {
        auto qt = val_query_text.find(qid);
        if (qt == val_query_text.end()) continue;
        ValQuery vq;
        vq.query_id = qid;
        vq.tokens = tokenize(qt->second, cfg.vocab_size);
        if (vq.tokens.empty()) continue;
        auto qr = val_qrels.find(qid);
        for (const RunEntry& e : entries) {
            ValCandidate c;
            c.doc_id = e.doc_id;
            c.tokens = doc_tokens(e.doc_id);
            if (c.tokens.empty()) continue;
            c.grade = qr != val_qrels.end() && qr->second.count(e.doc_id) ? qr->second.at(e.doc_id)
                                                                          : 0;
            vq.candidates.push_back(std::move(c));
        }
        if (!vq.candidates.empty()) val.push_back(std::move(vq));
    }
    if (val.empty()) throw input_error("train: empty validation set");

    TrainHyper hyper = app.train;
    hyper.seed = app.seed;
    const Weights init = init_weights(cfg, app.seed);
    const TrainResult result = train(cfg, init, sample_pair, val, hyper);
    save_checkpoint(out_path, cfg, result.best);

    if (!log_path.empty()) {
        std::string log;
        for (const TraceEntry& e : result.trace) {
            ordered_json j;
            j["step"] = e.step;
            j["loss"] = e.loss;
            if (e.val_p_at_k >= 0.0) {
                j["val_metric"] = e.val_p_at_k;
                j["val_pairwise_accuracy"] = e.val_pair_acc;
            }
            log += j.dump();
            log += '\n';
        }
        write_file_bytes(log_path, log);
    }

    ordered_json report;
    report["best_step"] = result.best_step;
    report["best_val_p_at_k"] = result.best_metric;
    report["batches"] = hyper.max_batches;
    report["checkpoint"] = out_path;
    report["checkpoint_digest"] = digest_hex(sha256(read_file_bytes(out_path)));
    std::cout << report.dump() << "\n";
    return 0;
}

int cmd_bench(const AppConfig& app, const std::string& checkpoint_path,
              const std::string& store_path, const std::string& l_values_csv,
              const std::string& csv_out) {
    ModelConfig cfg = app.model;
    Weights weights;
    if (!checkpoint_path.empty()) {
        Checkpoint ckpt = load_checkpoint(checkpoint_path);
        cfg = ckpt.cfg;
        weights = std::move(ckpt.weights);
    } else {
        weights = init_weights(cfg, app.seed);
    }
    BenchOptions opts = app.bench;
    opts.cls_only_last = app.cls_only_last;
    opts.precision = app.precision;
    opts.threads = app.threads;

    // Deterministic synthetic workload.
    std::mt19937_64 rng(app.seed);
    auto token_lists = [&](int count, int len) {
        std::vector<std::vector<int>> lists(count);
        for (auto& l : lists) {
            l.resize(len);
            for (auto& t : l) {
                t = kReservedIds + static_cast<int>(rng() % (cfg.vocab_size - kReservedIds));
            }
        }
        return lists;
    };
    const auto queries = token_lists(4, std::min(cfg.q_max, 4));
    const auto docs = token_lists(opts.docs_per_query, std::max(8, cfg.max_doc_tokens() * 3 / 4));

    std::vector<PhaseTimings> rows;
    if (!store_path.empty()) {
        const StoreReader store(store_path);
        rows.push_back(run_bench_store(weights, cfg, store, queries, opts));
    } else {
        std::vector<int> l_values;
        if (l_values_csv.empty()) {
            for (int l = 0; l <= cfg.n_layers; ++l) l_values.push_back(l);
        } else {
            std::istringstream in(l_values_csv);
            std::string item;
            while (std::getline(in, item, ',')) l_values.push_back(std::stoi(item));
        }
        rows = run_bench_sweep(weights, cfg, queries, docs, l_values, opts);
    }
    std::cout << bench_table(rows);
    if (!csv_out.empty()) {
        write_file_bytes(csv_out, bench_csv(rows));
        std::cout << "csv written to " << csv_out << "\n";
    }
    return 0;
}

int cmd_estimate(double docs, double avg_tokens, int dim, const std::string& precision) {
    const int bpv = bytes_per_value(parse_precision(precision));
    const std::uint64_t bytes = estimate_storage(docs, avg_tokens, dim, bpv);
    ordered_json report;
    report["doc_count"] = docs;
    report["avg_tokens_per_doc"] = avg_tokens;
    report["dim"] = dim;
    report["bytes_per_value"] = bpv;
    report["payload_bytes"] = bytes;
    char human[64];
    if (bytes >= 1e12) {
        std::snprintf(human, sizeof(human), "%.1fTB", static_cast<double>(bytes) / 1e12);
    } else if (bytes >= 1e9) {
        std::snprintf(human, sizeof(human), "%.1fGB", static_cast<double>(bytes) / 1e9);
    } else if (bytes >= 1e6) {
        std::snprintf(human, sizeof(human), "%.1fMB", static_cast<double>(bytes) / 1e6);
    } else {
        std::snprintf(human, sizeof(human), "%lluB", static_cast<unsigned long long>(bytes));
    }
    report["human_readable"] = human;
    std::cout << report.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli("prerank: transformer re-ranker with precomputed document representations");
    cli.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    int threads_flag = 0;
    int split_layer_flag = -1;
    int comp_dim_flag = -1;
    std::string precision_flag;
    bool cls_only_flag = false;
    cli.add_option("--config", config_path, "JSON config file");
    cli.add_option("--seed", seed_flag, "reproducibility seed")->each([&](const std::string&) {
        seed_set = true;
    });
    cli.add_option("--threads", threads_flag, "worker threads (0 = config value)");
    cli.add_option("--split-layer", split_layer_flag, "override model split layer");
    cli.add_option("--comp-dim", comp_dim_flag, "override compression width (0 disables)");
    cli.add_option("--precision", precision_flag, "storage precision: f32 or f16");
    cli.add_flag("--cls-only-last", cls_only_flag, "compute only the CLS row in the last layer");

    // synth
    auto* synth = cli.add_subcommand("synth", "generate synthetic corpora and text pairs");
    std::string synth_dir;
    int synth_queries = 16;
    int synth_candidates = 50;
    int synth_relevant = 5;
    int synth_doc_tokens = 30;
    int synth_pairs = 2000;
    synth->add_option("--out-dir", synth_dir, "output directory")->required();
    synth->add_option("--queries", synth_queries, "number of queries");
    synth->add_option("--candidates", synth_candidates, "candidates per query");
    synth->add_option("--relevant", synth_relevant, "relevant docs per query");
    synth->add_option("--doc-tokens", synth_doc_tokens, "tokens per document");
    synth->add_option("--pairs", synth_pairs, "synthetic text pairs for compressor pre-training");

    // index
    auto* index = cli.add_subcommand("index", "precompute and store document representations");
    std::string index_corpus, index_ckpt, index_out;
    index->add_option("--corpus", index_corpus, "corpus.jsonl")->required();
    index->add_option("--checkpoint", index_ckpt, "model checkpoint")->required();
    index->add_option("--out", index_out, "output store path")->required();

    // rerank
    auto* rerank = cli.add_subcommand("rerank", "re-rank candidate documents against stored reps");
    std::string rr_store, rr_ckpt, rr_queries, rr_cands, rr_out, rr_missing = "error", rr_corpus,
                                                                 rr_tag = "prerank";
    int rr_k = 100;
    rerank->add_option("--store", rr_store, "representation store")->required();
    rerank->add_option("--checkpoint", rr_ckpt, "model checkpoint")->required();
    rerank->add_option("--queries", rr_queries, "queries.tsv")->required();
    rerank->add_option("--candidates", rr_cands, "candidate run file")->required();
    rerank->add_option("--out", rr_out, "output run file")->required();
    rerank->add_option("-k,--top-k", rr_k, "candidates per query to score");
    rerank->add_option("--on-missing", rr_missing, "missing doc policy: error|encode|skip");
    rerank->add_option("--corpus", rr_corpus, "corpus for --on-missing encode");
    rerank->add_option("--tag", rr_tag, "run tag");

    // pretrain-compressor
    auto* pre = cli.add_subcommand("pretrain-compressor",
                                   "train the compression unit to match attention");
    std::string pre_ckpt, pre_out, pre_pairs, pre_log;
    pre->add_option("--checkpoint", pre_ckpt, "input checkpoint (fresh model when omitted)");
    pre->add_option("--out", pre_out, "output checkpoint")->required();
    pre->add_option("--pairs", pre_pairs, "pairs.jsonl (synthetic when omitted)");
    pre->add_option("--log", pre_log, "loss curve as line-delimited JSON");

    // train
    auto* tr = cli.add_subcommand("train", "relevance fine-tuning with pairwise loss");
    std::string tr_corpus, tr_queries, tr_cands, tr_qrels, tr_vq, tr_vc, tr_vqr, tr_out, tr_log;
    tr->add_option("--corpus", tr_corpus, "corpus.jsonl")->required();
    tr->add_option("--queries", tr_queries, "training queries.tsv")->required();
    tr->add_option("--candidates", tr_cands, "training candidates run")->required();
    tr->add_option("--qrels", tr_qrels, "training qrels")->required();
    tr->add_option("--val-queries", tr_vq, "validation queries.tsv")->required();
    tr->add_option("--val-candidates", tr_vc, "validation candidates run")->required();
    tr->add_option("--val-qrels", tr_vqr, "validation qrels")->required();
    tr->add_option("--out", tr_out, "output checkpoint")->required();
    tr->add_option("--log", tr_log, "training trace as line-delimited JSON");

    // bench
    auto* bench = cli.add_subcommand("bench", "phase-resolved latency benchmark");
    std::string bench_ckpt, bench_store, bench_l, bench_csv_out;
    bench->add_option("--checkpoint", bench_ckpt, "model checkpoint (random init when omitted)");
    bench->add_option("--store", bench_store, "measure against an existing store (single l)");
    bench->add_option("--l-values", bench_l, "comma-separated split layers (default: all)");
    bench->add_option("--csv", bench_csv_out, "write CSV to this path");

    // estimate
    auto* est = cli.add_subcommand("estimate", "storage cost estimator");
    double est_docs = 0.0;
    double est_avg = 0.0;
    int est_dim = 0;
    std::string est_precision = "f32";
    est->add_option("--docs", est_docs, "document count")->required();
    est->add_option("--avg-tokens", est_avg, "average stored tokens per document")->required();
    est->add_option("--dim", est_dim, "stored representation width")->required();
    est->add_option("--precision", est_precision, "f32 or f16");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) {
            json err;
            err["error"] = e.what();
            std::cerr << err.dump() << "\n";
        }
        return cli.exit(e);
    }

    try {
        AppConfig app = load_app_config(config_path);
        if (seed_set) app.seed = seed_flag;
        if (threads_flag > 0) app.threads = threads_flag;
        if (split_layer_flag >= 0) app.model.split_layer = split_layer_flag;
        if (comp_dim_flag >= 0) app.model.comp_dim = comp_dim_flag;
        if (!precision_flag.empty()) app.precision = parse_precision(precision_flag);
        if (cls_only_flag) app.cls_only_last = true;
        app.model.validate();

        if (synth->parsed()) {
            print_resolved("synth", app);
            return cmd_synth(app, synth_dir, synth_queries, synth_candidates, synth_relevant,
                             synth_doc_tokens, synth_pairs);
        }
        if (index->parsed()) {
            print_resolved("index", app);
            return cmd_index(app, index_corpus, index_ckpt, index_out);
        }
        if (rerank->parsed()) {
            print_resolved("rerank", app);
            return cmd_rerank(app, rr_store, rr_ckpt, rr_queries, rr_cands, rr_k, rr_out,
                              rr_missing, rr_corpus, rr_tag);
        }
        if (pre->parsed()) {
            print_resolved("pretrain-compressor", app);
            return cmd_pretrain_compressor(app, pre_ckpt, pre_out, pre_pairs, pre_log);
        }
        if (tr->parsed()) {
            print_resolved("train", app);
            return cmd_train(app, tr_corpus, tr_queries, tr_cands, tr_qrels, tr_vq, tr_vc, tr_vqr,
                             tr_out, tr_log);
        }
        if (bench->parsed()) {
            print_resolved("bench", app);
            return cmd_bench(app, bench_ckpt, bench_store, bench_l, bench_csv_out);
        }
        if (est->parsed()) {
            print_resolved("estimate", app);
            return cmd_estimate(est_docs, est_avg, est_dim, est_precision);
        }
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
