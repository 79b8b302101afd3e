#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prerank/run_file.hpp"

namespace prerank {

struct CorpusDoc {
    std::string doc_id;
    std::string text;
};

// Line-delimited JSON objects {"doc_id": ..., "text": ...}. Malformed lines
// are skipped and counted.
std::vector<CorpusDoc> read_corpus_jsonl(const std::string& path, std::size_t* skipped = nullptr);
void write_corpus_jsonl(const std::string& path, const std::vector<CorpusDoc>& docs);

// "qid<TAB>text" per line.
std::vector<std::pair<std::string, std::string>> read_queries_tsv(const std::string& path);
void write_queries_tsv(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& queries);

// ---- synthetic data -------------------------------------------------------

// A self-contained ranking task where relevance is decidable from token
// overlap: relevant documents mix the query's terms into their text, the rest
// draw only from a disjoint noise pool.
struct SyntheticRankingOptions {
    int n_queries = 16;
    int candidates_per_query = 50;
    int relevant_per_query = 5;
    int doc_tokens = 30;
    int query_terms = 2;
    int vocab_size = 4096;  // noise words colliding with query term ids are re-drawn
    std::uint64_t seed = 7;
};

struct SyntheticRanking {
    std::vector<CorpusDoc> corpus;
    std::vector<std::pair<std::string, std::string>> queries;
    RunFile candidates;  // shuffled order, synthetic first-stage scores
    Qrels qrels;
};

SyntheticRanking make_synthetic_ranking(const SyntheticRankingOptions& opts);

// Titled paragraphs for compressor pre-training; half the pairs swap in a
// heading from a different document.
struct RawTextPair {
    std::string heading;
    std::string paragraph;
    bool matched = true;
};

std::vector<RawTextPair> make_synthetic_text_pairs(int count, std::uint64_t seed);

}  // namespace prerank
