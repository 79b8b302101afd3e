#include "prerank/corpus.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "prerank/binio.hpp"
#include "prerank/tokenize.hpp"

namespace prerank {

std::vector<CorpusDoc> read_corpus_jsonl(const std::string& path, std::size_t* skipped) {
    std::istringstream in(read_file_bytes(path));
    std::vector<CorpusDoc> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            CorpusDoc doc;
            doc.doc_id = j.at("doc_id").get<std::string>();
            doc.text = j.at("text").get<std::string>();
            if (doc.doc_id.empty() || doc.text.empty()) throw input_error("empty field");
            docs.push_back(std::move(doc));
        } catch (const std::exception&) {
            if (skipped) ++*skipped;
        }
    }
    return docs;
}

void write_corpus_jsonl(const std::string& path, const std::vector<CorpusDoc>& docs) {
    std::string out;
    for (const CorpusDoc& d : docs) {
        nlohmann::ordered_json j;
        j["doc_id"] = d.doc_id;
        j["text"] = d.text;
        out += j.dump();
        out += '\n';
    }
    write_file_bytes(path, out);
}

std::vector<std::pair<std::string, std::string>> read_queries_tsv(const std::string& path) {
    std::istringstream in(read_file_bytes(path));
    std::vector<std::pair<std::string, std::string>> queries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw input_error("queries: malformed line " + std::to_string(line_no));
        }
        queries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return queries;
}

void write_queries_tsv(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& queries) {
    std::string out;
    for (const auto& [qid, text] : queries) {
        out += qid;
        out += '\t';
        out += text;
        out += '\n';
    }
    write_file_bytes(path, out);
}

namespace {

// Pronounceable deterministic fake words.
std::string make_word(std::mt19937_64& rng) {
    static const char* consonants = "bcdfgklmnprstvz";
    static const char* vowels = "aeiou";
    const int syllables = 2 + static_cast<int>(rng() % 2);
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w.push_back(consonants[rng() % 15]);
        w.push_back(vowels[rng() % 5]);
    }
    return w;
}

std::vector<std::string> make_word_pool(std::mt19937_64& rng, std::size_t count,
                                        std::set<std::string>* used) {
    std::vector<std::string> pool;
    while (pool.size() < count) {
        std::string w = make_word(rng);
        if (used->insert(w).second) pool.push_back(std::move(w));
    }
    return pool;
}

}  // namespace

SyntheticRanking make_synthetic_ranking(const SyntheticRankingOptions& opts) {
    std::mt19937_64 rng(opts.seed);
    std::set<std::string> used_words;

    // Disjoint id spaces: drop noise words whose hashed id collides with any
    // topic term id, so relevance stays decidable after tokenization.
    const std::vector<std::string> topic_pool =
        make_word_pool(rng, static_cast<std::size_t>(opts.n_queries) * opts.query_terms,
                       &used_words);
    std::set<int> topic_ids;
    for (const std::string& w : topic_pool) topic_ids.insert(token_id(w, opts.vocab_size));

    std::vector<std::string> noise_pool;
    while (noise_pool.size() < 200) {
        std::string w = make_word(rng);
        if (!used_words.insert(w).second) continue;
        if (topic_ids.count(token_id(w, opts.vocab_size))) continue;
        noise_pool.push_back(std::move(w));
    }

    SyntheticRanking out;
    int doc_counter = 0;
    for (int qi = 0; qi < opts.n_queries; ++qi) {
        const std::string qid = "q" + std::to_string(qi);
        std::vector<std::string> terms(topic_pool.begin() + qi * opts.query_terms,
                                       topic_pool.begin() + (qi + 1) * opts.query_terms);
        std::string query_text = terms[0];
        for (std::size_t t = 1; t < terms.size(); ++t) query_text += " " + terms[t];
        out.queries.emplace_back(qid, query_text);

        std::vector<std::string> candidate_ids;
        for (int ci = 0; ci < opts.candidates_per_query; ++ci) {
            const bool relevant = ci < opts.relevant_per_query;
            std::string text;
            for (int t = 0; t < opts.doc_tokens; ++t) {
                if (!text.empty()) text += ' ';
                if (relevant && rng() % 100 < 30) {
                    text += terms[rng() % terms.size()];
                } else {
                    text += noise_pool[rng() % noise_pool.size()];
                }
            }
            const std::string doc_id = "doc" + std::to_string(doc_counter++);
            out.corpus.push_back({doc_id, text});
            candidate_ids.push_back(doc_id);
            if (relevant) out.qrels[qid][doc_id] = 1;
        }
        std::shuffle(candidate_ids.begin(), candidate_ids.end(), rng);
        for (std::size_t rank = 0; rank < candidate_ids.size(); ++rank) {
            RunEntry e;
            e.query_id = qid;
            e.doc_id = candidate_ids[rank];
            e.rank = static_cast<int>(rank) + 1;
            e.score = 1.0 / static_cast<double>(rank + 1);
            e.tag = "synthetic-first-stage";
            out.candidates.push_back(std::move(e));
        }
    }
    return out;
}

std::vector<RawTextPair> make_synthetic_text_pairs(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::set<std::string> used_words;
    const std::vector<std::string> pool = make_word_pool(rng, 400, &used_words);
    auto sample_text = [&](int min_words, int max_words) {
        const int n = min_words + static_cast<int>(rng() % (max_words - min_words + 1));
        std::string text;
        for (int i = 0; i < n; ++i) {
            if (!text.empty()) text += ' ';
            text += pool[rng() % pool.size()];
        }
        return text;
    };

    const int n_docs = std::max(2, count / 2);
    std::vector<std::pair<std::string, std::string>> docs;
    docs.reserve(n_docs);
    for (int i = 0; i < n_docs; ++i) {
        docs.emplace_back(sample_text(2, 4), sample_text(10, 25));
    }

    std::vector<RawTextPair> pairs;
    pairs.reserve(count);
    for (int i = 0; i < count; ++i) {
        const std::size_t j = rng() % docs.size();
        RawTextPair p;
        p.matched = (i % 2) == 0;
        p.paragraph = docs[j].second;
        if (p.matched) {
            p.heading = docs[j].first;
        } else {
            std::size_t k = rng() % docs.size();
            if (k == j) k = (k + 1) % docs.size();
            p.heading = docs[k].first;
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace prerank
