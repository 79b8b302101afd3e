#pragma once

#include <map>
#include <string>
#include <vector>

namespace prerank {

// One line of the 6-column run format: "qid Q0 docid rank score tag".
struct RunEntry {
    std::string query_id;
    std::string doc_id;
    int rank = 0;
    double score = 0.0;
    std::string tag;
};

using RunFile = std::vector<RunEntry>;

// Validates per-query invariants: ranks 1..k without gaps, scores
// non-increasing with rank.
RunFile read_run_file(const std::string& path);
RunFile parse_run_file(const std::string& text);
std::string format_run_file(const RunFile& run);
void write_run_file(const std::string& path, const RunFile& run);

// Entries grouped by query id, rank order preserved; group order follows first
// appearance in the file.
std::vector<std::pair<std::string, std::vector<RunEntry>>> run_by_query(const RunFile& run);

// qid -> docid -> relevance grade. Accepts the 4-column TREC layout
// (qid iter docid grade) and the 3-column TSV (qid docid grade).
using Qrels = std::map<std::string, std::map<std::string, int>>;
Qrels read_qrels(const std::string& path);
Qrels parse_qrels(const std::string& text);

double precision_at_k(const std::vector<std::string>& ranked_docs,
                      const std::map<std::string, int>& grades, int k);
// DCG with (2^grade - 1) gains and log2(rank + 1) discounts.
double ndcg_at_k(const std::vector<std::string>& ranked_docs,
                 const std::map<std::string, int>& grades, int k);

// Mean metric over queries present in the run; queries absent from the qrels
// count as zero relevance.
double mean_precision_at_k(const RunFile& run, const Qrels& qrels, int k);
double mean_ndcg_at_k(const RunFile& run, const Qrels& qrels, int k);

}  // namespace prerank
