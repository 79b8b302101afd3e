#include "prerank/run_file.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "prerank/binio.hpp"
#include "prerank/errors.hpp"

namespace prerank {

namespace {

void validate_run(const RunFile& run) {
    std::map<std::string, std::pair<int, double>> last;  // qid -> (rank, score)
    for (const RunEntry& e : run) {
        auto it = last.find(e.query_id);
        if (it == last.end()) {
            if (e.rank != 1) {
                throw input_error("run file: query " + e.query_id + " does not start at rank 1");
            }
        } else {
            if (e.rank != it->second.first + 1) {
                throw input_error("run file: query " + e.query_id + " has a rank gap at " +
                                  std::to_string(e.rank));
            }
            if (e.score > it->second.second) {
                throw input_error("run file: query " + e.query_id +
                                  " has increasing score at rank " + std::to_string(e.rank));
            }
        }
        last[e.query_id] = {e.rank, e.score};
    }
}

}  // namespace

RunFile parse_run_file(const std::string& text) {
    RunFile run;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        RunEntry e;
        std::string q0;
        if (!(ls >> e.query_id >> q0 >> e.doc_id >> e.rank >> e.score >> e.tag)) {
            throw input_error("run file: malformed line " + std::to_string(line_no));
        }
        run.push_back(std::move(e));
    }
    validate_run(run);
    return run;
}

RunFile read_run_file(const std::string& path) { return parse_run_file(read_file_bytes(path)); }

std::string format_run_file(const RunFile& run) {
    validate_run(run);
    std::string out;
    char buf[64];
    for (const RunEntry& e : run) {
        std::snprintf(buf, sizeof(buf), "%.6f", e.score);
        out += e.query_id;
        out += " Q0 ";
        out += e.doc_id;
        out += ' ';
        out += std::to_string(e.rank);
        out += ' ';
        out += buf;
        out += ' ';
        out += e.tag;
        out += '\n';
    }
    return out;
}

void write_run_file(const std::string& path, const RunFile& run) {
    write_file_bytes(path, format_run_file(run));
}

std::vector<std::pair<std::string, std::vector<RunEntry>>> run_by_query(const RunFile& run) {
    std::vector<std::pair<std::string, std::vector<RunEntry>>> groups;
    std::map<std::string, std::size_t> index;
    for (const RunEntry& e : run) {
        auto it = index.find(e.query_id);
        if (it == index.end()) {
            index.emplace(e.query_id, groups.size());
            groups.push_back({e.query_id, {e}});
        } else {
            groups[it->second].second.push_back(e);
        }
    }
    return groups;
}

Qrels parse_qrels(const std::string& text) {
    Qrels qrels;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<std::string> cols;
        std::string col;
        while (ls >> col) cols.push_back(col);
        if (cols.size() != 3 && cols.size() != 4) {
            throw input_error("qrels: malformed line " + std::to_string(line_no));
        }
        const std::string& qid = cols[0];
        const std::string& docid = cols.size() == 4 ? cols[2] : cols[1];
        const std::string& grade_str = cols.back();
        try {
            qrels[qid][docid] = std::stoi(grade_str);
        } catch (const std::exception&) {
            throw input_error("qrels: bad grade on line " + std::to_string(line_no));
        }
    }
    return qrels;
}

Qrels read_qrels(const std::string& path) { return parse_qrels(read_file_bytes(path)); }

double precision_at_k(const std::vector<std::string>& ranked_docs,
                      const std::map<std::string, int>& grades, int k) {
    if (k <= 0) throw input_error("precision_at_k: k must be positive");
    int hits = 0;
    const int cutoff = std::min<int>(k, static_cast<int>(ranked_docs.size()));
    for (int i = 0; i < cutoff; ++i) {
        auto it = grades.find(ranked_docs[i]);
        if (it != grades.end() && it->second > 0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

double ndcg_at_k(const std::vector<std::string>& ranked_docs,
                 const std::map<std::string, int>& grades, int k) {
    if (k <= 0) throw input_error("ndcg_at_k: k must be positive");
    auto gain = [](int grade) { return std::pow(2.0, grade) - 1.0; };
    double dcg = 0.0;
    const int cutoff = std::min<int>(k, static_cast<int>(ranked_docs.size()));
    for (int i = 0; i < cutoff; ++i) {
        auto it = grades.find(ranked_docs[i]);
        if (it != grades.end() && it->second > 0) {
            dcg += gain(it->second) / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    std::vector<int> ideal;
    for (const auto& [doc, grade] : grades) {
        if (grade > 0) ideal.push_back(grade);
    }
    std::sort(ideal.rbegin(), ideal.rend());
    double idcg = 0.0;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(ideal.size())); ++i) {
        idcg += gain(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
    }
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

namespace {

template <typename MetricFn>
double mean_metric(const RunFile& run, const Qrels& qrels, int k, const MetricFn& fn) {
    const auto groups = run_by_query(run);
    if (groups.empty()) return 0.0;
    static const std::map<std::string, int> kEmpty;
    double sum = 0.0;
    for (const auto& [qid, entries] : groups) {
        std::vector<std::string> docs;
        docs.reserve(entries.size());
        for (const RunEntry& e : entries) docs.push_back(e.doc_id);
        auto it = qrels.find(qid);
        sum += fn(docs, it == qrels.end() ? kEmpty : it->second, k);
    }
    return sum / static_cast<double>(groups.size());
}

}  // namespace

double mean_precision_at_k(const RunFile& run, const Qrels& qrels, int k) {
    return mean_metric(run, qrels, k, precision_at_k);
}

double mean_ndcg_at_k(const RunFile& run, const Qrels& qrels, int k) {
    return mean_metric(run, qrels, k, ndcg_at_k);
}

}  // namespace prerank
