#include "retkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "retkit/common.hpp"

namespace retkit::eval {

double mrr(const std::map<std::string, std::vector<std::string>>& rankings,
           const std::unordered_map<std::string, std::string>& gold) {
    if (rankings.empty()) throw data_error("mrr: no rankings");
    double total = 0.0;
    for (const auto& [query_id, ranking] : rankings) {
        auto it = gold.find(query_id);
        if (it == gold.end()) throw data_error("mrr: no gold mapping for query " + query_id);
        double rr = 0.0;
        for (std::size_t r = 0; r < ranking.size(); ++r) {
            if (ranking[r] == it->second) {
                rr = 1.0 / static_cast<double>(r + 1);
                break;
            }
        }
        total += rr;
    }
    return total / static_cast<double>(rankings.size());
}

double ndcg(const std::vector<std::string>& ranking,
            const std::vector<RelevanceJudgment>& judgments, std::size_t k) {
    std::unordered_map<std::string, double> gains;
    std::vector<double> positive_gains;
    for (const auto& j : judgments) {
        if (gains.count(j.doc_id)) throw data_error("ndcg: duplicate judgment for " + j.doc_id);
        gains[j.doc_id] = j.gain;
        if (j.gain > 0.0) positive_gains.push_back(j.gain);
    }
    if (positive_gains.empty()) throw data_error("ndcg: no positive judgments");

    double dcg = 0.0;
    std::size_t limit = std::min(k, ranking.size());
    for (std::size_t r = 0; r < limit; ++r) {
        auto it = gains.find(ranking[r]);
        if (it != gains.end() && it->second > 0.0) {
            dcg += it->second / std::log2(static_cast<double>(r) + 2.0);
        }
    }
    std::sort(positive_gains.begin(), positive_gains.end(), std::greater<double>());
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, positive_gains.size()); ++r) {
        idcg += positive_gains[r] / std::log2(static_cast<double>(r) + 2.0);
    }
    return dcg / idcg;
}

namespace {

// n-gram multiset keyed by joined tokens (unit separator avoids collisions).
std::unordered_map<std::string, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            if (j) key.push_back('\x1f');
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double bleu4(const std::vector<std::string>& hyp_tokens,
             const std::vector<std::string>& ref_tokens) {
    if (ref_tokens.empty()) throw data_error("bleu4: empty reference");
    if (hyp_tokens.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        auto hyp_ngrams = ngram_counts(hyp_tokens, n);
        auto ref_ngrams = ngram_counts(ref_tokens, n);
        std::size_t matched = 0;
        std::size_t total = hyp_tokens.size() >= n ? hyp_tokens.size() - n + 1 : 0;
        for (const auto& [gram, count] : hyp_ngrams) {
            auto it = ref_ngrams.find(gram);
            if (it != ref_ngrams.end()) matched += std::min(count, it->second);
        }
        double p;
        if (n == 1) {
            if (matched == 0) return 0.0;
            p = static_cast<double>(matched) / static_cast<double>(total);
        } else {
            p = (static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0);
        }
        log_sum += 0.25 * std::log(p);
    }
    double bp = hyp_tokens.size() >= ref_tokens.size()
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(ref_tokens.size()) /
                                         static_cast<double>(hyp_tokens.size()));
    return bp * std::exp(log_sum);
}

EditDistance token_edit_distance(const std::vector<std::string>& hyp_tokens,
                                 const std::vector<std::string>& ref_tokens) {
    const std::size_t n = hyp_tokens.size();
    const std::size_t m = ref_tokens.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t sub = prev[j - 1] + (hyp_tokens[i - 1] == ref_tokens[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    EditDistance out;
    out.raw = prev[m];
    out.normalized = static_cast<double>(out.raw) /
                     static_cast<double>(std::max<std::size_t>(m, 1));
    return out;
}

double ann_recall(const std::map<std::string, std::vector<std::string>>& approx,
                  const std::map<std::string, std::vector<std::string>>& exact,
                  std::size_t k) {
    if (approx.size() != exact.size()) throw data_error("ann_recall: query set mismatch");
    if (approx.empty()) throw data_error("ann_recall: no queries");
    double total = 0.0;
    for (const auto& [query_id, approx_ranking] : approx) {
        auto it = exact.find(query_id);
        if (it == exact.end()) throw data_error("ann_recall: query " + query_id +
                                                " missing from exact rankings");
        std::unordered_set<std::string> exact_top;
        for (std::size_t r = 0; r < std::min(k, it->second.size()); ++r) {
            exact_top.insert(it->second[r]);
        }
        std::size_t hit = 0;
        for (std::size_t r = 0; r < std::min(k, approx_ranking.size()); ++r) {
            if (exact_top.count(approx_ranking[r])) ++hit;
        }
        total += static_cast<double>(hit) / static_cast<double>(k);
    }
    return total / static_cast<double>(approx.size());
}

std::string render_report(const EvalReport& report) {
    std::ostringstream out;
    out << "# evalreport v1\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s %8s %8s %10s %10s %10s %10s %9s\n", "mode", "mrr",
                  "ndcg", "bleu4_bpe", "bleu4_word", "edist_norm", "edist_raw", "n_queries");
    out << buf;
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-12s %8.4f %8.4f %10.4f %10.4f %10.4f %10.4f %9zu\n",
                      row.mode.c_str(), row.mrr, row.ndcg, row.bleu4_bpe, row.bleu4_word,
                      row.edit_distance_mean, row.edit_distance_raw_mean, row.n_queries);
        out << buf;
    }
    return out.str();
}

void save_report(const EvalReport& report, const std::string& table_path,
                 const std::string& jsonl_path) {
    write_text_file(table_path, render_report(report));
    std::ostringstream out;
    out << nlohmann::json{{"format", "evalreport v1"}, {"count", report.rows.size()}}.dump()
        << "\n";
    for (const auto& row : report.rows) {
        out << nlohmann::json{{"mode", row.mode},
                              {"mrr", row.mrr},
                              {"ndcg", row.ndcg},
                              {"bleu4_bpe", row.bleu4_bpe},
                              {"bleu4_word", row.bleu4_word},
                              {"edit_distance_mean", row.edit_distance_mean},
                              {"edit_distance_raw_mean", row.edit_distance_raw_mean},
                              {"n_queries", row.n_queries}}
                   .dump()
            << "\n";
    }
    write_text_file(jsonl_path, out.str());
}

}  // namespace retkit::eval
