#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace retkit::eval {

struct RelevanceJudgment {
    std::string query_id;
    std::string doc_id;
    double gain = 1.0;
};

// Mean reciprocal rank of the gold document (0 when absent from a ranking).
// Every ranked query must have a gold mapping.
double mrr(const std::map<std::string, std::vector<std::string>>& rankings,
           const std::unordered_map<std::string, std::string>& gold);

// DCG@k with gain/log2(rank+1), normalized by the ideal DCG over the
// judgment set. Call sites skip queries with no positive judgment.
double ndcg(const std::vector<std::string>& ranking,
            const std::vector<RelevanceJudgment>& judgments, std::size_t k);

enum class BleuLevel { bpe, word };

// Sentence BLEU-4: uniform 1..4-gram weights, brevity penalty, add-one
// smoothing on the n>=2 precisions; zero unigram precision scores 0.
double bleu4(const std::vector<std::string>& hyp_tokens,
             const std::vector<std::string>& ref_tokens);

struct EditDistance {
    std::size_t raw = 0;
    double normalized = 0.0;  // raw / max(|ref|, 1)
};

// Levenshtein distance with unit insert/delete/substitute costs.
EditDistance token_edit_distance(const std::vector<std::string>& hyp_tokens,
                                 const std::vector<std::string>& ref_tokens);

// Mean over queries of |top-k(approx) ∩ top-k(exact)| / k.
double ann_recall(const std::map<std::string, std::vector<std::string>>& approx,
                  const std::map<std::string, std::vector<std::string>>& exact,
                  std::size_t k);

struct EvalRow {
    std::string mode;
    double mrr = 0.0;
    double ndcg = 0.0;
    double bleu4_bpe = 0.0;
    double bleu4_word = 0.0;
    double edit_distance_mean = 0.0;       // normalized by reference length
    double edit_distance_raw_mean = 0.0;
    std::size_t n_queries = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
};

// Aligned text table plus a machine-readable line-delimited twin.
std::string render_report(const EvalReport& report);
void save_report(const EvalReport& report, const std::string& table_path,
                 const std::string& jsonl_path);

}  // namespace retkit::eval
