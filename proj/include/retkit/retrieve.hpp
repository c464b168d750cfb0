#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace retkit::retrieve {

using VecF = Eigen::VectorXf;

struct SearchResult {
    std::string doc_id;
    double relevance = 0.0;  // cosine q.d on unit vectors, or BM25 score
    std::size_t rank = 0;    // 1-based, no gaps
};

void assign_ranks(std::vector<SearchResult>& results);

struct MmrConfig {
    double lambda = 0.5;
    std::size_t m = 10;               // number of documents to select
    std::size_t candidate_pool = 100; // cosine top-N candidates fed to MMR
    // The published formula adds the redundancy term, which would reward
    // near-duplicates; the standard subtractive form is the default and the
    // additive variant stays available for literal replication.
    bool additive_redundancy = false;
};

struct Candidate {
    std::string id;
    VecF vector;  // unit norm
};

// Greedy maximal-marginal-relevance selection. First pick is the highest
// relevance; each later pick maximizes
//   lambda*(d.q) - (1-lambda)*max_{s in selected} (d.s)
// with ties broken by id ascending. lambda = 1 reduces to cosine top-m.
std::vector<std::string> mmr_rerank(const VecF& query, const std::vector<Candidate>& candidates,
                                    const MmrConfig& cfg);

// Median of top-1 retrieval scores over the training queries (even count:
// mean of the two middle values).
double compute_threshold(std::vector<double> scores);

// Keeps the top-1 result only if its relevance strictly exceeds theta.
std::vector<SearchResult> threshold_retrieve(const SearchResult& top1, double theta);

// Uniform sample of `count` ids without replacement, deterministic by seed.
// The id set is canonicalized by sorting so the draw depends only on
// (set, count, seed).
std::vector<std::string> random_retrieve(const std::vector<std::string>& db_ids,
                                         std::size_t count, std::uint64_t seed);

// Removes results whose document has exactly the target's filter-mode token
// sequence (training-time guard against retrieving the target itself).
std::vector<SearchResult> dedupe_target(
    std::vector<SearchResult> results, const std::vector<std::string>& target_tokens,
    const std::function<const std::vector<std::string>&(const std::string&)>& doc_tokens);

// ---------------------------------------------------------------------------
// BM25 lexical baseline over filter-mode document tokens.
// ---------------------------------------------------------------------------

struct Bm25Index {
    struct Posting {
        std::int32_t doc = 0;
        std::uint32_t tf = 0;
    };
    std::vector<std::string> doc_ids;
    std::vector<double> doc_lengths;
    double avg_doc_length = 0.0;
    double k1 = 1.2;
    double b = 0.75;
    std::unordered_map<std::string, std::vector<Posting>> postings;
};

Bm25Index build_bm25_index(const std::vector<std::string>& doc_ids,
                           const std::vector<std::vector<std::string>>& doc_tokens);

// Okapi BM25 with IDF = ln((N - n_t + 0.5)/(n_t + 0.5) + 1); each distinct
// query term contributes once. Top-k by score, ties by id ascending.
std::vector<SearchResult> bm25_search(const Bm25Index& index,
                                      const std::vector<std::string>& query_tokens,
                                      std::size_t k);

}  // namespace retkit::retrieve
