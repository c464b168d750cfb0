#include "retkit/retrieve.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "retkit/common.hpp"
#include "retkit/rng.hpp"

namespace retkit::retrieve {

void assign_ranks(std::vector<SearchResult>& results) {
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = i + 1;
}

std::vector<std::string> mmr_rerank(const VecF& query, const std::vector<Candidate>& candidates,
                                    const MmrConfig& cfg) {
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0) {
        throw data_error("mmr_rerank: lambda must be in [0,1]");
    }
    if (candidates.empty()) return {};

    struct Item {
        std::size_t index;
        double relevance;
        double max_sim_selected;
        bool selected;
    };
    std::vector<Item> items;
    items.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double rel = static_cast<double>(candidates[i].vector.dot(query));
        items.push_back({i, rel, 0.0, false});
    }

    auto id_of = [&](const Item& it) -> const std::string& {
        return candidates[it.index].id;
    };

    std::vector<std::string> picked;
    std::size_t want = std::min(cfg.m, candidates.size());
    picked.reserve(want);

    const double redundancy_sign = cfg.additive_redundancy ? 1.0 : -1.0;
    while (picked.size() < want) {
        std::size_t best_idx = items.size();
        double best_score = 0.0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const Item& it = items[i];
            if (it.selected) continue;
            double score = picked.empty()
                               ? it.relevance
                               : cfg.lambda * it.relevance +
                                     redundancy_sign * (1.0 - cfg.lambda) * it.max_sim_selected;
            if (best_idx == items.size() || score > best_score ||
                (score == best_score && id_of(it) < id_of(items[best_idx]))) {
                best_idx = i;
                best_score = score;
            }
        }
        Item& chosen = items[best_idx];
        chosen.selected = true;
        picked.push_back(id_of(chosen));
        const VecF& chosen_vec = candidates[chosen.index].vector;
        for (auto& it : items) {
            if (it.selected) continue;
            double sim = static_cast<double>(candidates[it.index].vector.dot(chosen_vec));
            it.max_sim_selected = std::max(it.max_sim_selected, sim);
        }
    }
    return picked;
}

double compute_threshold(std::vector<double> scores) {
    if (scores.empty()) throw data_error("compute_threshold: no scores");
    std::sort(scores.begin(), scores.end());
    std::size_t n = scores.size();
    if (n % 2 == 1) return scores[n / 2];
    return 0.5 * (scores[n / 2 - 1] + scores[n / 2]);
}

std::vector<SearchResult> threshold_retrieve(const SearchResult& top1, double theta) {
    if (top1.relevance > theta) {
        SearchResult kept = top1;
        kept.rank = 1;
        return {kept};
    }
    return {};
}

std::vector<std::string> random_retrieve(const std::vector<std::string>& db_ids,
                                         std::size_t count, std::uint64_t seed) {
    std::vector<std::string> sorted = db_ids;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (count > sorted.size()) {
        throw data_error("random_retrieve: requested " + std::to_string(count) +
                         " from a database of " + std::to_string(sorted.size()));
    }
    SplitMix64 rng(seed);
    auto picks = sample_without_replacement(sorted.size(), count, rng);
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t idx : picks) out.push_back(sorted[idx]);
    return out;
}

std::vector<SearchResult> dedupe_target(
    std::vector<SearchResult> results, const std::vector<std::string>& target_tokens,
    const std::function<const std::vector<std::string>&(const std::string&)>& doc_tokens) {
    std::vector<SearchResult> kept;
    kept.reserve(results.size());
    for (auto& r : results) {
        if (doc_tokens(r.doc_id) == target_tokens) continue;
        kept.push_back(std::move(r));
    }
    assign_ranks(kept);
    return kept;
}

Bm25Index build_bm25_index(const std::vector<std::string>& doc_ids,
                           const std::vector<std::vector<std::string>>& doc_tokens) {
    if (doc_ids.size() != doc_tokens.size()) {
        throw data_error("build_bm25_index: id/token count mismatch");
    }
    Bm25Index index;
    index.doc_ids = doc_ids;
    index.doc_lengths.reserve(doc_ids.size());
    double total_length = 0.0;
    for (std::size_t d = 0; d < doc_tokens.size(); ++d) {
        std::unordered_map<std::string, std::uint32_t> tf;
        for (const auto& t : doc_tokens[d]) ++tf[t];
        for (auto& [term, count] : tf) {
            index.postings[term].push_back({static_cast<std::int32_t>(d), count});
        }
        double len = static_cast<double>(doc_tokens[d].size());
        index.doc_lengths.push_back(len);
        total_length += len;
    }
    index.avg_doc_length =
        doc_ids.empty() ? 0.0 : total_length / static_cast<double>(doc_ids.size());
    return index;
}

std::vector<SearchResult> bm25_search(const Bm25Index& index,
                                      const std::vector<std::string>& query_tokens,
                                      std::size_t k) {
    if (query_tokens.empty()) return {};
    std::vector<std::string> terms = query_tokens;
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    const double n_docs = static_cast<double>(index.doc_ids.size());
    std::unordered_map<std::int32_t, double> scores;
    for (const auto& term : terms) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        const auto& posting_list = it->second;
        double nt = static_cast<double>(posting_list.size());
        double idf = std::log((n_docs - nt + 0.5) / (nt + 0.5) + 1.0);
        for (const auto& posting : posting_list) {
            double tf = static_cast<double>(posting.tf);
            double len_norm = index.avg_doc_length > 0.0
                                  ? index.doc_lengths[static_cast<std::size_t>(posting.doc)] /
                                        index.avg_doc_length
                                  : 1.0;
            double denom = tf + index.k1 * (1.0 - index.b + index.b * len_norm);
            scores[posting.doc] += idf * tf * (index.k1 + 1.0) / denom;
        }
    }

    std::vector<SearchResult> results;
    results.reserve(scores.size());
    for (const auto& [doc, score] : scores) {
        results.push_back({index.doc_ids[static_cast<std::size_t>(doc)], score, 0});
    }
    std::sort(results.begin(), results.end(), [](const SearchResult& a, const SearchResult& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        return a.doc_id < b.doc_id;
    });
    if (results.size() > k) results.resize(k);
    assign_ranks(results);
    return results;
}

}  // namespace retkit::retrieve
