#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "retkit/corpus.hpp"

namespace retkit::sofa {

// Multiset of token unigrams and adjacent bigrams from subtoken-mode
// tokenization. Bigram features join their parts with a unit separator so
// they can never collide with unigrams.
struct FeatureSet {
    std::unordered_map<std::string, std::uint32_t> counts;
    std::size_t total = 0;

    bool empty() const { return total == 0; }
};

FeatureSet featurize(const std::string& code);

// Containment ratio |query ∩ candidate| / |query| with per-feature min
// counts. Asymmetric: the query side is the (short) snippet.
double aroma_similarity(const FeatureSet& query_features, const FeatureSet& candidate_features);

enum class Verdict { unreviewed, kept, discarded };

std::string verdict_name(Verdict v);
Verdict verdict_from_name(const std::string& name);

struct SofaPair {
    std::string function_id;
    std::string intent_snippet_id;
    double similarity = 0.0;
    Verdict curated_verdict = Verdict::unreviewed;
};

// Ranks intents by confidence, keeps top_n, and pairs each with its
// `neighbors` most similar functions (ties by function_id ascending).
// Output is sorted by (intent confidence desc, similarity desc) and is
// exactly the brute-force result; an inverted feature index only prunes
// functions that share no feature with the snippet.
std::vector<SofaPair> build_sofa(const std::vector<corpus::IntentSnippetRecord>& intents,
                                 const std::vector<corpus::FunctionRecord>& functions,
                                 std::size_t top_n = 10000, std::size_t neighbors = 15,
                                 std::size_t threads = 1);

// Reference implementation used to cross-check the pruned path exactly.
std::vector<SofaPair> build_sofa_brute_force(
    const std::vector<corpus::IntentSnippetRecord>& intents,
    const std::vector<corpus::FunctionRecord>& functions, std::size_t top_n = 10000,
    std::size_t neighbors = 15);

struct CurationOutcome {
    std::vector<SofaPair> pairs;
    std::size_t applied = 0;
    std::size_t unknown_keys = 0;
};

struct VerdictEntry {
    std::string function_id;
    std::string intent_snippet_id;
    Verdict verdict = Verdict::kept;
};

// Applies explicit verdicts to pairs; unknown keys are tallied, everything
// else stays unreviewed.
CurationOutcome apply_curation(std::vector<SofaPair> pairs,
                               const std::vector<VerdictEntry>& verdicts);

// Line-delimited pair file with a header line; verdict file is
// "<function_id>\t<intent_snippet_id>\t{kept|discarded}" per line.
void save_pairs(const std::vector<SofaPair>& pairs, const std::string& path);
std::vector<SofaPair> load_pairs(const std::string& path);
std::vector<VerdictEntry> load_verdicts(const std::string& path);

// Pairs that survive curation (everything not discarded).
std::vector<SofaPair> curated_subset(const std::vector<SofaPair>& pairs);

}  // namespace retkit::sofa
