#include "retkit/sofa.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "retkit/common.hpp"
#include "retkit/tokenize.hpp"

namespace retkit::sofa {

using nlohmann::json;

namespace {
constexpr char kBigramSep = '\x1f';
}

FeatureSet featurize(const std::string& code) {
    FeatureSet fs;
    auto tokens = tok::tokenize_code(code, {tok::CodeTokenMode::subtoken, true});
    for (const auto& t : tokens) {
        ++fs.counts[t];
        ++fs.total;
    }
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        ++fs.counts[tokens[i] + kBigramSep + tokens[i + 1]];
        ++fs.total;
    }
    return fs;
}

double aroma_similarity(const FeatureSet& query_features,
                        const FeatureSet& candidate_features) {
    if (query_features.empty()) throw data_error("aroma_similarity: empty query features");
    std::uint64_t overlap = 0;
    for (const auto& [feature, count] : query_features.counts) {
        auto it = candidate_features.counts.find(feature);
        if (it != candidate_features.counts.end()) {
            overlap += std::min(count, it->second);
        }
    }
    return static_cast<double>(overlap) / static_cast<double>(query_features.total);
}

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::unreviewed: return "unreviewed";
        case Verdict::kept: return "kept";
        case Verdict::discarded: return "discarded";
    }
    throw internal_error("unknown verdict");
}

Verdict verdict_from_name(const std::string& name) {
    if (name == "unreviewed") return Verdict::unreviewed;
    if (name == "kept") return Verdict::kept;
    if (name == "discarded") return Verdict::discarded;
    throw data_error("unknown verdict: " + name);
}

namespace {

struct RankedIntent {
    const corpus::IntentSnippetRecord* record;
    FeatureSet features;
};

// Confidence-ranked prefix of the intents, with snippet features.
std::vector<RankedIntent> ranked_intents(
    const std::vector<corpus::IntentSnippetRecord>& intents, std::size_t top_n) {
    std::vector<const corpus::IntentSnippetRecord*> sorted;
    sorted.reserve(intents.size());
    for (const auto& r : intents) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->confidence != b->confidence) return a->confidence > b->confidence;
        if (a->question_id != b->question_id) return a->question_id < b->question_id;
        return a->id < b->id;
    });
    if (sorted.size() > top_n) sorted.resize(top_n);
    std::vector<RankedIntent> out;
    out.reserve(sorted.size());
    for (const auto* r : sorted) out.push_back({r, featurize(r->snippet)});
    return out;
}

std::string function_text(const corpus::FunctionRecord& f) {
    return f.signature + "\n" + f.docstring + "\n" + f.body;
}

struct Neighbor {
    double similarity;
    std::size_t function_index;
};

// Keeps the top `neighbors` by (similarity desc, function_id asc).
std::vector<Neighbor> top_neighbors(std::vector<Neighbor> scored,
                                    const std::vector<corpus::FunctionRecord>& functions,
                                    std::size_t neighbors) {
    std::sort(scored.begin(), scored.end(), [&](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return functions[a.function_index].id < functions[b.function_index].id;
    });
    if (scored.size() > neighbors) scored.resize(neighbors);
    return scored;
}

std::vector<SofaPair> assemble_pairs(
    const std::vector<RankedIntent>& intents,
    const std::vector<std::vector<Neighbor>>& per_intent,
    const std::vector<corpus::FunctionRecord>& functions) {
    std::vector<SofaPair> pairs;
    for (std::size_t i = 0; i < intents.size(); ++i) {
        for (const auto& nb : per_intent[i]) {
            pairs.push_back({functions[nb.function_index].id, intents[i].record->id,
                             nb.similarity, Verdict::unreviewed});
        }
    }
    return pairs;
}

}  // namespace

std::vector<SofaPair> build_sofa_brute_force(
    const std::vector<corpus::IntentSnippetRecord>& intents,
    const std::vector<corpus::FunctionRecord>& functions, std::size_t top_n,
    std::size_t neighbors) {
    auto ranked = ranked_intents(intents, top_n);
    std::vector<FeatureSet> function_features;
    function_features.reserve(functions.size());
    for (const auto& f : functions) function_features.push_back(featurize(function_text(f)));

    std::vector<std::vector<Neighbor>> per_intent(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i].features.empty()) continue;
        std::vector<Neighbor> scored;
        scored.reserve(functions.size());
        for (std::size_t fidx = 0; fidx < functions.size(); ++fidx) {
            scored.push_back({aroma_similarity(ranked[i].features, function_features[fidx]),
                              fidx});
        }
        per_intent[i] = top_neighbors(std::move(scored), functions, neighbors);
    }
    return assemble_pairs(ranked, per_intent, functions);
}

std::vector<SofaPair> build_sofa(const std::vector<corpus::IntentSnippetRecord>& intents,
                                 const std::vector<corpus::FunctionRecord>& functions,
                                 std::size_t top_n, std::size_t neighbors,
                                 std::size_t threads) {
    auto ranked = ranked_intents(intents, top_n);

    std::vector<FeatureSet> function_features;
    function_features.reserve(functions.size());
    for (const auto& f : functions) function_features.push_back(featurize(function_text(f)));

    // Inverted feature index: functions sharing no feature with a snippet
    // score exactly zero, so only posting-list candidates need scoring.
    std::unordered_map<std::string, std::vector<std::uint32_t>> feature_to_functions;
    for (std::size_t fidx = 0; fidx < functions.size(); ++fidx) {
        for (const auto& [feature, _] : function_features[fidx].counts) {
            feature_to_functions[feature].push_back(static_cast<std::uint32_t>(fidx));
        }
    }

    // Zero-similarity filler, ordered as the brute force would order it.
    std::vector<std::size_t> by_id(functions.size());
    for (std::size_t i = 0; i < by_id.size(); ++i) by_id[i] = i;
    std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) {
        return functions[a].id < functions[b].id;
    });

    std::vector<std::vector<Neighbor>> per_intent(ranked.size());
    auto score_intent = [&](std::size_t i) {
        if (ranked[i].features.empty()) return;
        std::vector<char> is_candidate(functions.size(), 0);
        std::vector<std::uint32_t> candidate_rows;
        for (const auto& [feature, _] : ranked[i].features.counts) {
            auto it = feature_to_functions.find(feature);
            if (it == feature_to_functions.end()) continue;
            for (std::uint32_t fidx : it->second) {
                if (!is_candidate[fidx]) {
                    is_candidate[fidx] = 1;
                    candidate_rows.push_back(fidx);
                }
            }
        }
        std::vector<Neighbor> scored;
        scored.reserve(candidate_rows.size());
        for (std::uint32_t fidx : candidate_rows) {
            scored.push_back(
                {aroma_similarity(ranked[i].features, function_features[fidx]), fidx});
        }
        auto top = top_neighbors(std::move(scored), functions, neighbors);
        // brute force fills remaining slots with zero-similarity functions in
        // id order; reproduce that exactly
        for (std::size_t k = 0; top.size() < std::min(neighbors, functions.size()); ++k) {
            std::size_t fidx = by_id[k];
            if (!is_candidate[fidx]) top.push_back({0.0, fidx});
        }
        per_intent[i] = std::move(top);
    };

    std::size_t n_workers = std::max<std::size_t>(1, std::min(threads, ranked.size()));
    if (n_workers <= 1) {
        for (std::size_t i = 0; i < ranked.size(); ++i) score_intent(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < ranked.size();
                     i = next.fetch_add(1)) {
                    score_intent(i);
                }
            });
        }
        for (auto& worker : workers) worker.join();
    }
    return assemble_pairs(ranked, per_intent, functions);
}

CurationOutcome apply_curation(std::vector<SofaPair> pairs,
                               const std::vector<VerdictEntry>& verdicts) {
    std::unordered_map<std::string, std::size_t> by_key;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        by_key[pairs[i].function_id + "\t" + pairs[i].intent_snippet_id] = i;
    }
    CurationOutcome out;
    for (const auto& v : verdicts) {
        auto it = by_key.find(v.function_id + "\t" + v.intent_snippet_id);
        if (it == by_key.end()) {
            ++out.unknown_keys;
            continue;
        }
        pairs[it->second].curated_verdict = v.verdict;
        ++out.applied;
    }
    out.pairs = std::move(pairs);
    return out;
}

std::vector<SofaPair> curated_subset(const std::vector<SofaPair>& pairs) {
    std::vector<SofaPair> kept;
    for (const auto& p : pairs) {
        if (p.curated_verdict != Verdict::discarded) kept.push_back(p);
    }
    return kept;
}

void save_pairs(const std::vector<SofaPair>& pairs, const std::string& path) {
    std::ostringstream out;
    out << json{{"format", "sofapair v1"}, {"count", pairs.size()}}.dump() << "\n";
    for (const auto& p : pairs) {
        out << json{{"function_id", p.function_id},
                    {"intent_snippet_id", p.intent_snippet_id},
                    {"similarity", p.similarity},
                    {"curated_verdict", verdict_name(p.curated_verdict)}}
                   .dump()
            << "\n";
    }
    write_text_file(path, out.str());
}

std::vector<SofaPair> load_pairs(const std::string& path) {
    auto lines = split_lines(read_text_file(path));
    if (lines.empty()) throw data_error("empty pair file: " + path);
    json header = json::parse(lines[0], nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "sofapair v1") {
        throw data_error("not a SOFA pair file: " + path);
    }
    std::vector<SofaPair> pairs;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        json obj = json::parse(lines[i]);
        pairs.push_back({obj.at("function_id").get<std::string>(),
                         obj.at("intent_snippet_id").get<std::string>(),
                         obj.at("similarity").get<double>(),
                         verdict_from_name(obj.value("curated_verdict", "unreviewed"))});
    }
    return pairs;
}

std::vector<VerdictEntry> load_verdicts(const std::string& path) {
    std::vector<VerdictEntry> verdicts;
    for (const auto& line : split_lines(read_text_file(path))) {
        if (trim(line).empty() || line[0] == '#') continue;
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw data_error("bad verdict line: " + line);
        VerdictEntry v;
        v.function_id = line.substr(0, t1);
        v.intent_snippet_id = line.substr(t1 + 1, t2 - t1 - 1);
        v.verdict = verdict_from_name(trim(line.substr(t2 + 1)));
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

}  // namespace retkit::sofa
