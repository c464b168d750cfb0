#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "retkit/common.hpp"
#include "retkit/retrieve.hpp"
#include "retkit/rng.hpp"
#include "support.hpp"

using namespace retkit;
using namespace retkit::retrieve;
using Catch::Matchers::WithinAbs;

namespace {

// Unit vectors in 4-D realizing the hand-derived MMR fixture:
// q.d1=0.9, q.d2=0.85, q.d3=0.5, d1.d2=0.95, d1.d3=0.1.
struct MmrFixture {
    VecF q{4};
    std::vector<Candidate> candidates;

    MmrFixture() {
        q << 1.0f, 0.0f, 0.0f, 0.0f;
        VecF d1(4), d2(4), d3(4);
        double y1 = std::sqrt(1.0 - 0.81);
        d1 << 0.9f, static_cast<float>(y1), 0.0f, 0.0f;
        double y2 = (0.95 - 0.9 * 0.85) / y1;
        double z2 = std::sqrt(1.0 - 0.85 * 0.85 - y2 * y2);
        d2 << 0.85f, static_cast<float>(y2), static_cast<float>(z2), 0.0f;
        double y3 = (0.1 - 0.9 * 0.5) / y1;
        double w3 = std::sqrt(1.0 - 0.25 - y3 * y3);
        d3 << 0.5f, static_cast<float>(y3), 0.0f, static_cast<float>(w3);
        candidates = {{"d1", d1}, {"d2", d2}, {"d3", d3}};
    }
};

std::vector<Candidate> random_candidates(std::size_t n, std::size_t dim,
                                         std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "c%04zu", i);
        out.push_back({buf, testsupport::random_unit_vector(dim, rng)});
    }
    return out;
}

}  // namespace

TEST_CASE("mmr fixture realizes the intended relevances and similarities") {
    MmrFixture fx;
    CHECK_THAT(fx.candidates[0].vector.dot(fx.q), WithinAbs(0.9, 1e-6));
    CHECK_THAT(fx.candidates[1].vector.dot(fx.q), WithinAbs(0.85, 1e-6));
    CHECK_THAT(fx.candidates[2].vector.dot(fx.q), WithinAbs(0.5, 1e-6));
    CHECK_THAT(fx.candidates[1].vector.dot(fx.candidates[0].vector), WithinAbs(0.95, 1e-6));
    CHECK_THAT(fx.candidates[2].vector.dot(fx.candidates[0].vector), WithinAbs(0.1, 1e-6));
}

TEST_CASE("mmr at lambda 0.5 reorders the redundant document last") {
    MmrFixture fx;
    MmrConfig cfg;
    cfg.lambda = 0.5;
    cfg.m = 3;
    cfg.candidate_pool = 3;
    auto picked = mmr_rerank(fx.q, fx.candidates, cfg);
    // d2's marginal (0.5*0.85 - 0.5*0.95 = -0.05) loses to d3's (0.2)
    CHECK(picked == std::vector<std::string>{"d1", "d3", "d2"});
}

TEST_CASE("mmr at lambda 1 equals cosine top-m ordering") {
    MmrFixture fx;
    MmrConfig cfg;
    cfg.lambda = 1.0;
    cfg.m = 3;
    auto picked = mmr_rerank(fx.q, fx.candidates, cfg);
    CHECK(picked == std::vector<std::string>{"d1", "d2", "d3"});

    SplitMix64 rng(5);
    for (int iter = 0; iter < 10; ++iter) {
        auto candidates = random_candidates(30, 8, 100 + iter);
        VecF q = testsupport::random_unit_vector(8, rng);
        cfg.m = 10;
        auto mmr_order = mmr_rerank(q, candidates, cfg);
        // reference ordering: relevance desc, id asc
        std::vector<std::pair<double, std::string>> rel;
        for (const auto& c : candidates) {
            rel.emplace_back(-static_cast<double>(c.vector.dot(q)), c.id);
        }
        std::sort(rel.begin(), rel.end());
        std::vector<std::string> expected;
        for (std::size_t i = 0; i < cfg.m; ++i) expected.push_back(rel[i].second);
        CHECK(mmr_order == expected);
    }
}

TEST_CASE("the additive redundancy variant rewards the near-duplicate") {
    MmrFixture fx;
    MmrConfig cfg;
    cfg.lambda = 0.5;
    cfg.m = 3;
    cfg.additive_redundancy = true;
    auto picked = mmr_rerank(fx.q, fx.candidates, cfg);
    // the published formula with '+' keeps the redundant d2 second
    CHECK(picked == std::vector<std::string>{"d1", "d2", "d3"});
}

TEST_CASE("an exact duplicate is never selected second ahead of fresh content") {
    VecF q(3);
    q << 1, 0, 0;
    VecF a(3), other(3);
    a << 0.95f, static_cast<float>(std::sqrt(1.0 - 0.95 * 0.95)), 0;
    other << 0.6f, 0, 0.8f;
    std::vector<Candidate> candidates = {{"a1", a}, {"a2", a}, {"b", other}};
    MmrConfig cfg;
    cfg.lambda = 0.5;
    cfg.m = 2;
    auto picked = mmr_rerank(q, candidates, cfg);
    REQUIRE(picked.size() == 2);
    CHECK(picked[0] == "a1");
    CHECK(picked[1] == "b");
}

TEST_CASE("mmr output is duplicate-free and bounded") {
    SplitMix64 rng(7);
    for (int iter = 0; iter < 20; ++iter) {
        auto candidates = random_candidates(1 + rng.next_below(25), 6, 300 + iter);
        VecF q = testsupport::random_unit_vector(6, rng);
        MmrConfig cfg;
        cfg.lambda = 0.5;
        cfg.m = 1 + rng.next_below(30);
        auto picked = mmr_rerank(q, candidates, cfg);
        CHECK(picked.size() == std::min(cfg.m, candidates.size()));
        std::set<std::string> unique(picked.begin(), picked.end());
        CHECK(unique.size() == picked.size());
    }
}

TEST_CASE("the first mmr pick is lambda-invariant") {
    auto candidates = random_candidates(20, 8, 11);
    SplitMix64 rng(13);
    VecF q = testsupport::random_unit_vector(8, rng);
    std::string first;
    for (double lambda : {0.0, 0.3, 0.5, 0.8, 1.0}) {
        MmrConfig cfg;
        cfg.lambda = lambda;
        cfg.m = 5;
        auto picked = mmr_rerank(q, candidates, cfg);
        if (first.empty()) first = picked[0];
        CHECK(picked[0] == first);
    }
}

TEST_CASE("mmr selections are more diverse than plain top-m") {
    // statistical: mean pairwise cosine of MMR sets <= that of top-m sets
    SplitMix64 rng(17);
    auto candidates = random_candidates(60, 16, 19);
    double mmr_total = 0.0, topm_total = 0.0;
    const std::size_t m = 8;
    const int n_queries = 120;
    auto mean_pairwise = [&](const std::vector<std::string>& picked) {
        std::map<std::string, const Candidate*> by_id;
        for (const auto& c : candidates) by_id[c.id] = &c;
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < picked.size(); ++i) {
            for (std::size_t j = i + 1; j < picked.size(); ++j) {
                total += by_id.at(picked[i])->vector.dot(by_id.at(picked[j])->vector);
                ++count;
            }
        }
        return total / static_cast<double>(count);
    };
    for (int q = 0; q < n_queries; ++q) {
        VecF query = testsupport::random_unit_vector(16, rng);
        MmrConfig diverse{0.5, m, 60, false};
        MmrConfig plain{1.0, m, 60, false};
        mmr_total += mean_pairwise(mmr_rerank(query, candidates, diverse));
        topm_total += mean_pairwise(mmr_rerank(query, candidates, plain));
    }
    INFO("mmr " << mmr_total / n_queries << " vs topm " << topm_total / n_queries);
    CHECK(mmr_total / n_queries <= topm_total / n_queries);
}

TEST_CASE("empty candidate list yields empty mmr output") {
    VecF q(2);
    q << 1, 0;
    MmrConfig cfg;
    CHECK(mmr_rerank(q, {}, cfg).empty());
}

// ---------------------------------------------------------------------------
// Threshold
// ---------------------------------------------------------------------------

TEST_CASE("median threshold over odd and even counts") {
    CHECK_THAT(compute_threshold({0.1, 0.3, 0.2}), WithinAbs(0.2, 1e-12));
    CHECK_THAT(compute_threshold({0.1, 0.3}), WithinAbs(0.2, 1e-12));
    CHECK_THAT(compute_threshold({0.5}), WithinAbs(0.5, 1e-12));
    CHECK_THROWS_AS(compute_threshold({}), Error);
}

TEST_CASE("threshold retrieval is strictly greater-than") {
    SearchResult high{"doc", 0.9, 1};
    SearchResult equal{"doc", 0.5, 1};
    SearchResult low{"doc", 0.2, 1};
    CHECK(threshold_retrieve(high, 0.5).size() == 1);
    CHECK(threshold_retrieve(equal, 0.5).empty());
    CHECK(threshold_retrieve(low, 0.5).empty());
}

TEST_CASE("all-equal scores pass nothing through the threshold") {
    std::vector<double> scores(9, 0.42);
    double theta = compute_threshold(scores);
    CHECK_THAT(theta, WithinAbs(0.42, 1e-12));
    CHECK(threshold_retrieve({"d", 0.42, 1}, theta).empty());
}

// ---------------------------------------------------------------------------
// Random retrieval
// ---------------------------------------------------------------------------

TEST_CASE("random retrieval is a deterministic sample without replacement") {
    std::vector<std::string> ids = {"e", "a", "c", "b", "d"};
    auto all = random_retrieve(ids, 5, 3);
    std::set<std::string> unique(all.begin(), all.end());
    CHECK(unique == std::set<std::string>(ids.begin(), ids.end()));

    auto a = random_retrieve(ids, 3, 7);
    auto b = random_retrieve(ids, 3, 7);
    CHECK(a == b);
    CHECK(random_retrieve(ids, 0, 7).empty());
    CHECK_THROWS_AS(random_retrieve(ids, 6, 7), Error);
}

// ---------------------------------------------------------------------------
// Target dedupe
// ---------------------------------------------------------------------------

TEST_CASE("dedupe removes token-identical documents and recomputes ranks") {
    std::map<std::string, std::vector<std::string>> tokens = {
        {"self", {"def", "f", "(", ")", ":"}},
        {"reformatted", {"def", "f", "(", ")", ":"}},  // whitespace-only difference
        {"other", {"def", "g", "(", ")", ":"}},
    };
    auto doc_tokens = [&](const std::string& id) -> const std::vector<std::string>& {
        return tokens.at(id);
    };
    std::vector<SearchResult> results = {{"self", 0.99, 1},
                                         {"reformatted", 0.98, 2},
                                         {"other", 0.5, 3}};
    auto deduped = dedupe_target(results, tokens.at("self"), doc_tokens);
    REQUIRE(deduped.size() == 1);
    CHECK(deduped[0].doc_id == "other");
    CHECK(deduped[0].rank == 1);

    // idempotent
    auto again = dedupe_target(deduped, tokens.at("self"), doc_tokens);
    REQUIRE(again.size() == 1);
    CHECK(again[0].doc_id == "other");

    // no identical result: unchanged
    std::vector<SearchResult> clean = {{"other", 0.5, 1}};
    auto untouched = dedupe_target(clean, tokens.at("self"), doc_tokens);
    CHECK(untouched.size() == 1);
}

// ---------------------------------------------------------------------------
// BM25
// ---------------------------------------------------------------------------

TEST_CASE("bm25 matches hand-computed scores on a 2-document index") {
    // doc1 = [apple banana apple], doc2 = [banana cherry]; k1=1.2, b=0.75
    auto index = build_bm25_index({"doc1", "doc2"},
                                  {{"apple", "banana", "apple"}, {"banana", "cherry"}});
    auto results = bm25_search(index, {"apple", "cherry"}, 10);
    REQUIRE(results.size() == 2);
    CHECK(results[0].doc_id == "doc1");
    CHECK_THAT(results[0].relevance, WithinAbs(0.9023217735099881, 1e-12));
    CHECK(results[1].doc_id == "doc2");
    CHECK_THAT(results[1].relevance, WithinAbs(0.7549127709068711, 1e-12));

    auto banana = bm25_search(index, {"banana"}, 10);
    REQUIRE(banana.size() == 2);
    // shorter doc2 wins the shared term
    CHECK(banana[0].doc_id == "doc2");
    CHECK_THAT(banana[0].relevance, WithinAbs(0.19856803215183175, 1e-12));
    CHECK_THAT(banana[1].relevance, WithinAbs(0.16853253149021016, 1e-12));
}

TEST_CASE("bm25 ranks the unique matching document first") {
    auto index = build_bm25_index(
        {"a", "b", "c"},
        {{"read", "file"}, {"write", "file"}, {"parse", "json"}});
    auto results = bm25_search(index, {"json"}, 3);
    REQUIRE_FALSE(results.empty());
    CHECK(results[0].doc_id == "c");
    for (const auto& r : results) CHECK(r.relevance >= 0.0);
}

TEST_CASE("bm25 on unseen or empty queries") {
    auto index = build_bm25_index({"a"}, {{"only", "doc"}});
    CHECK(bm25_search(index, {"missing"}, 5).empty());
    CHECK(bm25_search(index, {}, 5).empty());
}

TEST_CASE("bm25 scores zero-overlap documents as absent") {
    auto index = build_bm25_index({"a", "b"}, {{"x", "y"}, {"z", "w"}});
    auto results = bm25_search(index, {"x"}, 5);
    REQUIRE(results.size() == 1);
    CHECK(results[0].doc_id == "a");
}
