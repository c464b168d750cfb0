#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retkit/corpus.hpp"
#include "retkit/tokenize.hpp"

namespace retkit::pack {

// Rendered text of one retrievable document: a function keeps its signature,
// docstring block, and body; an intent-snippet becomes a comment line above
// its code.
std::string render_document(const corpus::FunctionRecord& doc);
std::string render_document(const corpus::IntentSnippetRecord& doc);

// Rendered query prefix (signature + docstring block) a generator would
// continue from.
std::string render_query(const std::string& signature, const std::string& docstring);

enum class PackMode { none, single, threshold, full, mmr, random };

std::string pack_mode_name(PackMode m);
PackMode pack_mode_from_name(const std::string& name);

struct PackConfig {
    std::size_t window = 1024;  // token budget including the query
    PackMode mode = PackMode::full;
};

enum class SpanSource { retrieved, query };

struct ProvenanceSpan {
    std::size_t begin = 0;  // token index, inclusive
    std::size_t end = 0;    // token index, exclusive
    SpanSource source = SpanSource::retrieved;
    std::string doc_id;     // empty for the query span
};

struct PackedContext {
    std::vector<std::uint32_t> token_ids;
    std::vector<ProvenanceSpan> provenance;  // contiguous, covers token_ids, query last
    std::size_t n_retrieved = 0;
    std::string context_text;  // concatenation the token_ids encode
};

inline constexpr std::string_view kDocumentSeparator = "\n# ---\n";

struct RenderedDoc {
    std::string doc_id;
    std::string text;
};

// Greedily appends whole documents (in the given order) while the running
// total plus the query still fits the window, stopping at the first document
// that does not fit. The query span always comes last. Throws when the query
// alone exceeds the window.
PackedContext pack_context(const std::string& query_text,
                           const std::vector<RenderedDoc>& retrieved,
                           const tok::BpeModel& bpe, const PackConfig& cfg);

}  // namespace retkit::pack
