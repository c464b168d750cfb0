#include "retkit/pack.hpp"

#include <sstream>

#include "retkit/common.hpp"

namespace retkit::pack {

namespace {

// Indent the docstring one level and wrap it in triple quotes, matching the
// layout the parser expects back.
std::string docstring_block(const std::string& docstring) {
    std::ostringstream out;
    out << "    \"\"\"";
    auto lines = split_lines(docstring);
    if (lines.size() <= 1) {
        out << docstring << "\"\"\"";
        return out.str();
    }
    out << lines[0] << "\n";
    for (std::size_t i = 1; i < lines.size(); ++i) out << "    " << lines[i] << "\n";
    out << "    \"\"\"";
    return out.str();
}

}  // namespace

std::string render_document(const corpus::FunctionRecord& doc) {
    std::string out = doc.signature + "\n" + docstring_block(doc.docstring);
    if (!doc.body.empty()) out += "\n" + doc.body;
    return out;
}

std::string render_document(const corpus::IntentSnippetRecord& doc) {
    return "# " + doc.intent + "\n" + doc.snippet;
}

std::string render_query(const std::string& signature, const std::string& docstring) {
    return signature + "\n" + docstring_block(docstring);
}

std::string pack_mode_name(PackMode m) {
    switch (m) {
        case PackMode::none: return "none";
        case PackMode::single: return "single";
        case PackMode::threshold: return "threshold";
        case PackMode::full: return "full";
        case PackMode::mmr: return "mmr";
        case PackMode::random: return "random";
    }
    throw internal_error("unknown pack mode");
}

PackMode pack_mode_from_name(const std::string& name) {
    if (name == "none") return PackMode::none;
    if (name == "single") return PackMode::single;
    if (name == "threshold") return PackMode::threshold;
    if (name == "full") return PackMode::full;
    if (name == "mmr") return PackMode::mmr;
    if (name == "random") return PackMode::random;
    throw data_error("unknown pack mode: " + name);
}

PackedContext pack_context(const std::string& query_text,
                           const std::vector<RenderedDoc>& retrieved,
                           const tok::BpeModel& bpe, const PackConfig& cfg) {
    auto query_ids = bpe.encode(query_text);
    if (query_ids.size() > cfg.window) {
        throw data_error("pack_context: query of " + std::to_string(query_ids.size()) +
                         " tokens exceeds window " + std::to_string(cfg.window));
    }

    PackedContext out;
    std::vector<std::vector<std::uint32_t>> doc_ids_list;
    std::vector<std::string> doc_texts;
    std::size_t used = 0;

    if (cfg.mode != PackMode::none) {
        for (const auto& doc : retrieved) {
            // separator rides with its document so spans stay contiguous
            std::string unit = doc.text + std::string(kDocumentSeparator);
            auto unit_ids = bpe.encode(unit);
            if (used + unit_ids.size() + query_ids.size() > cfg.window) break;
            used += unit_ids.size();
            doc_ids_list.push_back(std::move(unit_ids));
            doc_texts.push_back(std::move(unit));
            out.provenance.push_back(
                {0, 0, SpanSource::retrieved, doc.doc_id});  // offsets fixed below
            ++out.n_retrieved;
            if (cfg.mode == PackMode::single || cfg.mode == PackMode::threshold) break;
        }
    }

    std::size_t offset = 0;
    for (std::size_t i = 0; i < doc_ids_list.size(); ++i) {
        out.provenance[i].begin = offset;
        offset += doc_ids_list[i].size();
        out.provenance[i].end = offset;
        out.token_ids.insert(out.token_ids.end(), doc_ids_list[i].begin(),
                             doc_ids_list[i].end());
        out.context_text += doc_texts[i];
    }
    out.provenance.push_back(
        {offset, offset + query_ids.size(), SpanSource::query, std::string()});
    out.token_ids.insert(out.token_ids.end(), query_ids.begin(), query_ids.end());
    out.context_text += query_text;

    if (out.token_ids.size() > cfg.window) {
        throw internal_error("pack_context: budget overflow");
    }
    return out;
}

}  // namespace retkit::pack
