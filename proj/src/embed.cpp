#include "retkit/embed.hpp"

#include "retkit/common.hpp"
#include "retkit/pack.hpp"

namespace retkit::embed {

void save_encoder_bundle(const EncodingContext& ctx, const std::string& prefix) {
    enc::save_params(ctx.query_params, prefix + ".query.fenc");
    enc::save_params(ctx.code_params, prefix + ".code.fenc");
    ctx.code_vocab.save(prefix + ".svoc");
}

EncodingContext load_encoder_bundle(const std::string& prefix, const std::string& bpe_path) {
    EncodingContext ctx;
    ctx.query_params = enc::load_params(prefix + ".query.fenc");
    ctx.code_params = enc::load_params(prefix + ".code.fenc");
    ctx.code_vocab = tok::SubtokenVocab::load(prefix + ".svoc");
    ctx.bpe = tok::BpeModel::load(bpe_path);
    return ctx;
}

namespace {

index::VecF to_unit_float(const enc::Vec& v) {
    enc::Vec unit = enc::normalize(v);
    index::VecF out(unit.size());
    for (Eigen::Index i = 0; i < unit.size(); ++i) out(i) = static_cast<float>(unit(i));
    return out;
}

}  // namespace

index::VecF encode_query(const EncodingContext& ctx, const std::string& docstring) {
    auto ids = ctx.bpe.encode(docstring);
    if (ids.empty()) throw data_error("encode_query: text produced no tokens");
    return to_unit_float(enc::encode(ctx.query_params, ids, enc::Side::query));
}

index::VecF encode_document(const EncodingContext& ctx, const std::string& code_text) {
    auto ids = ctx.code_vocab.encode(code_text);
    if (ids.empty()) throw data_error("encode_document: text produced no tokens");
    return to_unit_float(enc::encode(ctx.code_params, ids, enc::Side::code));
}

std::string document_code_text(const corpus::FunctionRecord& record) {
    return record.signature + "\n" + record.body;
}

std::string document_code_text(const corpus::IntentSnippetRecord& record) {
    return pack::render_document(record);
}

namespace {

template <typename Record>
EmbedOutcome embed_records(const EncodingContext& ctx, const std::vector<Record>& records) {
    std::vector<std::string> ids;
    std::vector<index::VecF> vectors;
    EmbedOutcome outcome;
    for (const auto& rec : records) {
        try {
            vectors.push_back(encode_document(ctx, document_code_text(rec)));
            ids.push_back(rec.id);
        } catch (const Error&) {
            outcome.rejected_ids.push_back(rec.id);
        }
    }
    if (ids.empty()) throw data_error("embed: no document produced a usable vector");
    index::MatF matrix(static_cast<Eigen::Index>(ids.size()), vectors[0].size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        matrix.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
    }
    outcome.store = index::make_store(std::move(ids), std::move(matrix));
    return outcome;
}

}  // namespace

EmbedOutcome embed_functions(const EncodingContext& ctx,
                             const std::vector<corpus::FunctionRecord>& records) {
    return embed_records(ctx, records);
}

EmbedOutcome embed_intents(const EncodingContext& ctx,
                           const std::vector<corpus::IntentSnippetRecord>& records) {
    return embed_records(ctx, records);
}

}  // namespace retkit::embed
