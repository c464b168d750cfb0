#pragma once

#include <string>
#include <vector>

#include "retkit/corpus.hpp"
#include "retkit/encoder.hpp"
#include "retkit/index.hpp"
#include "retkit/tokenize.hpp"

namespace retkit::embed {

// Everything needed to turn text into unit vectors: the trained encoder pair
// plus both tokenizers. Saved under a common path prefix:
//   <prefix>.query.fenc  <prefix>.code.fenc  <prefix>.svoc
// (the docstring BPE model travels separately, it is trained earlier).
struct EncodingContext {
    enc::EncoderParams query_params;
    enc::EncoderParams code_params;
    tok::BpeModel bpe;
    tok::SubtokenVocab code_vocab;
};

void save_encoder_bundle(const EncodingContext& ctx, const std::string& prefix);
EncodingContext load_encoder_bundle(const std::string& prefix, const std::string& bpe_path);

// Docstring -> BPE ids -> query encoder -> unit vector. Throws on text that
// produces no tokens or a zero vector.
index::VecF encode_query(const EncodingContext& ctx, const std::string& docstring);

// Code text -> subtoken ids -> code encoder -> unit vector.
index::VecF encode_document(const EncodingContext& ctx, const std::string& code_text);

// The code-side text of a database record. Functions are indexed without
// their docstring (the query carries that signal); intent-snippets are
// indexed as rendered intent + snippet.
std::string document_code_text(const corpus::FunctionRecord& record);
std::string document_code_text(const corpus::IntentSnippetRecord& record);

struct EmbedOutcome {
    index::VectorStore store;
    std::vector<std::string> rejected_ids;  // zero-vector documents, skipped
};

EmbedOutcome embed_functions(const EncodingContext& ctx,
                             const std::vector<corpus::FunctionRecord>& records);
EmbedOutcome embed_intents(const EncodingContext& ctx,
                           const std::vector<corpus::IntentSnippetRecord>& records);

}  // namespace retkit::embed
