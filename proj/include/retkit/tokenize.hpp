#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace retkit::tok {

enum class CodeTokenMode {
    filter,    // identifier runs + single punctuation chars, case preserved
    subtoken,  // identifiers further split at '_' and camel-case boundaries, lowercased
};

struct CodeTokenRules {
    CodeTokenMode mode = CodeTokenMode::filter;
    bool lowercase = true;  // subtoken mode only
};

// Splits source text into tokens. Whitespace is discarded; a maximal run of
// [A-Za-z0-9_] (plus non-ASCII bytes) forms one identifier token and every
// other character stands alone. Subtoken mode splits identifiers further.
std::vector<std::string> tokenize_code(std::string_view text, const CodeTokenRules& rules);

// Splits one identifier at underscores and lower/upper camel boundaries.
// "getUserName_v2" -> {get, user, name, v2} when lowercasing.
std::vector<std::string> split_identifier(std::string_view ident, bool lowercase);

// ---------------------------------------------------------------------------
// Byte-pair encoding over whitespace-pre-split words with an end-of-word
// marker. Merges are replayed in training order at encode time.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kEndOfWord = "</w>";

class BpeModel {
public:
    static constexpr std::uint32_t kUnkId = 0;
    static constexpr std::uint32_t kPadId = 1;

    std::size_t vocab_size() const { return id_to_token_.size(); }
    std::size_t base_size() const { return base_size_; }
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
    const std::string& token(std::uint32_t id) const { return id_to_token_.at(id); }

    std::vector<std::uint32_t> encode(std::string_view text) const;
    std::string decode(const std::vector<std::uint32_t>& ids) const;

    void save(const std::string& path) const;
    static BpeModel load(const std::string& path);

private:
    friend BpeModel train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size);

    std::uint32_t add_token(std::string token);
    std::uint32_t lookup(const std::string& token) const;
    std::vector<std::string> encode_word(const std::string& word) const;

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, std::uint32_t> token_to_id_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::size_t base_size_ = 0;  // specials + base alphabet, before any merge
    mutable std::unordered_map<std::string, std::vector<std::string>> word_cache_;
};

// Greedy pair-merge training. The most frequent adjacent symbol pair is merged
// each round (ties broken by lexicographically smallest pair) until vocab_size
// is reached or no pair occurs at least twice.
BpeModel train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size);

// Counts base symbols (specials + distinct bytes + end-of-word) for a corpus;
// the smallest legal training vocab_size is this plus one.
std::size_t bpe_base_symbol_count(const std::vector<std::string>& texts);

// ---------------------------------------------------------------------------
// Frequency-ranked subtoken vocabulary for the code side of the bi-encoder.
// ---------------------------------------------------------------------------

class SubtokenVocab {
public:
    static constexpr std::uint32_t kUnkId = 0;
    static constexpr std::uint32_t kPadId = 1;

    // Keeps the max_tokens most frequent subtokens (ties by token ascending).
    static SubtokenVocab build(const std::vector<std::string>& texts, std::size_t max_tokens);

    std::size_t size() const { return id_to_token_.size(); }
    const std::string& token(std::uint32_t id) const { return id_to_token_.at(id); }
    std::uint32_t id_of(const std::string& token) const;

    std::vector<std::uint32_t> encode(std::string_view code) const;

    void save(const std::string& path) const;
    static SubtokenVocab load(const std::string& path);

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, std::uint32_t> token_to_id_;
};

}  // namespace retkit::tok
