#include "retkit/tokenize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "retkit/common.hpp"

namespace retkit::tok {

namespace {

bool is_ident_char(unsigned char c) {
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool is_space_char(unsigned char c) { return std::isspace(c); }

char lower_ascii(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

std::vector<std::string> split_identifier(std::string_view ident, bool lowercase) {
    std::vector<std::string> parts;
    std::string cur;
    char prev_orig = '\0';  // last character appended, before lowercasing
    auto flush = [&] {
        if (!cur.empty()) {
            parts.push_back(cur);
            cur.clear();
        }
    };
    const std::size_t n = ident.size();
    for (std::size_t i = 0; i < n; ++i) {
        char c = ident[i];
        if (c == '_') {
            flush();
            continue;
        }
        if (!cur.empty() && std::isupper(static_cast<unsigned char>(c))) {
            unsigned char prev = static_cast<unsigned char>(prev_orig);
            // aB -> a|B and 2B -> 2|B; ABc -> A|Bc so acronyms keep their tail
            if (std::islower(prev) || std::isdigit(prev)) {
                flush();
            } else if (std::isupper(prev) && i + 1 < n &&
                       std::islower(static_cast<unsigned char>(ident[i + 1]))) {
                flush();
            }
        }
        cur.push_back(lowercase ? lower_ascii(c) : c);
        prev_orig = c;
    }
    flush();
    return parts;
}

std::vector<std::string> tokenize_code(std::string_view text, const CodeTokenRules& rules) {
    std::vector<std::string> tokens;
    std::string run;
    auto flush_run = [&] {
        if (run.empty()) return;
        if (rules.mode == CodeTokenMode::subtoken) {
            for (auto& part : split_identifier(run, rules.lowercase)) {
                tokens.push_back(std::move(part));
            }
        } else {
            tokens.push_back(run);
        }
        run.clear();
    };
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (is_ident_char(c)) {
            run.push_back(ch);
        } else {
            flush_run();
            if (!is_space_char(c)) tokens.emplace_back(1, ch);
        }
    }
    flush_run();
    return tokens;
}

// ---------------------------------------------------------------------------
// BPE
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> whitespace_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (is_space_char(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

std::vector<std::string> word_to_symbols(const std::string& word) {
    std::vector<std::string> syms;
    syms.reserve(word.size() + 1);
    for (char c : word) syms.emplace_back(1, c);
    syms.emplace_back(kEndOfWord);
    return syms;
}

// One left-to-right merge pass over a symbol sequence.
void apply_merge(std::vector<std::string>& syms, const std::string& a, const std::string& b,
                 const std::string& merged) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
            syms[out++] = merged;
            i += 2;
        } else {
            if (out != i) syms[out] = std::move(syms[i]);
            ++out;
            ++i;
        }
    }
    syms.resize(out);
}

}  // namespace

std::uint32_t BpeModel::add_token(std::string token) {
    std::uint32_t id = static_cast<std::uint32_t>(id_to_token_.size());
    token_to_id_.emplace(token, id);
    id_to_token_.push_back(std::move(token));
    return id;
}

std::uint32_t BpeModel::lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

std::vector<std::string> BpeModel::encode_word(const std::string& word) const {
    auto cached = word_cache_.find(word);
    if (cached != word_cache_.end()) return cached->second;
    std::vector<std::string> syms = word_to_symbols(word);
    for (const auto& [a, b] : merges_) {
        if (syms.size() < 2) break;
        apply_merge(syms, a, b, a + b);
    }
    if (word_cache_.size() < 1u << 20) word_cache_.emplace(word, syms);
    return syms;
}

std::vector<std::uint32_t> BpeModel::encode(std::string_view text) const {
    std::vector<std::uint32_t> ids;
    for (const auto& word : whitespace_words(text)) {
        for (const auto& sym : encode_word(word)) ids.push_back(lookup(sym));
    }
    return ids;
}

std::string BpeModel::decode(const std::vector<std::uint32_t>& ids) const {
    std::string out;
    for (std::uint32_t id : ids) {
        if (id >= id_to_token_.size()) throw data_error("BPE id out of range");
        const std::string& t = id_to_token_[id];
        if (t == kEndOfWord) {
            out.push_back(' ');
        } else {
            // a merged symbol may embed the end-of-word marker at its tail
            if (t.size() > kEndOfWord.size() &&
                std::string_view(t).substr(t.size() - kEndOfWord.size()) == kEndOfWord) {
                out.append(t, 0, t.size() - kEndOfWord.size());
                out.push_back(' ');
            } else {
                out += t;
            }
        }
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::size_t bpe_base_symbol_count(const std::vector<std::string>& texts) {
    std::map<std::string, bool> base;
    for (const auto& text : texts) {
        for (const auto& word : whitespace_words(text)) {
            for (char c : word) base[std::string(1, c)] = true;
        }
    }
    return 2 + base.size() + 1;  // specials + alphabet + end-of-word
}

BpeModel train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size) {
    if (texts.empty()) throw data_error("train_bpe: empty corpus");

    std::map<std::string, std::uint64_t> word_counts;
    for (const auto& text : texts) {
        for (const auto& word : whitespace_words(text)) ++word_counts[word];
    }
    if (word_counts.empty()) throw data_error("train_bpe: corpus has no words");

    BpeModel model;
    model.add_token(std::string(kUnkToken));
    model.add_token(std::string(kPadToken));
    std::map<std::string, bool> alphabet;
    for (const auto& [word, _] : word_counts) {
        for (char c : word) alphabet[std::string(1, c)] = true;
    }
    for (const auto& [sym, _] : alphabet) model.add_token(sym);
    model.add_token(std::string(kEndOfWord));
    model.base_size_ = model.vocab_size();

    if (vocab_size <= model.base_size_) {
        throw data_error("train_bpe: vocab_size " + std::to_string(vocab_size) +
                         " must exceed base symbol count " +
                         std::to_string(model.base_size_));
    }

    std::vector<std::pair<std::vector<std::string>, std::uint64_t>> work;
    work.reserve(word_counts.size());
    for (const auto& [word, count] : word_counts) {
        work.emplace_back(word_to_symbols(word), count);
    }

    while (model.vocab_size() < vocab_size) {
        std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts;
        for (const auto& [syms, count] : work) {
            for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
                pair_counts[{syms[i], syms[i + 1]}] += count;
            }
        }
        // std::map iteration is lexicographic, so the first max is the tie-winner
        const std::pair<std::string, std::string>* best = nullptr;
        std::uint64_t best_count = 1;  // a merge must occur at least twice
        for (const auto& [pair, count] : pair_counts) {
            if (count > best_count) {
                best = &pair;
                best_count = count;
            }
        }
        if (best == nullptr) break;
        auto [a, b] = *best;
        std::string merged = a + b;
        for (auto& [syms, _] : work) apply_merge(syms, a, b, merged);
        model.merges_.emplace_back(a, b);
        model.add_token(merged);
    }
    return model;
}

void BpeModel::save(const std::string& path) const {
    std::ostringstream out;
    out << "bpe v1 " << vocab_size() << "\n";
    for (std::size_t i = 0; i < base_size_; ++i) out << id_to_token_[i] << "\n";
    for (const auto& [a, b] : merges_) out << a << " " << b << "\n";
    write_text_file(path, out.str());
}

BpeModel BpeModel::load(const std::string& path) {
    auto lines = split_lines(read_text_file(path));
    if (lines.empty() || !starts_with(lines[0], "bpe v1 ")) {
        throw data_error("not a BPE model file: " + path);
    }
    std::size_t declared = std::stoull(lines[0].substr(7));
    BpeModel model;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty()) continue;
        std::size_t sp = line.find(' ');
        if (sp == std::string::npos) {
            if (!model.merges_.empty()) {
                throw data_error("BPE file: base symbol after merges: " + path);
            }
            model.add_token(line);
        } else {
            if (model.base_size_ == 0) model.base_size_ = model.vocab_size();
            std::string a = line.substr(0, sp);
            std::string b = line.substr(sp + 1);
            if (model.token_to_id_.find(a) == model.token_to_id_.end() ||
                model.token_to_id_.find(b) == model.token_to_id_.end()) {
                throw data_error("BPE file: merge references unknown symbol: " + line);
            }
            model.merges_.emplace_back(a, b);
            model.add_token(a + b);
        }
    }
    if (model.base_size_ == 0) model.base_size_ = model.vocab_size();
    if (model.vocab_size() != declared) {
        throw data_error("BPE file: vocab size mismatch in " + path);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Subtoken vocabulary
// ---------------------------------------------------------------------------

SubtokenVocab SubtokenVocab::build(const std::vector<std::string>& texts,
                                   std::size_t max_tokens) {
    std::unordered_map<std::string, std::uint64_t> counts;
    CodeTokenRules rules{CodeTokenMode::subtoken, true};
    for (const auto& text : texts) {
        for (auto& tok : tokenize_code(text, rules)) ++counts[tok];
    }
    std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    if (ranked.size() > max_tokens) ranked.resize(max_tokens);

    SubtokenVocab vocab;
    vocab.id_to_token_.emplace_back(kUnkToken);
    vocab.id_to_token_.emplace_back(kPadToken);
    for (auto& [tok, _] : ranked) vocab.id_to_token_.push_back(std::move(tok));
    for (std::uint32_t i = 0; i < vocab.id_to_token_.size(); ++i) {
        vocab.token_to_id_[vocab.id_to_token_[i]] = i;
    }
    return vocab;
}

std::uint32_t SubtokenVocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

std::vector<std::uint32_t> SubtokenVocab::encode(std::string_view code) const {
    std::vector<std::uint32_t> ids;
    CodeTokenRules rules{CodeTokenMode::subtoken, true};
    for (const auto& tok : tokenize_code(code, rules)) ids.push_back(id_of(tok));
    return ids;
}

void SubtokenVocab::save(const std::string& path) const {
    std::ostringstream out;
    out << "svoc v1 " << id_to_token_.size() << "\n";
    for (std::size_t i = 2; i < id_to_token_.size(); ++i) out << id_to_token_[i] << "\n";
    write_text_file(path, out.str());
}

SubtokenVocab SubtokenVocab::load(const std::string& path) {
    auto lines = split_lines(read_text_file(path));
    if (lines.empty() || !starts_with(lines[0], "svoc v1 ")) {
        throw data_error("not a subtoken vocab file: " + path);
    }
    std::size_t declared = std::stoull(lines[0].substr(8));
    SubtokenVocab vocab;
    vocab.id_to_token_.emplace_back(kUnkToken);
    vocab.id_to_token_.emplace_back(kPadToken);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (!lines[i].empty()) vocab.id_to_token_.push_back(lines[i]);
    }
    if (vocab.id_to_token_.size() != declared) {
        throw data_error("subtoken vocab: size mismatch in " + path);
    }
    for (std::uint32_t i = 0; i < vocab.id_to_token_.size(); ++i) {
        vocab.token_to_id_[vocab.id_to_token_[i]] = i;
    }
    return vocab;
}

}  // namespace retkit::tok
