#include "retkit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "retkit/common.hpp"
#include "retkit/rng.hpp"
#include "retkit/tokenize.hpp"

namespace retkit::corpus {

using nlohmann::json;

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    throw internal_error("unknown split");
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "valid") return Split::valid;
    if (name == "test") return Split::test;
    throw data_error("unknown split name: " + name);
}

namespace {

std::string lstripped(const std::string& line) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    return line.substr(i);
}

std::string rstripped(const std::string& line) {
    std::size_t e = line.size();
    while (e > 0 && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    return line.substr(0, e);
}

bool is_def_line(const std::string& stripped) {
    return starts_with(stripped, "def ") || starts_with(stripped, "async def ");
}

int paren_delta(const std::string& line) {
    int delta = 0;
    for (char c : line) {
        if (c == '(' || c == '[' || c == '{') ++delta;
        if (c == ')' || c == ']' || c == '}') --delta;
    }
    return delta;
}

// Extracts the first parameter name from a signature's parameter list.
std::string first_parameter(const std::string& signature) {
    std::size_t open = signature.find('(');
    if (open == std::string::npos) return "";
    std::string name;
    for (std::size_t i = open + 1; i < signature.size(); ++i) {
        char c = signature[i];
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            name.push_back(c);
        } else if (!name.empty() || c == ')' || c == ',' || c == ':' || c == '=') {
            break;
        } else if (c == '*') {  // *args / **kwargs are not receivers
            return "";
        }
    }
    return name;
}

// Finds a leading triple-quoted string in the body block. Returns the number
// of body lines it spans (0 if absent) and the docstring text.
std::size_t leading_docstring(const std::vector<std::string>& body_lines,
                              std::string& docstring) {
    std::size_t first = 0;
    while (first < body_lines.size() && trim(body_lines[first]).empty()) ++first;
    if (first >= body_lines.size()) return 0;
    std::string head = lstripped(body_lines[first]);
    // tolerate a single string prefix such as r"""..."""
    std::size_t q = 0;
    if (!head.empty() && std::isalpha(static_cast<unsigned char>(head[0]))) q = 1;
    std::string quote;
    if (head.compare(q, 3, "\"\"\"") == 0) quote = "\"\"\"";
    else if (head.compare(q, 3, "'''") == 0) quote = "'''";
    else return 0;

    std::string inner = head.substr(q + 3);
    std::size_t close = inner.find(quote);
    if (close != std::string::npos) {
        docstring = trim(inner.substr(0, close));
        return first + 1;
    }
    std::vector<std::string> collected;
    if (!trim(inner).empty()) collected.push_back(rstripped(inner));
    for (std::size_t i = first + 1; i < body_lines.size(); ++i) {
        std::size_t pos = body_lines[i].find(quote);
        if (pos != std::string::npos) {
            std::string last = body_lines[i].substr(0, pos);
            if (!trim(last).empty()) collected.push_back(trim(last));
            std::string joined;
            for (std::size_t k = 0; k < collected.size(); ++k) {
                if (k) joined += "\n";
                joined += k == 0 ? collected[k] : trim(collected[k]);
            }
            docstring = trim(joined);
            return i + 1;
        }
        collected.push_back(body_lines[i]);
    }
    return 0;  // unterminated: treat as no docstring
}

}  // namespace

bool separate_function(const std::string& code, SeparatedFunction& out) {
    auto lines = split_lines(code);
    std::size_t def_idx = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_def_line(lstripped(lines[i]))) {
            def_idx = i;
            break;
        }
    }
    if (def_idx == lines.size()) return false;

    out.def_indented = lines[def_idx] != lstripped(lines[def_idx]);

    // Signature may span lines until brackets balance and a ':' closes it.
    std::string signature;
    int depth = 0;
    std::size_t sig_end = def_idx;
    for (std::size_t i = def_idx; i < lines.size() && i < def_idx + 64; ++i) {
        if (i > def_idx) signature += "\n";
        signature += lines[i];
        depth += paren_delta(lines[i]);
        std::string r = rstripped(lines[i]);
        if (depth <= 0 && !r.empty() && r.back() == ':') {
            sig_end = i;
            break;
        }
        sig_end = i;
    }
    out.signature = rstripped(signature);
    out.first_param = first_parameter(out.signature);

    std::vector<std::string> body_lines(lines.begin() + static_cast<long>(sig_end) + 1,
                                        lines.end());
    out.docstring.clear();
    std::size_t consumed = leading_docstring(body_lines, out.docstring);

    std::string body;
    for (std::size_t i = consumed; i < body_lines.size(); ++i) {
        if (!body.empty()) body += "\n";
        body += body_lines[i];
    }
    // trim leading blank lines and trailing space
    while (starts_with(body, "\n")) body.erase(0, 1);
    out.body = rstripped(body);
    return true;
}

std::vector<FunctionRecord> parse_function_corpus(std::istream& source,
                                                  ParseDiagnostics& diag) {
    if (!source) throw data_error("parse_function_corpus: unreadable stream");
    std::vector<FunctionRecord> records;
    std::string line;
    while (std::getline(source, line)) {
        ++diag.lines_read;
        if (trim(line).empty()) continue;
        json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("code") ||
            !obj.contains("id") || !obj["code"].is_string() || !obj["id"].is_string()) {
            ++diag.skipped_malformed;
            continue;
        }
        SeparatedFunction sep;
        if (!separate_function(obj["code"].get<std::string>(), sep)) {
            ++diag.skipped_malformed;
            continue;
        }
        FunctionRecord rec;
        rec.id = obj["id"].get<std::string>();
        rec.repo = obj.value("repo", "");
        rec.path = obj.value("path", "");
        rec.name = obj.value("name", "");
        rec.signature = sep.signature;
        rec.body = sep.body;
        rec.docstring = !sep.docstring.empty() ? sep.docstring
                                               : trim(obj.value("docstring", ""));
        if (rec.docstring.empty()) {
            ++diag.dropped_no_docstring;
            continue;
        }
        if (obj.contains("is_class_method") && obj["is_class_method"].is_boolean()) {
            rec.is_class_method = obj["is_class_method"].get<bool>();
        } else {
            rec.is_class_method = sep.def_indented || sep.first_param == "self" ||
                                  sep.first_param == "cls";
        }
        rec.filter_token_count =
            tok::tokenize_code(rec.signature + "\n" + rec.docstring + "\n" + rec.body,
                               {tok::CodeTokenMode::filter, false})
                .size();
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<FunctionRecord> filter_functions(std::vector<FunctionRecord> records,
                                             std::size_t max_tokens) {
    std::vector<FunctionRecord> kept;
    kept.reserve(records.size());
    for (auto& rec : records) {
        if (rec.is_class_method) continue;
        if (rec.filter_token_count > max_tokens) continue;
        kept.push_back(std::move(rec));
    }
    return kept;
}

CorpusSplit split_corpus(std::vector<FunctionRecord> records, std::size_t valid_size,
                         std::size_t test_size, std::uint64_t seed) {
    if (valid_size + test_size >= records.size()) {
        throw data_error("split_corpus: valid " + std::to_string(valid_size) + " + test " +
                         std::to_string(test_size) + " must be smaller than corpus of " +
                         std::to_string(records.size()));
    }
    // Assignment is a function of (seed, id set): canonicalize order first.
    std::sort(records.begin(), records.end(),
              [](const FunctionRecord& a, const FunctionRecord& b) { return a.id < b.id; });
    SplitMix64 rng(seed);
    seeded_shuffle(records, rng);

    CorpusSplit out;
    out.seed = seed;
    std::size_t n = records.size();
    std::size_t train_end = n - valid_size - test_size;
    std::size_t valid_end = n - test_size;
    for (std::size_t i = 0; i < n; ++i) {
        Split s = i < train_end ? Split::train : (i < valid_end ? Split::valid : Split::test);
        records[i].split = s;
        if (s == Split::train) out.train.push_back(std::move(records[i]));
        else if (s == Split::valid) out.valid.push_back(std::move(records[i]));
        else out.test.push_back(std::move(records[i]));
    }
    return out;
}

namespace {

bool intent_from_json(const json& obj, IntentSnippetRecord& rec) {
    if (!obj.is_object() || !obj.contains("question_id") || !obj.contains("intent") ||
        !obj.contains("snippet")) {
        return false;
    }
    if (!obj["intent"].is_string() || !obj["snippet"].is_string()) return false;
    rec.intent = trim(obj["intent"].get<std::string>());
    rec.snippet = trim(obj["snippet"].get<std::string>());
    if (rec.intent.empty() || rec.snippet.empty()) return false;
    if (obj["question_id"].is_number_integer()) {
        rec.question_id = obj["question_id"].get<std::int64_t>();
    } else if (obj["question_id"].is_string()) {
        try {
            rec.question_id = std::stoll(obj["question_id"].get<std::string>());
        } catch (...) {
            return false;
        }
    } else {
        return false;
    }
    rec.curated = obj.value("curated", false);
    if (obj.contains("prob") && obj["prob"].is_number()) {
        rec.confidence = obj["prob"].get<double>();
    } else {
        rec.confidence = rec.curated ? 1.0 : 0.0;
    }
    return true;
}

}  // namespace

std::vector<IntentSnippetRecord> parse_intent_snippets(std::istream& source,
                                                       std::size_t top_n,
                                                       ParseDiagnostics& diag) {
    if (!source) throw data_error("parse_intent_snippets: unreadable stream");
    std::string content((std::istreambuf_iterator<char>(source)),
                        std::istreambuf_iterator<char>());
    std::vector<json> objects;
    std::string t = trim(content);
    if (!t.empty() && t.front() == '[') {
        json arr = json::parse(t, nullptr, false);
        if (arr.is_discarded() || !arr.is_array()) {
            throw data_error("parse_intent_snippets: invalid JSON array document");
        }
        for (auto& obj : arr) objects.push_back(obj);
        diag.lines_read += objects.size();
    } else {
        for (const auto& line : split_lines(content)) {
            if (trim(line).empty()) continue;
            ++diag.lines_read;
            json obj = json::parse(line, nullptr, false);
            objects.push_back(obj);  // discarded markers handled below
        }
    }

    std::vector<IntentSnippetRecord> curated, mined;
    std::unordered_map<std::int64_t, std::size_t> occurrences;
    for (const auto& obj : objects) {
        IntentSnippetRecord rec;
        if (obj.is_discarded() || !intent_from_json(obj, rec)) {
            ++diag.skipped_malformed;
            continue;
        }
        rec.id = "q" + std::to_string(rec.question_id) + ":" +
                 std::to_string(occurrences[rec.question_id]++);
        (rec.curated ? curated : mined).push_back(std::move(rec));
    }

    auto by_confidence = [](const IntentSnippetRecord& a, const IntentSnippetRecord& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.question_id != b.question_id) return a.question_id < b.question_id;
        return a.id < b.id;
    };
    std::sort(mined.begin(), mined.end(), by_confidence);
    if (mined.size() > top_n) mined.resize(top_n);

    std::vector<IntentSnippetRecord> out = std::move(curated);
    out.insert(out.end(), std::make_move_iterator(mined.begin()),
               std::make_move_iterator(mined.end()));
    std::sort(out.begin(), out.end(), by_confidence);
    return out;
}

// ---------------------------------------------------------------------------
// Corpus directory IO
// ---------------------------------------------------------------------------

namespace {

json function_to_json(const FunctionRecord& r) {
    return json{{"id", r.id},
                {"repo", r.repo},
                {"path", r.path},
                {"name", r.name},
                {"signature", r.signature},
                {"docstring", r.docstring},
                {"body", r.body},
                {"split", split_name(r.split)},
                {"is_class_method", r.is_class_method},
                {"filter_token_count", r.filter_token_count}};
}

FunctionRecord function_from_json(const json& obj) {
    FunctionRecord r;
    r.id = obj.at("id").get<std::string>();
    r.repo = obj.value("repo", "");
    r.path = obj.value("path", "");
    r.name = obj.value("name", "");
    r.signature = obj.at("signature").get<std::string>();
    r.docstring = obj.at("docstring").get<std::string>();
    r.body = obj.value("body", "");
    r.split = split_from_name(obj.value("split", "train"));
    r.is_class_method = obj.value("is_class_method", false);
    r.filter_token_count = obj.value("filter_token_count", std::size_t{0});
    return r;
}

}  // namespace

void write_function_records(const std::vector<FunctionRecord>& records,
                            const std::string& path) {
    std::ostringstream out;
    out << json{{"format", "funcrec v1"}, {"count", records.size()}}.dump() << "\n";
    for (const auto& r : records) out << function_to_json(r).dump() << "\n";
    write_text_file(path, out.str());
}

std::vector<FunctionRecord> load_function_records(const std::string& path) {
    auto lines = split_lines(read_text_file(path));
    if (lines.empty()) throw data_error("empty function record file: " + path);
    json header = json::parse(lines[0], nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "funcrec v1") {
        throw data_error("not a function record file: " + path);
    }
    std::vector<FunctionRecord> records;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        records.push_back(function_from_json(json::parse(lines[i])));
    }
    return records;
}

void write_intent_records(const std::vector<IntentSnippetRecord>& records,
                          const std::string& path) {
    std::ostringstream out;
    out << json{{"format", "intentrec v1"}, {"count", records.size()}}.dump() << "\n";
    for (const auto& r : records) {
        out << json{{"id", r.id},
                    {"question_id", r.question_id},
                    {"intent", r.intent},
                    {"snippet", r.snippet},
                    {"confidence", r.confidence},
                    {"curated", r.curated}}
                   .dump()
            << "\n";
    }
    write_text_file(path, out.str());
}

std::vector<IntentSnippetRecord> load_intent_records(const std::string& path) {
    auto lines = split_lines(read_text_file(path));
    if (lines.empty()) throw data_error("empty intent record file: " + path);
    json header = json::parse(lines[0], nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "intentrec v1") {
        throw data_error("not an intent record file: " + path);
    }
    std::vector<IntentSnippetRecord> records;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        json obj = json::parse(lines[i]);
        IntentSnippetRecord r;
        r.id = obj.at("id").get<std::string>();
        r.question_id = obj.at("question_id").get<std::int64_t>();
        r.intent = obj.at("intent").get<std::string>();
        r.snippet = obj.at("snippet").get<std::string>();
        r.confidence = obj.value("confidence", 0.0);
        r.curated = obj.value("curated", false);
        records.push_back(std::move(r));
    }
    return records;
}

void write_corpus_dir(const CorpusDir& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_function_records(corpus.functions.train, dir + "/functions_train.jsonl");
    write_function_records(corpus.functions.valid, dir + "/functions_valid.jsonl");
    write_function_records(corpus.functions.test, dir + "/functions_test.jsonl");
    write_intent_records(corpus.intents, dir + "/intents.jsonl");
}

CorpusDir load_corpus_dir(const std::string& dir) {
    CorpusDir corpus;
    corpus.functions.train = load_function_records(dir + "/functions_train.jsonl");
    corpus.functions.valid = load_function_records(dir + "/functions_valid.jsonl");
    corpus.functions.test = load_function_records(dir + "/functions_test.jsonl");
    corpus.intents = load_intent_records(dir + "/intents.jsonl");
    return corpus;
}

}  // namespace retkit::corpus
