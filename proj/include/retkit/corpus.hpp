#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace retkit::corpus {

enum class Split { train, valid, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// One documented source function. signature is the full def-line (possibly
// multi-line), docstring has its delimiters stripped, body is everything
// after the docstring.
struct FunctionRecord {
    std::string id;
    std::string repo;
    std::string path;
    std::string name;
    std::string signature;
    std::string docstring;
    std::string body;
    Split split = Split::train;
    bool is_class_method = false;
    std::size_t filter_token_count = 0;
};

// One Stack Overflow intent (question title) paired with an extracted code
// snippet. Curated records without an extraction score default to 1.0 so
// they rank ahead of every mined record.
struct IntentSnippetRecord {
    std::string id;
    std::int64_t question_id = 0;
    std::string intent;
    std::string snippet;
    double confidence = 0.0;
    bool curated = false;
};

struct ParseDiagnostics {
    std::size_t lines_read = 0;
    std::size_t skipped_malformed = 0;
    std::size_t dropped_no_docstring = 0;
};

struct CorpusSplit {
    std::vector<FunctionRecord> train;
    std::vector<FunctionRecord> valid;
    std::vector<FunctionRecord> test;
    std::uint64_t seed = 0;
};

// Splits raw function text into signature / docstring / body. Returns false
// when no def-line is found.
struct SeparatedFunction {
    std::string signature;
    std::string docstring;  // empty when the code carries none
    std::string body;
    bool def_indented = false;
    std::string first_param;
};
bool separate_function(const std::string& code, SeparatedFunction& out);

// Reads line-delimited JSON records {"id","repo","path","name","code",
// "docstring"}. Malformed lines are counted and skipped; records whose
// docstring ends up empty are dropped.
std::vector<FunctionRecord> parse_function_corpus(std::istream& source,
                                                  ParseDiagnostics& diag);

// Drops class methods and anything longer than max_tokens filter tokens.
std::vector<FunctionRecord> filter_functions(std::vector<FunctionRecord> records,
                                             std::size_t max_tokens = 150);

// Seeded Fisher-Yates over the id-sorted record set; the last valid_size +
// test_size positions become the valid and test splits.
CorpusSplit split_corpus(std::vector<FunctionRecord> records, std::size_t valid_size,
                         std::size_t test_size, std::uint64_t seed);

// Reads intent-snippet records (JSON array or one JSON object per line):
// {"question_id","intent","snippet","prob"?,"curated"?}. Curated records are
// always retained; mined records keep the top_n highest confidences.
std::vector<IntentSnippetRecord> parse_intent_snippets(std::istream& source,
                                                       std::size_t top_n,
                                                       ParseDiagnostics& diag);

// ---------------------------------------------------------------------------
// Canonical corpus directory: functions_<split>.jsonl + intents.jsonl, each
// preceded by a {"format": ...} header line.
// ---------------------------------------------------------------------------

void write_function_records(const std::vector<FunctionRecord>& records,
                            const std::string& path);
std::vector<FunctionRecord> load_function_records(const std::string& path);

void write_intent_records(const std::vector<IntentSnippetRecord>& records,
                          const std::string& path);
std::vector<IntentSnippetRecord> load_intent_records(const std::string& path);

struct CorpusDir {
    CorpusSplit functions;
    std::vector<IntentSnippetRecord> intents;
};

void write_corpus_dir(const CorpusDir& corpus, const std::string& dir);
CorpusDir load_corpus_dir(const std::string& dir);

}  // namespace retkit::corpus
