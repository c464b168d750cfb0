#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "retkit/embed.hpp"
#include "retkit/eval.hpp"
#include "retkit/pack.hpp"
#include "retkit/retrieve.hpp"
#include "retkit/train.hpp"

namespace retkit::pipeline {

// Minimal INI-style config: "[section]" lines then "key = value" lines,
// '#' comments. Sections and keys keep insertion order on write.
class IniFile {
public:
    static IniFile parse(const std::string& text);
    static IniFile load(const std::string& path);

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    void set(const std::string& section, const std::string& key, const std::string& value);

    std::string serialize() const;

private:
    std::vector<std::string> section_order_;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
};

// Typed pipeline configuration with every module default overridable.
struct PipelineConfig {
    std::string functions_path;
    std::string intents_path;
    std::string out_dir;

    std::size_t max_tokens = 150;
    std::size_t intents_top_n = 100000;
    std::size_t valid_size = 1000;
    std::size_t test_size = 1000;

    std::size_t bpe_vocab = 10000;
    std::size_t code_vocab = 10000;

    train::TrainConfig trainer;

    std::size_t n_trees = 1000;
    std::size_t leaf_size = 64;
    std::size_t search_k = 10000;

    std::size_t k = 10;
    double mmr_lambda = 0.5;
    std::size_t candidate_pool = 100;

    std::size_t window = 1024;

    std::uint64_t seed = 1;
    std::size_t threads = 1;

    // optional externally produced hypotheses, keyed by retrieval mode
    std::map<std::string, std::string> hypothesis_files;

    static PipelineConfig from_ini(const IniFile& ini);
    IniFile to_ini() const;
};

// Line-delimited retrieval artifact: one ranked result list per query.
struct RetrievalRun {
    std::string mode;
    std::map<std::string, std::vector<retrieve::SearchResult>> per_query;
};

void save_retrieval_run(const RetrievalRun& run, const std::string& path);
RetrievalRun load_retrieval_run(const std::string& path);

struct PackedRecord {
    std::string query_id;
    pack::PackedContext context;
    std::string target_body;
};

void save_packed_records(const std::vector<PackedRecord>& records, const std::string& mode,
                         const std::string& path);

inline const std::vector<std::string>& retrieval_modes() {
    static const std::vector<std::string> modes = {"none",   "threshold", "single", "full",
                                                   "mmr",    "random",    "bm25"};
    return modes;
}

// Runs ingest -> tokenize -> train -> embed -> index -> retrieve -> pack ->
// eval, writing every intermediate artifact under cfg.out_dir. Returns the
// final report.
eval::EvalReport run_pipeline(const PipelineConfig& cfg);

}  // namespace retkit::pipeline
