#include "retkit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "retkit/common.hpp"
#include "retkit/train.hpp"

namespace retkit::pipeline {

using nlohmann::json;

// ---------------------------------------------------------------------------
// INI config
// ---------------------------------------------------------------------------

IniFile IniFile::parse(const std::string& text) {
    IniFile ini;
    std::string section;
    for (const auto& raw : split_lines(text)) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            if (!ini.sections_.count(section)) {
                ini.section_order_.push_back(section);
                ini.sections_[section] = {};
            }
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw data_error("config line without '=': " + raw);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (!ini.sections_.count(section)) {
            ini.section_order_.push_back(section);
            ini.sections_[section] = {};
        }
        ini.sections_[section].emplace_back(key, value);
    }
    return ini;
}

IniFile IniFile::load(const std::string& path) { return parse(read_text_file(path)); }

std::string IniFile::get(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return fallback;
    for (auto rit = it->second.rbegin(); rit != it->second.rend(); ++rit) {
        if (rit->first == key) return rit->second;
    }
    return fallback;
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
    std::string v = get(section, key, "");
    if (v.empty()) return fallback;
    try {
        return std::stod(v);
    } catch (...) {
        throw data_error("config [" + section + "] " + key + ": not a number: " + v);
    }
}

std::int64_t IniFile::get_int(const std::string& section, const std::string& key,
                              std::int64_t fallback) const {
    std::string v = get(section, key, "");
    if (v.empty()) return fallback;
    try {
        return std::stoll(v);
    } catch (...) {
        throw data_error("config [" + section + "] " + key + ": not an integer: " + v);
    }
}

void IniFile::set(const std::string& section, const std::string& key,
                  const std::string& value) {
    if (!sections_.count(section)) {
        section_order_.push_back(section);
        sections_[section] = {};
    }
    for (auto& [k, v] : sections_[section]) {
        if (k == key) {
            v = value;
            return;
        }
    }
    sections_[section].emplace_back(key, value);
}

std::string IniFile::serialize() const {
    std::ostringstream out;
    out << "# retkit config v1\n";
    for (const auto& section : section_order_) {
        out << "[" << section << "]\n";
        for (const auto& [k, v] : sections_.at(section)) out << k << " = " << v << "\n";
    }
    return out.str();
}

PipelineConfig PipelineConfig::from_ini(const IniFile& ini) {
    PipelineConfig cfg;
    cfg.functions_path = ini.get("paths", "functions", "");
    cfg.intents_path = ini.get("paths", "intents", "");
    cfg.out_dir = ini.get("paths", "out", "out");
    if (cfg.functions_path.empty()) throw data_error("config: [paths] functions is required");

    cfg.max_tokens = static_cast<std::size_t>(ini.get_int("corpus", "max_tokens", 150));
    cfg.intents_top_n = static_cast<std::size_t>(ini.get_int("corpus", "top_n", 100000));
    cfg.valid_size = static_cast<std::size_t>(ini.get_int("corpus", "valid", 1000));
    cfg.test_size = static_cast<std::size_t>(ini.get_int("corpus", "test", 1000));

    cfg.bpe_vocab = static_cast<std::size_t>(ini.get_int("tokenize", "bpe_vocab", 10000));
    cfg.code_vocab = static_cast<std::size_t>(ini.get_int("tokenize", "code_vocab", 10000));

    cfg.trainer.batch_size = static_cast<std::size_t>(ini.get_int("train", "batch_size", 256));
    cfg.trainer.lr = ini.get_double("train", "lr", 1e-3);
    cfg.trainer.epochs = static_cast<std::size_t>(ini.get_int("train", "epochs", 10));
    std::string opt = ini.get("train", "optimizer", "adam");
    if (opt == "adam") cfg.trainer.optimizer = train::Optimizer::adam;
    else if (opt == "sgd") cfg.trainer.optimizer = train::Optimizer::sgd;
    else throw data_error("config: unknown optimizer " + opt);
    cfg.trainer.max_query_len =
        static_cast<std::size_t>(ini.get_int("train", "max_query_len", 30));
    cfg.trainer.max_code_len =
        static_cast<std::size_t>(ini.get_int("train", "max_code_len", 200));
    std::string fusion = ini.get("train", "fusion", "full");
    if (fusion == "full") cfg.trainer.fusion = train::FusionMode::full;
    else if (fusion == "mean_only") cfg.trainer.fusion = train::FusionMode::mean_only;
    else throw data_error("config: unknown fusion mode " + fusion);

    cfg.n_trees = static_cast<std::size_t>(ini.get_int("index", "trees", 1000));
    cfg.leaf_size = static_cast<std::size_t>(ini.get_int("index", "leaf", 64));
    cfg.search_k = static_cast<std::size_t>(ini.get_int("index", "search_k", 10000));

    cfg.k = static_cast<std::size_t>(ini.get_int("retrieve", "k", 10));
    cfg.mmr_lambda = ini.get_double("retrieve", "lambda", 0.5);
    cfg.candidate_pool =
        static_cast<std::size_t>(ini.get_int("retrieve", "candidate_pool", 100));

    cfg.window = static_cast<std::size_t>(ini.get_int("pack", "window", 1024));

    cfg.seed = static_cast<std::uint64_t>(ini.get_int("global", "seed", 1));
    cfg.threads = static_cast<std::size_t>(ini.get_int("global", "threads", 1));
    cfg.trainer.seed = cfg.seed;

    for (const auto& mode : retrieval_modes()) {
        std::string path = ini.get("eval", "hyps_" + mode, "");
        if (!path.empty()) cfg.hypothesis_files[mode] = path;
    }
    return cfg;
}

IniFile PipelineConfig::to_ini() const {
    IniFile ini;
    ini.set("paths", "functions", functions_path);
    ini.set("paths", "intents", intents_path);
    ini.set("paths", "out", out_dir);
    ini.set("corpus", "max_tokens", std::to_string(max_tokens));
    ini.set("corpus", "top_n", std::to_string(intents_top_n));
    ini.set("corpus", "valid", std::to_string(valid_size));
    ini.set("corpus", "test", std::to_string(test_size));
    ini.set("tokenize", "bpe_vocab", std::to_string(bpe_vocab));
    ini.set("tokenize", "code_vocab", std::to_string(code_vocab));
    ini.set("train", "batch_size", std::to_string(trainer.batch_size));
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", trainer.lr);
        ini.set("train", "lr", buf);
    }
    ini.set("train", "epochs", std::to_string(trainer.epochs));
    ini.set("train", "optimizer",
            trainer.optimizer == train::Optimizer::adam ? "adam" : "sgd");
    ini.set("train", "max_query_len", std::to_string(trainer.max_query_len));
    ini.set("train", "max_code_len", std::to_string(trainer.max_code_len));
    ini.set("train", "fusion",
            trainer.fusion == train::FusionMode::full ? "full" : "mean_only");
    ini.set("index", "trees", std::to_string(n_trees));
    ini.set("index", "leaf", std::to_string(leaf_size));
    ini.set("index", "search_k", std::to_string(search_k));
    ini.set("retrieve", "k", std::to_string(k));
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", mmr_lambda);
        ini.set("retrieve", "lambda", buf);
    }
    ini.set("retrieve", "candidate_pool", std::to_string(candidate_pool));
    ini.set("pack", "window", std::to_string(window));
    ini.set("global", "seed", std::to_string(seed));
    ini.set("global", "threads", std::to_string(threads));
    for (const auto& [mode, path] : hypothesis_files) {
        ini.set("eval", "hyps_" + mode, path);
    }
    return ini;
}

// ---------------------------------------------------------------------------
// Artifact IO
// ---------------------------------------------------------------------------

void save_retrieval_run(const RetrievalRun& run, const std::string& path) {
    std::ostringstream out;
    out << json{{"format", "retrieval v1"}, {"mode", run.mode}, {"count", run.per_query.size()}}
               .dump()
        << "\n";
    for (const auto& [query_id, results] : run.per_query) {
        json arr = json::array();
        for (const auto& r : results) arr.push_back(json::array({r.doc_id, r.relevance}));
        out << json{{"query_id", query_id}, {"results", arr}}.dump() << "\n";
    }
    write_text_file(path, out.str());
}

RetrievalRun load_retrieval_run(const std::string& path) {
    auto lines = split_lines(read_text_file(path));
    if (lines.empty()) throw data_error("empty retrieval file: " + path);
    json header = json::parse(lines[0], nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "retrieval v1") {
        throw data_error("not a retrieval file: " + path);
    }
    RetrievalRun run;
    run.mode = header.value("mode", "");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        json obj = json::parse(lines[i]);
        std::vector<retrieve::SearchResult> results;
        for (const auto& entry : obj.at("results")) {
            results.push_back({entry.at(0).get<std::string>(), entry.at(1).get<double>(), 0});
        }
        retrieve::assign_ranks(results);
        run.per_query[obj.at("query_id").get<std::string>()] = std::move(results);
    }
    return run;
}

void save_packed_records(const std::vector<PackedRecord>& records, const std::string& mode,
                         const std::string& path) {
    std::ostringstream out;
    out << json{{"format", "packed v1"}, {"mode", mode}, {"count", records.size()}}.dump()
        << "\n";
    for (const auto& rec : records) {
        json spans = json::array();
        for (const auto& span : rec.context.provenance) {
            spans.push_back(json::array(
                {span.begin, span.end,
                 span.source == pack::SpanSource::query ? "query" : "retrieved",
                 span.doc_id}));
        }
        out << json{{"query_id", rec.query_id},
                    {"context_text", rec.context.context_text},
                    {"n_tokens", rec.context.token_ids.size()},
                    {"provenance", spans},
                    {"n_retrieved", rec.context.n_retrieved},
                    {"target_body", rec.target_body}}
                   .dump()
            << "\n";
    }
    write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

namespace fs = std::filesystem;

std::vector<train::TrainPair> make_train_pairs(const embed::EncodingContext& ctx,
                                               const std::vector<corpus::FunctionRecord>& recs) {
    std::vector<train::TrainPair> pairs;
    pairs.reserve(recs.size());
    for (const auto& r : recs) {
        train::TrainPair p;
        p.query_ids = ctx.bpe.encode(r.docstring);
        p.code_ids = ctx.code_vocab.encode(embed::document_code_text(r));
        pairs.push_back(std::move(p));
    }
    return pairs;
}

using RowIndex = std::unordered_map<std::string, Eigen::Index>;

RowIndex build_row_index(const index::VectorStore& store) {
    RowIndex rows;
    rows.reserve(store.ids.size());
    for (std::size_t i = 0; i < store.ids.size(); ++i) {
        rows[store.ids[i]] = static_cast<Eigen::Index>(i);
    }
    return rows;
}

// Ranking of an eval store for one encoded query under a retrieval mode.
std::vector<retrieve::SearchResult> run_mode_query(
    const std::string& mode, const index::VecF& qvec, const index::RpForest& forest,
    const index::VectorStore& store, const RowIndex& row_of, const PipelineConfig& cfg,
    double theta, std::uint64_t random_seed) {
    std::vector<retrieve::SearchResult> results;
    auto to_results = [](const std::vector<index::ScoredId>& scored) {
        std::vector<retrieve::SearchResult> out;
        out.reserve(scored.size());
        for (const auto& s : scored) {
            // cosine = 1 - d^2/2 for angular distance d on unit vectors
            out.push_back({s.id, 1.0 - s.distance * s.distance / 2.0, 0});
        }
        retrieve::assign_ranks(out);
        return out;
    };

    std::size_t n = static_cast<std::size_t>(store.size());
    std::size_t search_k = std::min(cfg.search_k, n);
    search_k = std::max(search_k, cfg.k);

    if (mode == "none") {
        return results;
    }
    if (mode == "single" || mode == "threshold") {
        auto top = to_results(index::ann_search(forest, store, qvec, 1, search_k));
        if (top.empty()) return results;
        if (mode == "single") return {top[0]};
        return retrieve::threshold_retrieve(top[0], theta);
    }
    if (mode == "full") {
        return to_results(
            index::ann_search(forest, store, qvec, std::min(cfg.k, n), search_k));
    }
    if (mode == "mmr") {
        std::size_t pool = std::min(cfg.candidate_pool, n);
        auto scored = index::ann_search(forest, store, qvec, pool,
                                        std::max(search_k, pool));
        std::vector<retrieve::Candidate> candidates;
        std::unordered_map<std::string, double> rel;
        candidates.reserve(scored.size());
        for (const auto& s : scored) {
            candidates.push_back({s.id, store.vectors.row(row_of.at(s.id)).transpose()});
            rel[s.id] = 1.0 - s.distance * s.distance / 2.0;
        }
        retrieve::MmrConfig mmr_cfg;
        mmr_cfg.lambda = cfg.mmr_lambda;
        mmr_cfg.m = std::min(cfg.k, candidates.size());
        mmr_cfg.candidate_pool = pool;
        auto picked = retrieve::mmr_rerank(qvec, candidates, mmr_cfg);
        for (const auto& id : picked) results.push_back({id, rel[id], 0});
        retrieve::assign_ranks(results);
        return results;
    }
    if (mode == "random") {
        auto ids = retrieve::random_retrieve(store.ids, std::min(cfg.k, n), random_seed);
        for (const auto& id : ids) results.push_back({id, 0.0, 0});
        retrieve::assign_ranks(results);
        return results;
    }
    throw internal_error("run_mode_query: unhandled mode " + mode);
}

}  // namespace

eval::EvalReport run_pipeline(const PipelineConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    auto out_path = [&](const std::string& name) { return cfg.out_dir + "/" + name; };

    write_text_file(out_path("config.effective.ini"), cfg.to_ini().serialize());

    // ---- ingest ------------------------------------------------------------
    std::cerr << "[pipeline] ingest\n";
    corpus::ParseDiagnostics diag;
    corpus::CorpusDir dir;
    {
        std::ifstream in(cfg.functions_path);
        if (!in) throw data_error("cannot open functions file: " + cfg.functions_path);
        auto records = corpus::parse_function_corpus(in, diag);
        auto filtered = corpus::filter_functions(std::move(records), cfg.max_tokens);
        dir.functions =
            corpus::split_corpus(std::move(filtered), cfg.valid_size, cfg.test_size, cfg.seed);
    }
    if (!cfg.intents_path.empty()) {
        std::ifstream in(cfg.intents_path);
        if (!in) throw data_error("cannot open intents file: " + cfg.intents_path);
        dir.intents = corpus::parse_intent_snippets(in, cfg.intents_top_n, diag);
    }
    write_corpus_dir(dir, out_path("corpus"));
    std::cerr << "[pipeline]   train/valid/test = " << dir.functions.train.size() << "/"
              << dir.functions.valid.size() << "/" << dir.functions.test.size()
              << ", skipped " << diag.skipped_malformed << ", no-docstring "
              << diag.dropped_no_docstring << "\n";

    // ---- tokenize ----------------------------------------------------------
    std::cerr << "[pipeline] tokenize\n";
    embed::EncodingContext ctx;
    {
        std::vector<std::string> docstrings, code_texts;
        for (const auto& r : dir.functions.train) {
            docstrings.push_back(r.docstring);
            code_texts.push_back(embed::document_code_text(r));
        }
        ctx.bpe = tok::train_bpe(docstrings, cfg.bpe_vocab);
        ctx.bpe.save(out_path("bpe.txt"));
        ctx.code_vocab = tok::SubtokenVocab::build(code_texts, cfg.code_vocab);
    }

    // ---- train -------------------------------------------------------------
    std::cerr << "[pipeline] train\n";
    {
        auto pairs = make_train_pairs(ctx, dir.functions.train);
        auto trained = train::train_retriever(cfg.trainer, pairs, ctx.bpe.vocab_size(),
                                              ctx.code_vocab.size());
        ctx.query_params = std::move(trained.query_params);
        ctx.code_params = std::move(trained.code_params);
        train::save_loss_curve(trained.epoch_losses, out_path("loss_curve.csv"));
    }
    embed::save_encoder_bundle(ctx, out_path("encoder"));

    // ---- embed + index (database = training split only) ---------------------
    std::cerr << "[pipeline] embed + index\n";
    auto db = embed::embed_functions(ctx, dir.functions.train);
    for (const auto& id : db.rejected_ids) {
        std::cerr << "[pipeline]   rejected zero-vector document " << id << "\n";
    }
    index::export_embeddings(db.store, out_path("db.emb"));
    index::AnnConfig ann_cfg{cfg.n_trees, cfg.search_k};
    auto forest = index::build_forest(db.store, ann_cfg, cfg.leaf_size, cfg.seed, cfg.threads);
    index::save_index(forest, db.store, out_path("db.rpf"));

    // threshold over training-query top-1 scores, target-identical retrievals
    // excluded (training mode)
    double theta = 0.0;
    {
        std::unordered_map<std::string, std::vector<std::string>> tokens_by_id;
        for (const auto& r : dir.functions.train) {
            tokens_by_id[r.id] = tok::tokenize_code(
                r.signature + "\n" + r.docstring + "\n" + r.body,
                {tok::CodeTokenMode::filter, false});
        }
        auto doc_tokens =
            [&](const std::string& id) -> const std::vector<std::string>& {
            return tokens_by_id.at(id);
        };
        std::vector<double> top1_scores;
        std::size_t search_k = std::max(std::min(cfg.search_k,
                                                 static_cast<std::size_t>(db.store.size())),
                                        std::size_t{2});
        for (const auto& r : dir.functions.train) {
            index::VecF qvec;
            try {
                qvec = embed::encode_query(ctx, r.docstring);
            } catch (const Error&) {
                continue;
            }
            auto scored = index::ann_search(forest, db.store, qvec, 2, search_k);
            std::vector<retrieve::SearchResult> results;
            for (const auto& s : scored) {
                results.push_back({s.id, 1.0 - s.distance * s.distance / 2.0, 0});
            }
            retrieve::assign_ranks(results);
            auto deduped = retrieve::dedupe_target(results, tokens_by_id.at(r.id), doc_tokens);
            if (!deduped.empty()) top1_scores.push_back(deduped[0].relevance);
        }
        theta = retrieve::compute_threshold(top1_scores);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "# threshold v1\n%.12g\n", theta);
        write_text_file(out_path("threshold.txt"), buf);
    }

    // ---- retrieve + pack (test queries against the training database) -------
    std::cerr << "[pipeline] retrieve + pack\n";
    retrieve::Bm25Index bm25;
    {
        std::vector<std::string> ids;
        std::vector<std::vector<std::string>> toks;
        for (const auto& r : dir.functions.train) {
            ids.push_back(r.id);
            toks.push_back(tok::tokenize_code(r.docstring + "\n" + r.signature + "\n" + r.body,
                                              {tok::CodeTokenMode::filter, false}));
        }
        bm25 = retrieve::build_bm25_index(ids, toks);
    }
    std::unordered_map<std::string, const corpus::FunctionRecord*> train_by_id;
    for (const auto& r : dir.functions.train) train_by_id[r.id] = &r;

    std::map<std::string, RetrievalRun> runs;
    for (const auto& mode : retrieval_modes()) runs[mode].mode = mode;
    RowIndex db_rows = build_row_index(db.store);

    for (const auto& r : dir.functions.test) {
        index::VecF qvec;
        bool have_vec = true;
        try {
            qvec = embed::encode_query(ctx, r.docstring);
        } catch (const Error&) {
            std::cerr << "[pipeline]   query " << r.id << " has no usable encoding\n";
            have_vec = false;
        }
        for (const auto& mode : retrieval_modes()) {
            if (mode == "bm25") {
                auto qtokens =
                    tok::tokenize_code(r.docstring, {tok::CodeTokenMode::filter, false});
                runs[mode].per_query[r.id] = retrieve::bm25_search(bm25, qtokens, cfg.k);
            } else if (!have_vec) {
                runs[mode].per_query[r.id] = {};
            } else {
                std::uint64_t rseed = cfg.seed ^ stable_hash64(r.id);
                runs[mode].per_query[r.id] = run_mode_query(mode, qvec, forest, db.store,
                                                            db_rows, cfg, theta, rseed);
            }
        }
    }
    for (const auto& mode : retrieval_modes()) {
        save_retrieval_run(runs[mode], out_path("retrieval_" + mode + ".jsonl"));
    }

    std::map<std::string, std::vector<PackedRecord>> packed_by_mode;
    for (const auto& mode : retrieval_modes()) {
        pack::PackConfig pack_cfg;
        pack_cfg.window = cfg.window;
        pack_cfg.mode = mode == "bm25" ? pack::PackMode::full : pack::pack_mode_from_name(mode);
        std::vector<PackedRecord> packed;
        for (const auto& r : dir.functions.test) {
            std::vector<pack::RenderedDoc> docs;
            for (const auto& res : runs[mode].per_query[r.id]) {
                auto it = train_by_id.find(res.doc_id);
                if (it == train_by_id.end()) continue;
                docs.push_back({res.doc_id, pack::render_document(*it->second)});
            }
            std::string query_text = pack::render_query(r.signature, r.docstring);
            try {
                PackedRecord rec;
                rec.query_id = r.id;
                rec.context = pack::pack_context(query_text, docs, ctx.bpe, pack_cfg);
                rec.target_body = r.body;
                packed.push_back(std::move(rec));
            } catch (const Error& e) {
                std::cerr << "[pipeline]   pack skipped " << r.id << ": " << e.what() << "\n";
            }
        }
        save_packed_records(packed, mode, out_path("packed_" + mode + ".jsonl"));
        packed_by_mode[mode] = std::move(packed);
    }

    // ---- eval ----------------------------------------------------------------
    // Retrieval metrics use the held-out pool (every test function is a
    // candidate, the gold document is the query's own function). Generation
    // metrics score externally supplied hypotheses when configured, else the
    // retrieve-and-copy baseline (body of the top retrieved template).
    std::cerr << "[pipeline] eval\n";
    eval::EvalReport report;
    auto eval_db = embed::embed_functions(ctx, dir.functions.test);
    index::AnnConfig eval_ann{cfg.n_trees, cfg.search_k};
    auto eval_forest =
        index::build_forest(eval_db.store, eval_ann, cfg.leaf_size, cfg.seed + 1, cfg.threads);
    retrieve::Bm25Index eval_bm25;
    {
        std::vector<std::string> ids;
        std::vector<std::vector<std::string>> toks;
        for (const auto& r : dir.functions.test) {
            ids.push_back(r.id);
            toks.push_back(tok::tokenize_code(r.docstring + "\n" + r.signature + "\n" + r.body,
                                              {tok::CodeTokenMode::filter, false}));
        }
        eval_bm25 = retrieve::build_bm25_index(ids, toks);
    }
    RowIndex eval_rows = build_row_index(eval_db.store);

    std::unordered_map<std::string, std::map<std::string, std::string>> external_hyps;
    for (const auto& [mode, path] : cfg.hypothesis_files) {
        auto lines = split_lines(read_text_file(path));
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (trim(lines[i]).empty() || lines[i][0] == '#') continue;
            json obj = json::parse(lines[i], nullptr, false);
            if (obj.is_discarded() || !obj.contains("query_id")) continue;
            external_hyps[mode][obj.at("query_id").get<std::string>()] =
                obj.value("hypothesis_text", "");
        }
    }

    for (const auto& mode : retrieval_modes()) {
        eval::EvalRow row;
        row.mode = mode;
        std::map<std::string, std::vector<std::string>> rankings;
        std::unordered_map<std::string, std::string> gold;
        double ndcg_sum = 0.0;
        std::size_t ndcg_n = 0;
        double bleu_bpe_sum = 0.0, bleu_word_sum = 0.0, edist_sum = 0.0, edist_raw_sum = 0.0;
        std::size_t n_queries = 0;

        for (const auto& r : dir.functions.test) {
            gold[r.id] = r.id;
            std::vector<retrieve::SearchResult> pool_results;
            if (mode == "bm25") {
                auto qtokens =
                    tok::tokenize_code(r.docstring, {tok::CodeTokenMode::filter, false});
                pool_results = retrieve::bm25_search(eval_bm25, qtokens, cfg.k);
            } else {
                try {
                    auto qvec = embed::encode_query(ctx, r.docstring);
                    std::uint64_t rseed = cfg.seed ^ stable_hash64(r.id);
                    pool_results = run_mode_query(mode, qvec, eval_forest, eval_db.store,
                                                  eval_rows, cfg, theta, rseed);
                } catch (const Error&) {
                    pool_results = {};
                }
            }
            std::vector<std::string> ranking;
            for (const auto& res : pool_results) ranking.push_back(res.doc_id);
            rankings[r.id] = ranking;
            // binary gold: the query's own function
            ndcg_sum += eval::ndcg(ranking, {{r.id, r.id, 1.0}}, cfg.k);
            ++ndcg_n;

            // hypothesis: external file if given, else retrieve-and-copy from
            // the training-database run for this mode
            std::string hyp_text;
            auto ext_mode = external_hyps.find(mode);
            if (ext_mode != external_hyps.end()) {
                auto it = ext_mode->second.find(r.id);
                if (it != ext_mode->second.end()) hyp_text = it->second;
            } else {
                const auto& train_results = runs[mode].per_query[r.id];
                if (!train_results.empty()) {
                    auto it = train_by_id.find(train_results[0].doc_id);
                    if (it != train_by_id.end()) hyp_text = it->second->body;
                }
            }
            auto hyp_word =
                tok::tokenize_code(hyp_text, {tok::CodeTokenMode::filter, false});
            auto ref_word = tok::tokenize_code(r.body, {tok::CodeTokenMode::filter, false});
            if (!ref_word.empty()) {
                bleu_word_sum += eval::bleu4(hyp_word, ref_word);
                auto hyp_ids = ctx.bpe.encode(hyp_text);
                auto ref_ids = ctx.bpe.encode(r.body);
                std::vector<std::string> hyp_bpe, ref_bpe;
                for (auto id : hyp_ids) hyp_bpe.push_back(ctx.bpe.token(id));
                for (auto id : ref_ids) ref_bpe.push_back(ctx.bpe.token(id));
                bleu_bpe_sum += eval::bleu4(hyp_bpe, ref_bpe);
                auto ed = eval::token_edit_distance(hyp_word, ref_word);
                edist_sum += ed.normalized;
                edist_raw_sum += static_cast<double>(ed.raw);
                ++n_queries;
            }
        }
        row.mrr = eval::mrr(rankings, gold);
        row.ndcg = ndcg_n > 0 ? ndcg_sum / static_cast<double>(ndcg_n) : 0.0;
        row.bleu4_bpe = n_queries > 0 ? bleu_bpe_sum / static_cast<double>(n_queries) : 0.0;
        row.bleu4_word = n_queries > 0 ? bleu_word_sum / static_cast<double>(n_queries) : 0.0;
        row.edit_distance_mean =
            n_queries > 0 ? edist_sum / static_cast<double>(n_queries) : 0.0;
        row.edit_distance_raw_mean =
            n_queries > 0 ? edist_raw_sum / static_cast<double>(n_queries) : 0.0;
        row.n_queries = n_queries;
        report.rows.push_back(std::move(row));
    }

    eval::save_report(report, out_path("report.txt"), out_path("report.jsonl"));
    std::cerr << eval::render_report(report);
    return report;
}

}  // namespace retkit::pipeline
