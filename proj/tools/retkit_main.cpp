// retkit: train, index, and serve a docstring->code retrieval pipeline.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "retkit/common.hpp"
#include "retkit/corpus.hpp"
#include "retkit/embed.hpp"
#include "retkit/eval.hpp"
#include "retkit/index.hpp"
#include "retkit/pack.hpp"
#include "retkit/pipeline.hpp"
#include "retkit/retrieve.hpp"
#include "retkit/service.hpp"
#include "retkit/sofa.hpp"
#include "retkit/tokenize.hpp"
#include "retkit/train.hpp"

using namespace retkit;
using nlohmann::json;

namespace {

struct QueryText {
    std::string id;
    std::string text;
};

// Query file: either an embedding file ("emb v1 ..."), or JSONL records with
// {"query_id", "docstring"}.
std::vector<QueryText> load_query_texts(const std::string& path) {
    std::vector<QueryText> out;
    for (const auto& line : split_lines(read_text_file(path))) {
        if (trim(line).empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) continue;
        if (obj.contains("format")) continue;  // header line
        if (!obj.contains("query_id")) continue;
        out.push_back({obj.at("query_id").get<std::string>(), obj.value("docstring", "")});
    }
    if (out.empty()) throw data_error("no queries found in " + path);
    return out;
}

std::vector<corpus::FunctionRecord> all_functions(const corpus::CorpusDir& dir) {
    std::vector<corpus::FunctionRecord> all = dir.functions.train;
    all.insert(all.end(), dir.functions.valid.begin(), dir.functions.valid.end());
    all.insert(all.end(), dir.functions.test.begin(), dir.functions.test.end());
    return all;
}

std::vector<std::string> filter_tokens_of(const corpus::FunctionRecord& r) {
    return tok::tokenize_code(r.signature + "\n" + r.docstring + "\n" + r.body,
                              {tok::CodeTokenMode::filter, false});
}

int run_corpus_ingest(const std::string& functions, const std::string& intents,
                      const std::string& out, std::size_t max_tokens, std::size_t top_n,
                      std::size_t valid, std::size_t test, std::uint64_t seed) {
    corpus::ParseDiagnostics diag;
    corpus::CorpusDir dir;
    {
        std::ifstream in(functions);
        if (!in) throw data_error("cannot open " + functions);
        auto records = corpus::parse_function_corpus(in, diag);
        auto filtered = corpus::filter_functions(std::move(records), max_tokens);
        dir.functions = corpus::split_corpus(std::move(filtered), valid, test, seed);
    }
    if (!intents.empty()) {
        std::ifstream in(intents);
        if (!in) throw data_error("cannot open " + intents);
        dir.intents = corpus::parse_intent_snippets(in, top_n, diag);
    }
    corpus::write_corpus_dir(dir, out);
    std::cerr << "ingested " << diag.lines_read << " lines: train "
              << dir.functions.train.size() << ", valid " << dir.functions.valid.size()
              << ", test " << dir.functions.test.size() << ", intents "
              << dir.intents.size() << " (skipped " << diag.skipped_malformed
              << " malformed, " << diag.dropped_no_docstring << " without docstring)\n";
    return 0;
}

train::TrainConfig train_config_from_file(const std::string& path) {
    train::TrainConfig cfg;
    if (path.empty()) return cfg;
    auto ini = pipeline::IniFile::load(path);
    auto get_int = [&](const std::string& key, std::int64_t fallback) {
        return ini.get_int("train", key, ini.get_int("", key, fallback));
    };
    auto get_double = [&](const std::string& key, double fallback) {
        return ini.get_double("train", key, ini.get_double("", key, fallback));
    };
    auto get = [&](const std::string& key, const std::string& fallback) {
        return ini.get("train", key, ini.get("", key, fallback));
    };
    cfg.batch_size = static_cast<std::size_t>(get_int("batch_size", 256));
    cfg.lr = get_double("lr", 1e-3);
    cfg.epochs = static_cast<std::size_t>(get_int("epochs", 10));
    cfg.seed = static_cast<std::uint64_t>(get_int("seed", 1));
    std::string opt = get("optimizer", "adam");
    if (opt == "adam") cfg.optimizer = train::Optimizer::adam;
    else if (opt == "sgd") cfg.optimizer = train::Optimizer::sgd;
    else throw data_error("unknown optimizer: " + opt);
    cfg.max_query_len = static_cast<std::size_t>(get_int("max_query_len", 30));
    cfg.max_code_len = static_cast<std::size_t>(get_int("max_code_len", 200));
    std::string fusion = get("fusion", "full");
    if (fusion == "full") cfg.fusion = train::FusionMode::full;
    else if (fusion == "mean_only") cfg.fusion = train::FusionMode::mean_only;
    else throw data_error("unknown fusion mode: " + fusion);
    cfg.symmetric_loss = get("symmetric_loss", "false") == "true";
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic code retrieval toolkit"};
    app.require_subcommand(1);

    // ---- corpus -------------------------------------------------------------
    auto* corpus_cmd = app.add_subcommand("corpus", "ingest and split corpora");
    auto* ingest = corpus_cmd->add_subcommand("ingest", "parse, filter, and split");
    std::string functions_path, intents_path, out_dir;
    std::size_t max_tokens = 150, top_n = 100000, valid_size = 1000, test_size = 1000;
    std::uint64_t seed = 1;
    ingest->add_option("--functions", functions_path)->required();
    ingest->add_option("--intents", intents_path);
    ingest->add_option("--out", out_dir)->required();
    ingest->add_option("--max-tokens", max_tokens);
    ingest->add_option("--top-n", top_n);
    ingest->add_option("--valid", valid_size);
    ingest->add_option("--test", test_size);
    ingest->add_option("--seed", seed);

    // ---- tok ----------------------------------------------------------------
    auto* tok_cmd = app.add_subcommand("tok", "tokenizers");
    auto* train_bpe_cmd = tok_cmd->add_subcommand("train-bpe", "train a BPE model");
    std::string tok_in, tok_out, tok_model, tok_text;
    std::size_t bpe_vocab = 10000;
    train_bpe_cmd->add_option("--in", tok_in, "text file, one document per line")->required();
    train_bpe_cmd->add_option("--vocab", bpe_vocab);
    train_bpe_cmd->add_option("--out", tok_out)->required();
    auto* encode_cmd = tok_cmd->add_subcommand("encode", "encode text with a BPE model");
    encode_cmd->add_option("--model", tok_model)->required();
    encode_cmd->add_option("--text", tok_text);
    encode_cmd->add_option("--in", tok_in, "file of lines to encode");

    // ---- train ----------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "contrastive bi-encoder training");
    std::string train_corpus, train_config_path, train_out, train_bpe_path;
    std::string train_task = "retriever", sofa_pairs_path, train_init_prefix;
    std::size_t negatives = 0;
    std::uint64_t negatives_seed = 99;
    train_cmd->add_option("--corpus", train_corpus)->required();
    train_cmd->add_option("--config", train_config_path);
    train_cmd->add_option("--out", train_out, "output parameter prefix")->required();
    train_cmd->add_option("--bpe", train_bpe_path, "pre-trained BPE model (else trained here)");
    train_cmd->add_option("--bpe-vocab", bpe_vocab);
    std::size_t code_vocab_size = 10000;
    train_cmd->add_option("--code-vocab", code_vocab_size);
    train_cmd->add_option("--task", train_task, "retriever | finetune");
    train_cmd->add_option("--sofa-pairs", sofa_pairs_path, "SOFA pairs for finetune");
    train_cmd->add_option("--init", train_init_prefix, "warm-start parameter prefix");
    train_cmd->add_option("--negatives", negatives, "explicit negatives per query");
    train_cmd->add_option("--negatives-seed", negatives_seed);

    // ---- index ----------------------------------------------------------------
    auto* index_cmd = app.add_subcommand("index", "embedding index");
    auto* index_embed = index_cmd->add_subcommand("embed", "encode a corpus into embeddings");
    std::string params_prefix, bpe_path, emb_path, idx_path, split_name = "train";
    std::string what = "functions";
    index_embed->add_option("--params", params_prefix)->required();
    index_embed->add_option("--bpe", bpe_path, "defaults to <params>.bpe");
    index_embed->add_option("--corpus", train_corpus)->required();
    index_embed->add_option("--split", split_name, "train | valid | test | all");
    index_embed->add_option("--what", what, "functions | intents");
    index_embed->add_option("--out", emb_path)->required();

    auto* index_build = index_cmd->add_subcommand("build", "build the RP forest");
    std::size_t n_trees = 1000, leaf_size = 64, search_k = 10000, k = 10;
    std::size_t threads = 1;
    index_build->add_option("--emb", emb_path)->required();
    index_build->add_option("--trees", n_trees);
    index_build->add_option("--leaf", leaf_size);
    index_build->add_option("--seed", seed);
    index_build->add_option("--threads", threads);
    index_build->add_option("--out", idx_path)->required();

    auto* index_query = index_cmd->add_subcommand("query", "query the index");
    std::string emb_query_path, query_text;
    index_query->add_option("--idx", idx_path)->required();
    index_query->add_option("--emb-query", emb_query_path, "embedding file of queries");
    index_query->add_option("--text", query_text, "encode one query (needs --params/--bpe)");
    index_query->add_option("--params", params_prefix);
    index_query->add_option("--bpe", bpe_path);
    index_query->add_option("--k", k);
    index_query->add_option("--search-k", search_k);
    index_query->add_option("--out", out_dir);

    // ---- retrieve --------------------------------------------------------------
    auto* retrieve_cmd = app.add_subcommand("retrieve", "run a retrieval policy");
    std::string mode = "full", queries_path, retrieve_out;
    double lambda = 0.5, theta = 0.0;
    bool theta_set = false, dedupe = false;
    std::size_t candidate_pool = 100;
    retrieve_cmd->add_option("--idx", idx_path);
    retrieve_cmd->add_option("--mode", mode)
        ->check(CLI::IsMember({"none", "single", "threshold", "full", "mmr", "random",
                               "bm25"}));
    retrieve_cmd->add_option("--k", k);
    retrieve_cmd->add_option("--lambda", lambda);
    bool mmr_additive = false;
    retrieve_cmd->add_flag("--mmr-additive", mmr_additive,
                           "use the additive redundancy term instead of subtracting");
    retrieve_cmd->add_option("--candidate-pool", candidate_pool);
    retrieve_cmd->add_option("--seed", seed);
    retrieve_cmd->add_option("--queries", queries_path)->required();
    retrieve_cmd->add_option("--out", retrieve_out)->required();
    retrieve_cmd->add_option("--corpus", train_corpus, "needed for bm25/threshold/dedupe");
    retrieve_cmd->add_option("--params", params_prefix);
    retrieve_cmd->add_option("--bpe", bpe_path);
    retrieve_cmd->add_option("--search-k", search_k);
    auto* theta_opt = retrieve_cmd->add_option("--theta", theta, "threshold override");
    retrieve_cmd->add_flag("--dedupe-target", dedupe,
                           "drop retrievals token-identical to the query target");

    // ---- pack ------------------------------------------------------------------
    auto* pack_cmd = app.add_subcommand("pack", "assemble generator contexts");
    std::string retrievals_path, pack_out, pack_mode = "full";
    std::size_t window = 1024;
    pack_cmd->add_option("--retrievals", retrievals_path)->required();
    pack_cmd->add_option("--corpus", train_corpus)->required();
    pack_cmd->add_option("--bpe", bpe_path)->required();
    pack_cmd->add_option("--window", window);
    pack_cmd->add_option("--mode", pack_mode);
    pack_cmd->add_option("--out", pack_out)->required();

    // ---- sofa ------------------------------------------------------------------
    auto* sofa_cmd = app.add_subcommand("sofa", "intent/function alignment dataset");
    auto* sofa_build = sofa_cmd->add_subcommand("build", "mine aligned pairs");
    std::string sofa_intents, sofa_functions_dir, sofa_out;
    std::size_t sofa_top_n = 10000, sofa_neighbors = 15;
    sofa_build->add_option("--intents", sofa_intents)->required();
    sofa_build->add_option("--functions", sofa_functions_dir, "corpus directory")->required();
    sofa_build->add_option("--top-n", sofa_top_n);
    sofa_build->add_option("--neighbors", sofa_neighbors);
    sofa_build->add_option("--threads", threads);
    sofa_build->add_option("--out", sofa_out)->required();
    auto* sofa_curate = sofa_cmd->add_subcommand("curate", "apply manual verdicts");
    std::string verdicts_path;
    sofa_curate->add_option("--pairs", sofa_pairs_path)->required();
    sofa_curate->add_option("--verdicts", verdicts_path)->required();
    sofa_curate->add_option("--out", sofa_out)->required();

    // ---- eval ------------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "metrics");
    auto* eval_retrieval = eval_cmd->add_subcommand("retrieval", "MRR/NDCG from rankings");
    std::string rankings_path, gold_path;
    eval_retrieval->add_option("--rankings", rankings_path)->required();
    eval_retrieval->add_option("--gold", gold_path)->required();
    eval_retrieval->add_option("--k", k);
    auto* eval_generation = eval_cmd->add_subcommand("generation", "BLEU/edit distance");
    std::string hyps_path;
    eval_generation->add_option("--hyps", hyps_path)->required();
    eval_generation->add_option("--refs", train_corpus, "corpus directory")->required();
    eval_generation->add_option("--bpe", bpe_path)->required();

    // ---- serve -----------------------------------------------------------------
    auto* serve_cmd = app.add_subcommand("serve", "HTTP retrieval service");
    int port = 8080;
    std::string host = "127.0.0.1";
    serve_cmd->add_option("--params", params_prefix)->required();
    serve_cmd->add_option("--bpe", bpe_path, "defaults to <params>.bpe");
    serve_cmd->add_option("--idx", idx_path)->required();
    serve_cmd->add_option("--corpus", train_corpus)->required();
    serve_cmd->add_option("--port", port);
    serve_cmd->add_option("--host", host);

    // ---- pipeline ---------------------------------------------------------------
    auto* pipeline_cmd = app.add_subcommand("pipeline", "end-to-end run from a config file");
    std::string config_path;
    std::vector<std::string> overrides;
    pipeline_cmd->add_option("--config", config_path)->required();
    pipeline_cmd->add_option("--set", overrides,
                             "override config entries as section.key=value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
    }

    if (bpe_path.empty() && !params_prefix.empty()) bpe_path = params_prefix + ".bpe";

    try {
        if (*ingest) {
            return run_corpus_ingest(functions_path, intents_path, out_dir, max_tokens, top_n,
                                     valid_size, test_size, seed);
        }
        if (*train_bpe_cmd) {
            auto texts = split_lines(read_text_file(tok_in));
            auto model = tok::train_bpe(texts, bpe_vocab);
            model.save(tok_out);
            std::cerr << "trained BPE: vocab " << model.vocab_size() << " ("
                      << model.merges().size() << " merges)\n";
            return 0;
        }
        if (*encode_cmd) {
            auto model = tok::BpeModel::load(tok_model);
            auto emit = [&](const std::string& text) {
                auto ids = model.encode(text);
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    std::cout << (i ? " " : "") << ids[i];
                }
                std::cout << "\n";
            };
            if (!tok_text.empty()) emit(tok_text);
            if (!tok_in.empty()) {
                for (const auto& line : split_lines(read_text_file(tok_in))) emit(line);
            }
            return 0;
        }
        if (*train_cmd) {
            auto cfg = train_config_from_file(train_config_path);
            auto dir = corpus::load_corpus_dir(train_corpus);

            embed::EncodingContext ctx;
            if (!train_bpe_path.empty()) {
                ctx.bpe = tok::BpeModel::load(train_bpe_path);
            } else {
                std::vector<std::string> docstrings;
                for (const auto& r : dir.functions.train) docstrings.push_back(r.docstring);
                ctx.bpe = tok::train_bpe(docstrings, bpe_vocab);
            }
            ctx.bpe.save(train_out + ".bpe");
            {
                std::vector<std::string> code_texts;
                for (const auto& r : dir.functions.train) {
                    code_texts.push_back(embed::document_code_text(r));
                }
                for (const auto& r : dir.intents) {
                    code_texts.push_back(embed::document_code_text(r));
                }
                ctx.code_vocab = tok::SubtokenVocab::build(code_texts, code_vocab_size);
            }

            std::vector<train::TrainPair> pairs;
            if (train_task == "retriever") {
                for (const auto& r : dir.functions.train) {
                    train::TrainPair p;
                    p.query_ids = ctx.bpe.encode(r.docstring);
                    p.code_ids = ctx.code_vocab.encode(embed::document_code_text(r));
                    pairs.push_back(std::move(p));
                }
            } else if (train_task == "finetune") {
                if (sofa_pairs_path.empty()) {
                    throw usage_error("--task finetune requires --sofa-pairs");
                }
                auto sofa_pairs = sofa::load_pairs(sofa_pairs_path);
                std::unordered_map<std::string, const corpus::FunctionRecord*> fn_by_id;
                for (const auto& r : dir.functions.train) fn_by_id[r.id] = &r;
                std::unordered_map<std::string, const corpus::IntentSnippetRecord*> in_by_id;
                std::vector<std::string> pool;
                for (const auto& r : dir.intents) {
                    in_by_id[r.id] = &r;
                    pool.push_back(r.id);
                }
                std::vector<std::pair<std::string, std::string>> positives;
                for (const auto& p : sofa::curated_subset(sofa_pairs)) {
                    if (fn_by_id.count(p.function_id) && in_by_id.count(p.intent_snippet_id)) {
                        positives.emplace_back(p.function_id, p.intent_snippet_id);
                    }
                }
                auto labeled =
                    train::sample_negatives(positives, pool, negatives, negatives_seed);
                std::unordered_map<std::string, train::TrainPair*> pair_of_query;
                for (const auto& row : labeled) {
                    const auto* fn = fn_by_id.at(row.query_id);
                    auto target_ids = ctx.code_vocab.encode(
                        embed::document_code_text(*in_by_id.at(row.target_id)));
                    if (row.positive) {
                        train::TrainPair p;
                        p.query_ids = ctx.bpe.encode(fn->docstring);
                        p.code_ids = std::move(target_ids);
                        pairs.push_back(std::move(p));
                        pair_of_query[row.query_id] = &pairs.back();
                    } else {
                        pair_of_query.at(row.query_id)
                            ->negative_code_ids.push_back(std::move(target_ids));
                    }
                }
            } else {
                throw usage_error("unknown --task: " + train_task);
            }

            train::TrainResult trained;
            if (!train_init_prefix.empty()) {
                auto init = embed::load_encoder_bundle(train_init_prefix,
                                                       train_out + ".bpe");
                trained = train::train_from(cfg, std::move(init.query_params),
                                            std::move(init.code_params), pairs);
            } else {
                trained = train::train_retriever(cfg, pairs, ctx.bpe.vocab_size(),
                                                 ctx.code_vocab.size());
            }
            ctx.query_params = std::move(trained.query_params);
            ctx.code_params = std::move(trained.code_params);
            embed::save_encoder_bundle(ctx, train_out);
            train::save_loss_curve(trained.epoch_losses, train_out + ".loss.csv");
            if (!trained.epoch_losses.empty()) {
                std::cerr << "final epoch loss " << trained.epoch_losses.back() << " over "
                          << pairs.size() << " pairs\n";
            }
            return 0;
        }
        if (*index_embed) {
            auto ctx = embed::load_encoder_bundle(params_prefix, bpe_path);
            auto dir = corpus::load_corpus_dir(train_corpus);
            embed::EmbedOutcome outcome;
            if (what == "intents") {
                outcome = embed::embed_intents(ctx, dir.intents);
            } else {
                std::vector<corpus::FunctionRecord> records;
                if (split_name == "train") records = dir.functions.train;
                else if (split_name == "valid") records = dir.functions.valid;
                else if (split_name == "test") records = dir.functions.test;
                else if (split_name == "all") records = all_functions(dir);
                else throw usage_error("unknown --split: " + split_name);
                outcome = embed::embed_functions(ctx, records);
            }
            for (const auto& id : outcome.rejected_ids) {
                std::cerr << "rejected zero-vector document " << id << "\n";
            }
            index::export_embeddings(outcome.store, emb_path);
            std::cerr << "wrote " << outcome.store.size() << " embeddings\n";
            return 0;
        }
        if (*index_build) {
            auto store = index::import_embeddings(emb_path);
            auto forest = index::build_forest(store, {n_trees, search_k}, leaf_size, seed,
                                              threads);
            index::save_index(forest, store, idx_path);
            std::cerr << "built " << n_trees << " trees over " << store.size()
                      << " vectors\n";
            return 0;
        }
        if (*index_query) {
            auto loaded = index::load_index(idx_path);
            pipeline::RetrievalRun run;
            run.mode = "topk";
            auto run_one = [&](const std::string& id, const index::VecF& qvec) {
                std::vector<retrieve::SearchResult> results;
                std::size_t n = static_cast<std::size_t>(loaded.store.size());
                auto scored = index::ann_search(loaded.forest, loaded.store, qvec,
                                                std::min(k, n),
                                                std::max(std::min(search_k, n), k));
                for (const auto& s : scored) {
                    results.push_back({s.id, 1.0 - s.distance * s.distance / 2.0, 0});
                }
                retrieve::assign_ranks(results);
                run.per_query[id] = std::move(results);
            };
            if (!emb_query_path.empty()) {
                auto queries = index::import_embeddings(emb_query_path);
                for (Eigen::Index r = 0; r < queries.size(); ++r) {
                    run_one(queries.ids[static_cast<std::size_t>(r)],
                            queries.vectors.row(r).transpose());
                }
            } else if (!query_text.empty()) {
                if (params_prefix.empty() || bpe_path.empty()) {
                    throw usage_error("--text needs --params and --bpe");
                }
                auto ctx = embed::load_encoder_bundle(params_prefix, bpe_path);
                run_one("query", embed::encode_query(ctx, query_text));
            } else {
                throw usage_error("provide --emb-query or --text");
            }
            if (out_dir.empty()) {
                for (const auto& [qid, results] : run.per_query) {
                    for (const auto& r : results) {
                        std::cout << qid << "\t" << r.rank << "\t" << r.doc_id << "\t"
                                  << r.relevance << "\n";
                    }
                }
            } else {
                pipeline::save_retrieval_run(run, out_dir);
            }
            return 0;
        }
        if (*retrieve_cmd) {
            theta_set = theta_opt->count() > 0;
            pipeline::PipelineConfig pcfg;
            pcfg.k = k;
            pcfg.mmr_lambda = lambda;
            pcfg.candidate_pool = candidate_pool;
            pcfg.search_k = search_k;
            pcfg.seed = seed;

            auto queries = load_query_texts(queries_path);
            pipeline::RetrievalRun run;
            run.mode = mode;

            corpus::CorpusDir dir;
            bool have_corpus = !train_corpus.empty();
            if (have_corpus) dir = corpus::load_corpus_dir(train_corpus);

            if (mode == "bm25") {
                if (!have_corpus) throw usage_error("--mode bm25 needs --corpus");
                std::vector<std::string> ids;
                std::vector<std::vector<std::string>> toks;
                for (const auto& r : dir.functions.train) {
                    ids.push_back(r.id);
                    toks.push_back(tok::tokenize_code(
                        r.docstring + "\n" + r.signature + "\n" + r.body,
                        {tok::CodeTokenMode::filter, false}));
                }
                auto bm25 = retrieve::build_bm25_index(ids, toks);
                for (const auto& q : queries) {
                    auto qtokens =
                        tok::tokenize_code(q.text, {tok::CodeTokenMode::filter, false});
                    run.per_query[q.id] = retrieve::bm25_search(bm25, qtokens, k);
                }
            } else {
                if (idx_path.empty()) throw usage_error("this mode needs --idx");
                if (params_prefix.empty() || bpe_path.empty()) {
                    throw usage_error("this mode needs --params and --bpe");
                }
                auto loaded = index::load_index(idx_path);
                auto ctx = embed::load_encoder_bundle(params_prefix, bpe_path);
                std::unordered_map<std::string, Eigen::Index> row_of;
                row_of.reserve(loaded.store.ids.size());
                for (std::size_t i = 0; i < loaded.store.ids.size(); ++i) {
                    row_of[loaded.store.ids[i]] = static_cast<Eigen::Index>(i);
                }
                if (mode == "threshold" && !theta_set) {
                    throw usage_error("--mode threshold needs --theta (compute it over "
                                      "training-query top-1 scores)");
                }
                for (const auto& q : queries) {
                    index::VecF qvec;
                    try {
                        qvec = embed::encode_query(ctx, q.text);
                    } catch (const Error& e) {
                        std::cerr << "query " << q.id << " has no usable encoding ("
                                  << e.what() << "); emitting no results\n";
                        run.per_query[q.id] = {};
                        continue;
                    }
                    std::uint64_t rseed = seed ^ stable_hash64(q.id);
                    std::vector<retrieve::SearchResult> results;
                    std::size_t n = static_cast<std::size_t>(loaded.store.size());
                    std::size_t sk = std::max(std::min(search_k, n), std::min(k, n));
                    if (mode == "none") {
                        results = {};
                    } else if (mode == "single" || mode == "threshold") {
                        auto scored = index::ann_search(loaded.forest, loaded.store, qvec, 1,
                                                        sk);
                        if (!scored.empty()) {
                            retrieve::SearchResult top{
                                scored[0].id,
                                1.0 - scored[0].distance * scored[0].distance / 2.0, 1};
                            results = mode == "single"
                                          ? std::vector<retrieve::SearchResult>{top}
                                          : retrieve::threshold_retrieve(top, theta);
                        }
                    } else if (mode == "full") {
                        auto scored = index::ann_search(loaded.forest, loaded.store, qvec,
                                                        std::min(k, n), sk);
                        for (const auto& s : scored) {
                            results.push_back(
                                {s.id, 1.0 - s.distance * s.distance / 2.0, 0});
                        }
                    } else if (mode == "mmr") {
                        std::size_t pool = std::min(candidate_pool, n);
                        auto scored = index::ann_search(loaded.forest, loaded.store, qvec,
                                                        pool, std::max(sk, pool));
                        std::vector<retrieve::Candidate> candidates;
                        std::unordered_map<std::string, double> rel;
                        for (const auto& s : scored) {
                            candidates.push_back(
                                {s.id,
                                 loaded.store.vectors.row(row_of.at(s.id)).transpose()});
                            rel[s.id] = 1.0 - s.distance * s.distance / 2.0;
                        }
                        retrieve::MmrConfig mcfg{lambda, std::min(k, candidates.size()),
                                                 pool, mmr_additive};
                        for (const auto& id : retrieve::mmr_rerank(qvec, candidates, mcfg)) {
                            results.push_back({id, rel[id], 0});
                        }
                    } else if (mode == "random") {
                        for (const auto& id :
                             retrieve::random_retrieve(loaded.store.ids, std::min(k, n),
                                                       rseed)) {
                            results.push_back({id, 0.0, 0});
                        }
                    }
                    retrieve::assign_ranks(results);
                    run.per_query[q.id] = std::move(results);
                }
            }

            if (dedupe) {
                if (!have_corpus) throw usage_error("--dedupe-target needs --corpus");
                std::unordered_map<std::string, std::vector<std::string>> tokens_by_id;
                for (const auto& r : all_functions(dir)) {
                    tokens_by_id[r.id] = filter_tokens_of(r);
                }
                auto doc_tokens =
                    [&](const std::string& id) -> const std::vector<std::string>& {
                    return tokens_by_id.at(id);
                };
                for (auto& [qid, results] : run.per_query) {
                    auto it = tokens_by_id.find(qid);
                    if (it == tokens_by_id.end()) continue;
                    results = retrieve::dedupe_target(std::move(results), it->second,
                                                      doc_tokens);
                }
            }
            pipeline::save_retrieval_run(run, retrieve_out);
            std::cerr << "wrote " << run.per_query.size() << " query results (mode " << mode
                      << ")\n";
            return 0;
        }
        if (*pack_cmd) {
            auto run = pipeline::load_retrieval_run(retrievals_path);
            auto dir = corpus::load_corpus_dir(train_corpus);
            auto bpe = tok::BpeModel::load(bpe_path);
            std::unordered_map<std::string, const corpus::FunctionRecord*> by_id;
            auto all = all_functions(dir);
            for (const auto& r : all) by_id[r.id] = &r;
            std::unordered_map<std::string, const corpus::IntentSnippetRecord*> intents_by_id;
            for (const auto& r : dir.intents) intents_by_id[r.id] = &r;

            pack::PackConfig pcfg{window, pack::pack_mode_from_name(pack_mode)};
            std::vector<pipeline::PackedRecord> packed;
            std::size_t skipped = 0;
            for (const auto& [qid, results] : run.per_query) {
                auto target = by_id.find(qid);
                if (target == by_id.end()) {
                    ++skipped;
                    continue;
                }
                std::vector<pack::RenderedDoc> docs;
                for (const auto& res : results) {
                    if (auto fn = by_id.find(res.doc_id); fn != by_id.end()) {
                        docs.push_back({res.doc_id, pack::render_document(*fn->second)});
                    } else if (auto in = intents_by_id.find(res.doc_id);
                               in != intents_by_id.end()) {
                        docs.push_back({res.doc_id, pack::render_document(*in->second)});
                    }
                }
                try {
                    pipeline::PackedRecord rec;
                    rec.query_id = qid;
                    rec.context = pack::pack_context(
                        pack::render_query(target->second->signature,
                                           target->second->docstring),
                        docs, bpe, pcfg);
                    rec.target_body = target->second->body;
                    packed.push_back(std::move(rec));
                } catch (const Error& e) {
                    std::cerr << "pack skipped " << qid << ": " << e.what() << "\n";
                    ++skipped;
                }
            }
            pipeline::save_packed_records(packed, pack_mode, pack_out);
            std::cerr << "packed " << packed.size() << " contexts, skipped " << skipped
                      << "\n";
            return 0;
        }
        if (*sofa_build) {
            std::vector<corpus::IntentSnippetRecord> intents;
            {
                auto first = split_lines(read_text_file(sofa_intents));
                bool is_intentrec = !first.empty() &&
                                    first[0].find("intentrec v1") != std::string::npos;
                if (is_intentrec) {
                    intents = corpus::load_intent_records(sofa_intents);
                } else {
                    std::ifstream in(sofa_intents);
                    corpus::ParseDiagnostics diag;
                    intents = corpus::parse_intent_snippets(in, sofa_top_n, diag);
                }
            }
            auto dir = corpus::load_corpus_dir(sofa_functions_dir);
            auto pairs = sofa::build_sofa(intents, dir.functions.train, sofa_top_n,
                                          sofa_neighbors, threads);
            sofa::save_pairs(pairs, sofa_out);
            std::cerr << "built " << pairs.size() << " pairs\n";
            return 0;
        }
        if (*sofa_curate) {
            auto pairs = sofa::load_pairs(sofa_pairs_path);
            auto verdicts = sofa::load_verdicts(verdicts_path);
            auto outcome = sofa::apply_curation(std::move(pairs), verdicts);
            if (outcome.unknown_keys > 0) {
                std::cerr << "warning: " << outcome.unknown_keys << " verdicts had no "
                          << "matching pair\n";
            }
            sofa::save_pairs(sofa::curated_subset(outcome.pairs), sofa_out);
            std::cerr << "applied " << outcome.applied << " verdicts\n";
            return 0;
        }
        if (*eval_retrieval) {
            auto run = pipeline::load_retrieval_run(rankings_path);
            std::unordered_map<std::string, std::string> gold;
            for (const auto& line : split_lines(read_text_file(gold_path))) {
                if (trim(line).empty()) continue;
                json obj = json::parse(line, nullptr, false);
                if (obj.is_discarded() || obj.contains("format")) continue;
                gold[obj.at("query_id").get<std::string>()] =
                    obj.at("doc_id").get<std::string>();
            }
            std::map<std::string, std::vector<std::string>> rankings;
            double ndcg_sum = 0.0;
            std::size_t n = 0;
            for (const auto& [qid, results] : run.per_query) {
                std::vector<std::string> ranking;
                for (const auto& r : results) ranking.push_back(r.doc_id);
                rankings[qid] = ranking;
                auto g = gold.find(qid);
                if (g != gold.end()) {
                    ndcg_sum += eval::ndcg(ranking, {{qid, g->second, 1.0}}, k);
                    ++n;
                }
            }
            double mrr_v = eval::mrr(rankings, gold);
            printf("mrr %.6f\nndcg@%zu %.6f\nn_queries %zu\n", mrr_v, k,
                   n ? ndcg_sum / static_cast<double>(n) : 0.0, rankings.size());
            return 0;
        }
        if (*eval_generation) {
            auto dir = corpus::load_corpus_dir(train_corpus);
            auto bpe = tok::BpeModel::load(bpe_path);
            std::unordered_map<std::string, const corpus::FunctionRecord*> by_id;
            auto all = all_functions(dir);
            for (const auto& r : all) by_id[r.id] = &r;
            double bleu_word = 0.0, bleu_bpe = 0.0, edist = 0.0, edist_raw = 0.0;
            std::size_t n = 0;
            for (const auto& line : split_lines(read_text_file(hyps_path))) {
                if (trim(line).empty()) continue;
                json obj = json::parse(line, nullptr, false);
                if (obj.is_discarded() || obj.contains("format")) continue;
                auto it = by_id.find(obj.at("query_id").get<std::string>());
                if (it == by_id.end()) continue;
                std::string hyp = obj.value("hypothesis_text", "");
                auto hyp_word = tok::tokenize_code(hyp, {tok::CodeTokenMode::filter, false});
                auto ref_word = tok::tokenize_code(it->second->body,
                                                   {tok::CodeTokenMode::filter, false});
                if (ref_word.empty()) continue;
                bleu_word += eval::bleu4(hyp_word, ref_word);
                std::vector<std::string> hyp_bpe, ref_bpe;
                for (auto id : bpe.encode(hyp)) hyp_bpe.push_back(bpe.token(id));
                for (auto id : bpe.encode(it->second->body)) ref_bpe.push_back(bpe.token(id));
                bleu_bpe += eval::bleu4(hyp_bpe, ref_bpe);
                auto ed = eval::token_edit_distance(hyp_word, ref_word);
                edist += ed.normalized;
                edist_raw += static_cast<double>(ed.raw);
                ++n;
            }
            if (n == 0) throw data_error("no hypotheses matched corpus records");
            printf("bleu4_word %.6f\nbleu4_bpe %.6f\nedist_norm %.6f\nedist_raw %.6f\n"
                   "n_queries %zu\n",
                   bleu_word / n, bleu_bpe / n, edist / n, edist_raw / n, n);
            return 0;
        }
        if (*serve_cmd) {
            auto snapshot = std::make_shared<service::Snapshot>(
                service::load_snapshot(params_prefix, bpe_path, idx_path, train_corpus));
            return service::serve_forever(snapshot, host, port);
        }
        if (*pipeline_cmd) {
            auto ini = pipeline::IniFile::load(config_path);
            for (const auto& kv : overrides) {
                std::size_t dot = kv.find('.');
                std::size_t eq = kv.find('=');
                if (dot == std::string::npos || eq == std::string::npos || dot > eq) {
                    throw usage_error("--set expects section.key=value, got: " + kv);
                }
                ini.set(kv.substr(0, dot), kv.substr(dot + 1, eq - dot - 1),
                        kv.substr(eq + 1));
            }
            auto cfg = pipeline::PipelineConfig::from_ini(ini);
            pipeline::run_pipeline(cfg);
            return 0;
        }
        throw usage_error("no subcommand action matched");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::internal);
    }
}
