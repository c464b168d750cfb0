#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>

#include "retkit/common.hpp"
#include "retkit/pipeline.hpp"
#include "support.hpp"

using namespace retkit;
using namespace retkit::pipeline;

namespace {

std::string source_dir() {
    const char* env = std::getenv("RETKIT_SOURCE_DIR");
    REQUIRE(env != nullptr);
    return env;
}

PipelineConfig fixture_config(const std::string& out_dir) {
    PipelineConfig cfg;
    cfg.functions_path = source_dir() + "/data/fixture/functions.jsonl";
    cfg.intents_path = source_dir() + "/data/fixture/intents.jsonl";
    cfg.out_dir = out_dir;
    cfg.valid_size = 20;
    cfg.test_size = 20;
    cfg.bpe_vocab = 400;
    cfg.code_vocab = 2000;
    cfg.trainer.batch_size = 16;
    cfg.trainer.lr = 0.002;
    cfg.trainer.epochs = 6;
    cfg.trainer.seed = 7;
    cfg.n_trees = 10;
    cfg.leaf_size = 16;
    cfg.search_k = 400;
    cfg.k = 10;
    cfg.candidate_pool = 50;
    cfg.window = 1024;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("ini files parse, override, and serialize") {
    auto ini = IniFile::parse("# comment\n[a]\nx = 1\ny = two words\n[b]\nx = 9\n");
    CHECK(ini.get("a", "x", "") == "1");
    CHECK(ini.get("a", "y", "") == "two words");
    CHECK(ini.get_int("b", "x", 0) == 9);
    CHECK(ini.get("c", "zz", "fallback") == "fallback");
    ini.set("a", "x", "5");
    CHECK(ini.get_int("a", "x", 0) == 5);
    auto reparsed = IniFile::parse(ini.serialize());
    CHECK(reparsed.get("a", "y", "") == "two words");
    CHECK_THROWS_AS(IniFile::parse("[a]\nbroken line\n"), Error);
}

TEST_CASE("pipeline config round trips through ini form") {
    auto cfg = fixture_config("unused");
    auto ini = cfg.to_ini();
    auto back = PipelineConfig::from_ini(ini);
    CHECK(back.valid_size == cfg.valid_size);
    CHECK(back.trainer.batch_size == cfg.trainer.batch_size);
    CHECK(back.trainer.lr == cfg.trainer.lr);
    CHECK(back.n_trees == cfg.n_trees);
    CHECK(back.seed == cfg.seed);
}

TEST_CASE("retrieval run files round trip") {
    testsupport::TempDir tmp("retr");
    RetrievalRun run;
    run.mode = "full";
    run.per_query["q1"] = {{"d1", 0.9, 1}, {"d2", 0.5, 2}};
    run.per_query["q2"] = {};
    save_retrieval_run(run, tmp.file("run.jsonl"));
    auto loaded = load_retrieval_run(tmp.file("run.jsonl"));
    CHECK(loaded.mode == "full");
    REQUIRE(loaded.per_query.at("q1").size() == 2);
    CHECK(loaded.per_query.at("q1")[0].doc_id == "d1");
    CHECK(loaded.per_query.at("q1")[1].rank == 2);
    CHECK(loaded.per_query.at("q2").empty());
}

TEST_CASE("pipeline end to end on the fixture corpus is deterministic") {
    testsupport::TempDir tmp("pipe");
    auto cfg1 = fixture_config(tmp.file("run1"));
    auto report1 = run_pipeline(cfg1);

    // every stage artifact exists
    for (const std::string name :
         {"config.effective.ini", "bpe.txt", "encoder.query.fenc", "encoder.code.fenc",
          "encoder.svoc", "loss_curve.csv", "db.emb", "db.rpf", "threshold.txt",
          "report.txt", "report.jsonl"}) {
        INFO(name);
        CHECK(std::filesystem::exists(tmp.file("run1") + "/" + name));
    }
    for (const auto& mode : retrieval_modes()) {
        CHECK(std::filesystem::exists(tmp.file("run1") + "/retrieval_" + mode + ".jsonl"));
        CHECK(std::filesystem::exists(tmp.file("run1") + "/packed_" + mode + ".jsonl"));
    }
    REQUIRE(report1.rows.size() == retrieval_modes().size());

    // the trained retriever beats the no-retrieve baseline on ranking metrics
    double full_mrr = 0.0, none_mrr = 1.0;
    for (const auto& row : report1.rows) {
        if (row.mode == "full") full_mrr = row.mrr;
        if (row.mode == "none") none_mrr = row.mrr;
    }
    CHECK(none_mrr == 0.0);
    CHECK(full_mrr > 0.0);

    // byte-identical rerun
    auto cfg2 = fixture_config(tmp.file("run2"));
    run_pipeline(cfg2);
    for (const std::string name :
         {"bpe.txt", "db.emb", "db.rpf", "loss_curve.csv", "threshold.txt", "report.txt",
          "report.jsonl", "retrieval_full.jsonl", "retrieval_mmr.jsonl",
          "packed_full.jsonl"}) {
        INFO(name);
        CHECK(read_text_file(tmp.file("run1") + "/" + name) ==
              read_text_file(tmp.file("run2") + "/" + name));
    }
    // binary encoder params identical too
    CHECK(read_text_file(tmp.file("run1") + "/encoder.code.fenc") ==
          read_text_file(tmp.file("run2") + "/encoder.code.fenc"));
}

TEST_CASE("packed artifacts respect the window everywhere") {
    testsupport::TempDir tmp("pipewin");
    auto cfg = fixture_config(tmp.file("run"));
    cfg.trainer.epochs = 2;  // fast; packing behavior is what matters here
    run_pipeline(cfg);
    for (const auto& mode : retrieval_modes()) {
        auto lines = split_lines(
            read_text_file(tmp.file("run") + "/packed_" + mode + ".jsonl"));
        REQUIRE_FALSE(lines.empty());
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            auto obj = nlohmann::json::parse(lines[i]);
            CHECK(obj.at("n_tokens").get<std::size_t>() <= cfg.window);
            if (mode == "none") CHECK(obj.at("n_retrieved").get<std::size_t>() == 0);
        }
    }
}
