#include "retkit/service.hpp"

#include <chrono>
#include <iostream>

#include <httplib.h>
#include <json.hpp>

#include "retkit/common.hpp"
#include "retkit/corpus.hpp"
#include "retkit/pack.hpp"
#include "retkit/retrieve.hpp"

namespace retkit::service {

using nlohmann::json;

Snapshot load_snapshot(const std::string& params_prefix, const std::string& bpe_path,
                       const std::string& index_path, const std::string& corpus_dir) {
    Snapshot snap;
    snap.encoder = embed::load_encoder_bundle(params_prefix, bpe_path);
    auto loaded = index::load_index(index_path);
    snap.forest = std::move(loaded.forest);
    snap.store = std::move(loaded.store);

    auto corpus = corpus::load_corpus_dir(corpus_dir);
    auto add = [&](const auto& records) {
        for (const auto& r : records) snap.rendered_docs[r.id] = pack::render_document(r);
    };
    add(corpus.functions.train);
    add(corpus.functions.valid);
    add(corpus.functions.test);
    add(corpus.intents);
    return snap;
}

namespace {

json error_body(const std::string& message) { return json{{"error", message}}; }

void handle_search(const Snapshot& snap, const httplib::Request& req,
                   httplib::Response& res) {
    auto started = std::chrono::steady_clock::now();

    std::string q;
    std::size_t k = 10;
    std::string mode = "topk";
    double lambda = 0.5;

    if (req.method == "POST") {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            res.status = 400;
            res.set_content(error_body("invalid JSON body").dump(), "application/json");
            return;
        }
        q = body.value("q", "");
        k = body.value("k", std::size_t{10});
        mode = body.value("mode", "topk");
        lambda = body.value("lambda", 0.5);
    } else {
        q = req.get_param_value("q");
        try {
            if (req.has_param("k")) k = std::stoul(req.get_param_value("k"));
            if (req.has_param("mode")) mode = req.get_param_value("mode");
            if (req.has_param("lambda")) lambda = std::stod(req.get_param_value("lambda"));
        } catch (const std::exception&) {
            res.status = 400;
            res.set_content(error_body("k and lambda must be numeric").dump(),
                            "application/json");
            return;
        }
    }

    if (trim(q).empty()) {
        res.status = 400;
        res.set_content(error_body("q must be non-empty").dump(), "application/json");
        return;
    }
    if (k < 1 || lambda < 0.0 || lambda > 1.0 || (mode != "topk" && mode != "mmr")) {
        res.status = 400;
        res.set_content(error_body("invalid k, lambda, or mode").dump(), "application/json");
        return;
    }

    index::VecF qvec;
    try {
        qvec = embed::encode_query(snap.encoder, q);
    } catch (const Error&) {
        res.status = 422;
        res.set_content(error_body("query does not encode to a usable vector").dump(),
                        "application/json");
        return;
    }

    json results = json::array();
    try {
        std::size_t n = static_cast<std::size_t>(snap.store.size());
        std::size_t k_eff = std::min(k, n);
        std::size_t search_k = std::min(snap.default_search_k, n);
        search_k = std::max(search_k, k_eff);
        auto append = [&](const std::string& id, double score) {
            auto doc = snap.rendered_docs.find(id);
            results.push_back(json{{"doc_id", id},
                                   {"score", score},
                                   {"rendered_document",
                                    doc == snap.rendered_docs.end() ? "" : doc->second}});
        };
        if (mode == "topk") {
            for (const auto& s : index::ann_search(snap.forest, snap.store, qvec, k_eff,
                                                   search_k)) {
                append(s.id, 1.0 - s.distance * s.distance / 2.0);
            }
        } else {
            std::size_t pool = std::min(snap.mmr_candidate_pool, n);
            auto scored = index::ann_search(snap.forest, snap.store, qvec, pool,
                                            std::max(search_k, pool));
            std::unordered_map<std::string, Eigen::Index> row_of;
            for (std::size_t i = 0; i < snap.store.ids.size(); ++i) {
                row_of[snap.store.ids[i]] = static_cast<Eigen::Index>(i);
            }
            std::vector<retrieve::Candidate> candidates;
            std::unordered_map<std::string, double> rel;
            for (const auto& s : scored) {
                candidates.push_back(
                    {s.id, snap.store.vectors.row(row_of.at(s.id)).transpose()});
                rel[s.id] = 1.0 - s.distance * s.distance / 2.0;
            }
            retrieve::MmrConfig cfg;
            cfg.lambda = lambda;
            cfg.m = k_eff;
            cfg.candidate_pool = pool;
            for (const auto& id : retrieve::mmr_rerank(qvec, candidates, cfg)) {
                append(id, rel[id]);
            }
        }
    } catch (const std::exception& e) {
        std::uint64_t incident = stable_hash64(e.what());
        std::cerr << "[serve] incident " << incident << ": " << e.what() << "\n";
        res.status = 500;
        res.set_content(error_body("internal error " + std::to_string(incident)).dump(),
                        "application/json");
        return;
    }

    auto elapsed = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    res.set_content(json{{"results", results}, {"latency_ms", elapsed}}.dump(),
                    "application/json");
}

}  // namespace

std::unique_ptr<httplib::Server> make_server(std::shared_ptr<const Snapshot> snapshot) {
    auto server = std::make_unique<httplib::Server>();

    server->Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });

    auto search = [snapshot](const httplib::Request& req, httplib::Response& res) {
        handle_search(*snapshot, req, res);
    };
    server->Get("/search", search);
    server->Post("/search", search);

    server->Get(R"(/doc/(.+))", [snapshot](const httplib::Request& req,
                                           httplib::Response& res) {
        auto it = snapshot->rendered_docs.find(req.matches[1]);
        if (it == snapshot->rendered_docs.end()) {
            res.status = 404;
            res.set_content(error_body("unknown document id").dump(), "application/json");
            return;
        }
        res.set_content(it->second, "text/plain");
    });
    return server;
}

int serve_forever(std::shared_ptr<const Snapshot> snapshot, const std::string& host,
                  int port) {
    auto server = make_server(snapshot);
    std::cerr << "[serve] listening on " << host << ":" << port << " over "
              << snapshot->store.size() << " documents\n";
    if (!server->listen(host, port)) {
        std::cerr << "[serve] failed to bind " << host << ":" << port << "\n";
        return static_cast<int>(ErrorKind::data);
    }
    return 0;
}

}  // namespace retkit::service
