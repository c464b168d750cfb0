#pragma once

#include <memory>
#include <string>
#include <unordered_map>

#include "retkit/embed.hpp"
#include "retkit/index.hpp"

// forward declaration keeps httplib out of every includer
namespace httplib {
class Server;
}

namespace retkit::service {

// Read-only snapshot the service answers from. Loaded once at startup;
// reload requires a restart.
struct Snapshot {
    embed::EncodingContext encoder;
    index::RpForest forest;
    index::VectorStore store;
    std::unordered_map<std::string, std::string> rendered_docs;  // id -> document text
    std::size_t default_search_k = 10000;
    std::size_t mmr_candidate_pool = 100;
};

Snapshot load_snapshot(const std::string& params_prefix, const std::string& bpe_path,
                       const std::string& index_path, const std::string& corpus_dir);

// Wires /health, /search, and /doc/<id> onto a fresh server. The snapshot is
// shared and never mutated by request handlers.
std::unique_ptr<httplib::Server> make_server(std::shared_ptr<const Snapshot> snapshot);

// Blocks serving requests until the process is stopped.
int serve_forever(std::shared_ptr<const Snapshot> snapshot, const std::string& host, int port);

}  // namespace retkit::service
