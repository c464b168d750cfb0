#include "retkit/index.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <queue>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "retkit/common.hpp"
#include "retkit/rng.hpp"

namespace retkit::index {

namespace {

constexpr double kUnitTolStore = 1e-6;   // stored rows must be unit within this
constexpr double kUnitTolQuery = 1e-3;   // angular_distance input check

double row_norm(const MatF& m, Eigen::Index r) {
    return static_cast<double>(m.row(r).norm());
}

}  // namespace

VectorStore make_store(std::vector<std::string> ids, MatF vectors) {
    if (static_cast<Eigen::Index>(ids.size()) != vectors.rows()) {
        throw data_error("make_store: id/vector count mismatch");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) throw data_error("make_store: duplicate id " + id);
        if (id.find('\t') != std::string::npos || id.find('\n') != std::string::npos) {
            throw data_error("make_store: id contains tab/newline: " + id);
        }
    }
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
        double norm = row_norm(vectors, r);
        if (norm < 1e-12 || !std::isfinite(norm)) {
            throw data_error("make_store: zero or non-finite vector for id " +
                             ids[static_cast<std::size_t>(r)]);
        }
        // already-unit rows keep their exact bits so round-trips are exact
        if (std::abs(norm - 1.0) > kUnitTolStore) {
            vectors.row(r) /= static_cast<float>(norm);
        }
    }
    return VectorStore{std::move(ids), std::move(vectors)};
}

double angular_distance(const VecF& u, const VecF& v) {
    if (u.size() != v.size()) throw data_error("angular_distance: dimension mismatch");
    double nu = u.norm(), nv = v.norm();
    if (std::abs(nu - 1.0) > kUnitTolQuery || std::abs(nv - 1.0) > kUnitTolQuery) {
        throw data_error("angular_distance: inputs must be unit vectors");
    }
    double dot = static_cast<double>(u.dot(v));
    return std::sqrt(std::max(0.0, 2.0 - 2.0 * dot));
}

namespace {

std::vector<ScoredId> rank_candidates(const VectorStore& store, const VecF& query,
                                      const std::vector<std::int32_t>& rows,
                                      std::size_t k) {
    struct Entry {
        double distance;
        std::int32_t row;
    };
    std::vector<Entry> entries;
    entries.reserve(rows.size());
    for (std::int32_t r : rows) {
        double dot = static_cast<double>(store.vectors.row(r).dot(query.transpose()));
        entries.push_back({std::sqrt(std::max(0.0, 2.0 - 2.0 * dot)), r});
    }
    std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return store.ids[static_cast<std::size_t>(a.row)] <
               store.ids[static_cast<std::size_t>(b.row)];
    });
    if (entries.size() > k) entries.resize(k);
    std::vector<ScoredId> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back({store.ids[static_cast<std::size_t>(e.row)], e.distance});
    }
    return out;
}

}  // namespace

std::vector<ScoredId> exact_search(const VectorStore& store, const VecF& query,
                                   std::size_t k) {
    if (k < 1) throw data_error("exact_search: k must be >= 1");
    if (store.size() == 0) throw data_error("exact_search: empty store");
    if (query.size() != store.dim()) throw data_error("exact_search: dimension mismatch");
    std::vector<std::int32_t> all(static_cast<std::size_t>(store.size()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int32_t>(i);
    return rank_candidates(store, query, all, k);
}

// ---------------------------------------------------------------------------
// Forest build
// ---------------------------------------------------------------------------

namespace {

constexpr int kTwoMeansSteps = 200;

float split_margin(const VecF& x, const VecF& normal, float offset) {
    return x.dot(normal) - offset;
}

RpTree build_tree(const VectorStore& store, std::size_t leaf_size, std::uint64_t seed) {
    RpTree tree;
    SplitMix64 rng(seed);

    struct Pending {
        std::vector<std::int32_t> items;
        std::int32_t parent;
        bool is_right;
    };
    std::vector<Pending> stack;
    std::vector<std::int32_t> all(static_cast<std::size_t>(store.size()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int32_t>(i);
    stack.push_back({std::move(all), -1, false});

    while (!stack.empty()) {
        Pending task = std::move(stack.back());
        stack.pop_back();
        std::int32_t node_idx = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (task.parent >= 0) {
            auto& parent = tree.nodes[static_cast<std::size_t>(task.parent)];
            (task.is_right ? parent.right : parent.left) = node_idx;
        }

        auto make_leaf = [&](std::vector<std::int32_t>&& items) {
            RpNode& node = tree.nodes[static_cast<std::size_t>(node_idx)];
            node.leaf = true;
            node.items = std::move(items);
        };

        if (task.items.size() <= leaf_size) {
            make_leaf(std::move(task.items));
            continue;
        }

        // Sample two distinct stored vectors, refine them with the two-means
        // iteration the ANNOY construction uses, and split on the refined
        // pair's perpendicular bisector. Retry when the refined hyperplane
        // leaves one side empty; a raw stored-point pair always separates at
        // least itself, so the rescue path below cannot produce empty sides.
        std::vector<std::int32_t> left_items, right_items;
        auto partition = [&](const VecF& normal_in, float offset_in) {
            left_items.clear();
            right_items.clear();
            for (std::int32_t item : task.items) {
                VecF x = store.vectors.row(item).transpose();
                if (split_margin(x, normal_in, offset_in) >= 0.0f) {
                    right_items.push_back(item);
                } else {
                    left_items.push_back(item);
                }
            }
            return !left_items.empty() && !right_items.empty();
        };

        VecF normal;
        float offset = 0.0f;
        bool found = false;
        for (int attempt = 0; attempt < 10 && !found; ++attempt) {
            std::size_t ia = static_cast<std::size_t>(rng.next_below(task.items.size()));
            std::size_t ib = static_cast<std::size_t>(rng.next_below(task.items.size() - 1));
            if (ib >= ia) ++ib;
            VecF p = store.vectors.row(task.items[ia]).transpose();
            VecF q = store.vectors.row(task.items[ib]).transpose();
            if ((p - q).norm() < 1e-12f) continue;
            float p_count = 1.0f, q_count = 1.0f;
            for (int step = 0; step < kTwoMeansSteps; ++step) {
                std::size_t iz = static_cast<std::size_t>(rng.next_below(task.items.size()));
                VecF x = store.vectors.row(task.items[iz]).transpose();
                float dp = p_count * (p - x).squaredNorm();
                float dq = q_count * (q - x).squaredNorm();
                if (dp < dq) {
                    p = (p * p_count + x) / (p_count + 1.0f);
                    p_count += 1.0f;
                } else {
                    q = (q * q_count + x) / (q_count + 1.0f);
                    q_count += 1.0f;
                }
            }
            VecF diff = p - q;
            float norm = diff.norm();
            if (norm < 1e-12f) continue;
            normal = diff / norm;
            offset = normal.dot(((p + q) * 0.5f));
            found = partition(normal, offset);
        }
        if (!found) {
            // deterministic rescue: pair the first item with the first one
            // that differs from it (no refinement)
            VecF p = store.vectors.row(task.items[0]).transpose();
            for (std::size_t i = 1; i < task.items.size(); ++i) {
                VecF q = store.vectors.row(task.items[i]).transpose();
                VecF diff = p - q;
                float norm = diff.norm();
                if (norm >= 1e-12f) {
                    normal = diff / norm;
                    offset = normal.dot(((p + q) * 0.5f));
                    found = partition(normal, offset);
                    break;
                }
            }
        }
        if (!found) {  // fewer than 2 distinct vectors: unsplittable
            make_leaf(std::move(task.items));
            continue;
        }
        {
            RpNode& node = tree.nodes[static_cast<std::size_t>(node_idx)];
            node.leaf = false;
            node.normal = normal;
            node.offset = offset;
        }
        // push right first so the left subtree is numbered first
        stack.push_back({std::move(right_items), node_idx, true});
        stack.push_back({std::move(left_items), node_idx, false});
    }
    return tree;
}

}  // namespace

RpForest build_forest(const VectorStore& store, const AnnConfig& cfg, std::size_t leaf_size,
                      std::uint64_t seed, std::size_t threads) {
    if (store.size() == 0) throw data_error("build_forest: empty store");
    if (cfg.n_trees < 1) throw data_error("build_forest: n_trees must be >= 1");
    if (leaf_size < 1) throw data_error("build_forest: leaf_size must be >= 1");

    RpForest forest;
    forest.leaf_size = leaf_size;
    forest.seed = seed;
    forest.trees.resize(cfg.n_trees);

    std::size_t n_workers = std::max<std::size_t>(1, std::min(threads, cfg.n_trees));
    if (n_workers == 1) {
        for (std::size_t t = 0; t < cfg.n_trees; ++t) {
            forest.trees[t] = build_tree(store, leaf_size, seed + t);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back([&] {
                for (std::size_t t = next.fetch_add(1); t < cfg.n_trees;
                     t = next.fetch_add(1)) {
                    forest.trees[t] = build_tree(store, leaf_size, seed + t);
                }
            });
        }
        for (auto& w : workers) w.join();
    }
    return forest;
}

std::vector<ScoredId> ann_search(const RpForest& forest, const VectorStore& store,
                                 const VecF& query, std::size_t k, std::size_t search_k) {
    if (k < 1) throw data_error("ann_search: k must be >= 1");
    if (search_k < k) {
        throw data_error("ann_search: search_k (" + std::to_string(search_k) +
                         ") must be >= k (" + std::to_string(k) + ")");
    }
    if (store.size() == 0) throw data_error("ann_search: empty store");
    if (query.size() != store.dim()) throw data_error("ann_search: dimension mismatch");

    struct HeapEntry {
        double priority;
        std::uint32_t tree;
        std::int32_t node;
    };
    auto lower = [](const HeapEntry& a, const HeapEntry& b) {
        if (a.priority != b.priority) return a.priority < b.priority;
        if (a.tree != b.tree) return a.tree > b.tree;
        return a.node > b.node;
    };
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, decltype(lower)> heap(lower);
    constexpr double kInf = std::numeric_limits<double>::infinity();
    for (std::uint32_t t = 0; t < forest.trees.size(); ++t) {
        heap.push({kInf, t, 0});
    }

    std::vector<char> seen(static_cast<std::size_t>(store.size()), 0);
    std::vector<std::int32_t> candidates;
    candidates.reserve(std::min<std::size_t>(search_k * 2, static_cast<std::size_t>(store.size())));

    while (!heap.empty() && candidates.size() < search_k) {
        HeapEntry top = heap.top();
        heap.pop();
        const RpNode& node =
            forest.trees[top.tree].nodes[static_cast<std::size_t>(top.node)];
        if (node.leaf) {
            for (std::int32_t item : node.items) {
                if (!seen[static_cast<std::size_t>(item)]) {
                    seen[static_cast<std::size_t>(item)] = 1;
                    candidates.push_back(item);
                }
            }
        } else {
            double margin = static_cast<double>(split_margin(query, node.normal, node.offset));
            heap.push({std::min(top.priority, margin), top.tree, node.right});
            heap.push({std::min(top.priority, -margin), top.tree, node.left});
        }
    }
    return rank_candidates(store, query, candidates, k);
}

// ---------------------------------------------------------------------------
// Embedding file and index file IO
// ---------------------------------------------------------------------------

namespace {

std::string encode_floats_b64(const float* data, std::size_t count) {
    return base64_encode(reinterpret_cast<const unsigned char*>(data),
                         count * sizeof(float));
}

std::vector<float> decode_floats_b64(std::string_view text) {
    auto bytes = base64_decode(text);
    if (bytes.size() % sizeof(float) != 0) {
        throw data_error("embedding record has truncated float payload");
    }
    std::vector<float> floats(bytes.size() / sizeof(float));
    std::memcpy(floats.data(), bytes.data(), bytes.size());
    return floats;
}

void append_store(std::ostringstream& out, const VectorStore& store) {
    out << "emb v1 " << store.size() << " " << store.dim() << "\n";
    std::vector<float> row(static_cast<std::size_t>(store.dim()));
    for (Eigen::Index r = 0; r < store.size(); ++r) {
        for (Eigen::Index c = 0; c < store.dim(); ++c) {
            row[static_cast<std::size_t>(c)] = store.vectors(r, c);
        }
        out << store.ids[static_cast<std::size_t>(r)] << "\t"
            << encode_floats_b64(row.data(), row.size()) << "\n";
    }
}

VectorStore parse_store(const std::vector<std::string>& lines, std::size_t& cursor,
                        const std::string& path) {
    if (cursor >= lines.size() || !starts_with(lines[cursor], "emb v1 ")) {
        throw data_error("not an embedding section: " + path);
    }
    std::istringstream hs(lines[cursor].substr(7));
    std::size_t count = 0, dim = 0;
    hs >> count >> dim;
    if (dim == 0) throw data_error("embedding header declares dimension 0: " + path);
    ++cursor;

    std::vector<std::string> ids;
    ids.reserve(count);
    MatF vectors(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < count; ++i, ++cursor) {
        if (cursor >= lines.size()) {
            throw data_error("embedding file truncated at record " + std::to_string(i) +
                             ": " + path);
        }
        const std::string& line = lines[cursor];
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw data_error("embedding record " + std::to_string(i) + " missing tab: " +
                             path);
        }
        std::string id = line.substr(0, tab);
        auto floats = decode_floats_b64(std::string_view(line).substr(tab + 1));
        if (floats.size() != dim) {
            throw data_error("embedding record '" + id + "' has dimension " +
                             std::to_string(floats.size()) + ", expected " +
                             std::to_string(dim));
        }
        for (std::size_t c = 0; c < dim; ++c) {
            vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = floats[c];
        }
        ids.push_back(std::move(id));
    }
    return make_store(std::move(ids), std::move(vectors));
}

}  // namespace

void export_embeddings(const VectorStore& store, const std::string& path) {
    std::ostringstream out;
    append_store(out, store);
    write_text_file(path, out.str());
}

VectorStore import_embeddings(const std::string& path) {
    auto lines = split_lines(read_text_file(path));
    std::size_t cursor = 0;
    return parse_store(lines, cursor, path);
}

void save_index(const RpForest& forest, const VectorStore& store, const std::string& path) {
    std::ostringstream out;
    out << "rpf v1 " << forest.trees.size() << " " << forest.leaf_size << " " << forest.seed
        << "\n";
    append_store(out, store);
    for (const auto& tree : forest.trees) {
        out << "tree " << tree.nodes.size() << "\n";
        for (const auto& node : tree.nodes) {
            if (node.leaf) {
                out << "l";
                for (std::int32_t item : node.items) out << " " << item;
                out << "\n";
            } else {
                std::vector<float> payload;
                payload.push_back(node.offset);
                for (Eigen::Index i = 0; i < node.normal.size(); ++i) {
                    payload.push_back(node.normal(i));
                }
                out << "i " << node.left << " " << node.right << " "
                    << encode_floats_b64(payload.data(), payload.size()) << "\n";
            }
        }
    }
    write_text_file(path, out.str());
}

LoadedIndex load_index(const std::string& path) {
    auto lines = split_lines(read_text_file(path));
    if (lines.empty() || !starts_with(lines[0], "rpf v1 ")) {
        throw data_error("not an index file: " + path);
    }
    LoadedIndex out;
    std::size_t n_trees = 0;
    {
        std::istringstream hs(lines[0].substr(7));
        hs >> n_trees >> out.forest.leaf_size >> out.forest.seed;
    }
    std::size_t cursor = 1;
    out.store = parse_store(lines, cursor, path);
    const Eigen::Index dim = out.store.dim();

    for (std::size_t t = 0; t < n_trees; ++t) {
        if (cursor >= lines.size() || !starts_with(lines[cursor], "tree ")) {
            throw data_error("index file truncated before tree " + std::to_string(t));
        }
        std::size_t n_nodes = std::stoull(lines[cursor].substr(5));
        ++cursor;
        RpTree tree;
        tree.nodes.reserve(n_nodes);
        for (std::size_t n = 0; n < n_nodes; ++n, ++cursor) {
            if (cursor >= lines.size()) {
                throw data_error("index file truncated inside tree " + std::to_string(t));
            }
            std::istringstream ls(lines[cursor]);
            std::string kind;
            ls >> kind;
            RpNode node;
            if (kind == "l") {
                node.leaf = true;
                std::int32_t item;
                while (ls >> item) node.items.push_back(item);
            } else if (kind == "i") {
                std::string b64;
                ls >> node.left >> node.right >> b64;
                auto floats = decode_floats_b64(b64);
                if (floats.size() != static_cast<std::size_t>(dim) + 1) {
                    throw data_error("index node payload has wrong dimension");
                }
                node.offset = floats[0];
                node.normal.resize(dim);
                for (Eigen::Index i = 0; i < dim; ++i) {
                    node.normal(i) = floats[static_cast<std::size_t>(i) + 1];
                }
            } else {
                throw data_error("unknown index node kind: " + kind);
            }
            tree.nodes.push_back(std::move(node));
        }
        out.forest.trees.push_back(std::move(tree));
    }
    return out;
}

}  // namespace retkit::index
