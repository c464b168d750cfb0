#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace retkit::index {

using MatF = Eigen::MatrixXf;
using VecF = Eigen::VectorXf;

// Immutable set of unit vectors keyed by string ids. Row i of `vectors` is
// the vector for ids[i].
struct VectorStore {
    std::vector<std::string> ids;
    MatF vectors;  // n x d, every row unit-norm within 1e-6

    Eigen::Index size() const { return vectors.rows(); }
    Eigen::Index dim() const { return vectors.cols(); }
};

// Builds a store from raw vectors: rows are normalized unless already unit
// (already-unit rows are kept bit-for-bit); zero rows and duplicate ids are
// rejected.
VectorStore make_store(std::vector<std::string> ids, MatF vectors);

struct ScoredId {
    std::string id;
    double distance;
};

// sqrt(2 - 2 u.v) for unit vectors; rejects inputs whose norm is off by
// more than 1e-3.
double angular_distance(const VecF& u, const VecF& v);

// Exhaustive top-k scan, ascending distance, ties by id ascending. k > n
// returns all n.
std::vector<ScoredId> exact_search(const VectorStore& store, const VecF& query,
                                   std::size_t k);

struct AnnConfig {
    std::size_t n_trees = 1000;
    std::size_t search_k = 10000;
};

// One node of a random-projection tree. Internal nodes hold the
// perpendicular-bisector hyperplane of two sampled points; leaves hold row
// indices into the store.
struct RpNode {
    bool leaf = false;
    VecF normal;
    float offset = 0.0f;
    std::int32_t left = -1;
    std::int32_t right = -1;  // positive-margin side
    std::vector<std::int32_t> items;
};

struct RpTree {
    std::vector<RpNode> nodes;  // nodes[0] is the root
};

struct RpForest {
    std::vector<RpTree> trees;
    std::size_t leaf_size = 64;
    std::uint64_t seed = 0;
};

// Builds n_trees trees over the store; each node splits on the perpendicular
// bisector of two distinct sampled points and recursion stops at leaf_size.
// Tree t uses seed + t, so the build parallelizes without changing output.
RpForest build_forest(const VectorStore& store, const AnnConfig& cfg,
                      std::size_t leaf_size, std::uint64_t seed, std::size_t threads = 1);

// Best-first traversal across all trees with a shared priority queue ordered
// by margin; collects leaves until at least search_k distinct candidates were
// inspected, then re-ranks candidates exactly.
std::vector<ScoredId> ann_search(const RpForest& forest, const VectorStore& store,
                                 const VecF& query, std::size_t k, std::size_t search_k);

// Text embedding file: "emb v1 <count> <dim>" then one record per line:
// id, tab, base64 of <dim> little-endian float32 values.
void export_embeddings(const VectorStore& store, const std::string& path);
VectorStore import_embeddings(const std::string& path);

// Self-contained index file: the store plus the forest.
void save_index(const RpForest& forest, const VectorStore& store, const std::string& path);
struct LoadedIndex {
    RpForest forest;
    VectorStore store;
};
LoadedIndex load_index(const std::string& path);

}  // namespace retkit::index
