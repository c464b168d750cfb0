#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retkit/encoder.hpp"

namespace retkit::train {

using enc::EncoderParams;
using enc::Mat;
using enc::Vec;

enum class Optimizer { sgd, adam };

// mean_only pins the fusion to plain mean pooling (w = (1,0,0), beta = 1,
// attention weights zero, no alignment) and trains embeddings only; the
// plain neural-bag-of-words baseline the fusion encoder is compared against.
enum class FusionMode { full, mean_only };

struct TrainConfig {
    std::size_t batch_size = 256;
    double lr = 1e-3;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    Optimizer optimizer = Optimizer::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t max_query_len = 30;   // docstring tokens kept before encoding
    std::size_t max_code_len = 200;   // code tokens kept before encoding
    FusionMode fusion = FusionMode::full;
    bool symmetric_loss = false;      // also softmax over queries per code column
};

// One training example: query-side token ids paired with code-side token ids,
// plus optional explicit negative documents appended to this example's
// softmax row (the fine-tuning protocol with k random negatives).
struct TrainPair {
    std::vector<std::uint32_t> query_ids;
    std::vector<std::uint32_t> code_ids;
    std::vector<std::vector<std::uint32_t>> negative_code_ids;
};

struct EncoderGrads {
    Mat embeddings;
    Vec attn_weight;
    double w_mean = 0.0;
    double w_max = 0.0;
    double w_attn = 0.0;
    double beta = 0.0;
    std::optional<enc::AlignLayer> align;  // reused as (dA, db) storage

    static EncoderGrads zeros_like(const EncoderParams& p);
};

struct GradientSet {
    EncoderGrads query;
    EncoderGrads code;
};

struct BatchGradients {
    double loss = 0.0;
    GradientSet grads;
    std::size_t skipped = 0;  // examples dropped for empty sequences
};

// In-batch softmax cross-entropy over unnormalized dot products:
// S_ij = Q_i . C_j, loss = -(1/B) sum_i log softmax_row_i(S)_ii.
double contrastive_loss(const Mat& Q, const Mat& C);

// Loss only, same conventions as compute_gradients (used by the checker).
double batch_loss(const EncoderParams& qp, const EncoderParams& cp,
                  std::span<const TrainPair> batch, const TrainConfig& cfg);

// Exact analytic gradients of the batch loss through fusion, the three
// pooling modes, the alignment layer, and the embedding lookups.
BatchGradients compute_gradients(const EncoderParams& qp, const EncoderParams& cp,
                                 std::span<const TrainPair> batch, const TrainConfig& cfg);

// Central-difference check over a fixed random sample of parameter
// coordinates (at least min_coords, spread over every tensor).
// Returns max |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|, 1e-8).
double grad_check(const EncoderParams& qp, const EncoderParams& cp,
                  std::span<const TrainPair> batch, const TrainConfig& cfg,
                  double epsilon = 1e-5, std::size_t min_coords = 200,
                  std::uint64_t seed = 17);

struct TrainResult {
    EncoderParams query_params;
    EncoderParams code_params;
    std::vector<double> epoch_losses;  // mean batch loss per epoch
    std::size_t skipped = 0;
};

// Full contrastive training loop: seeded shuffle per epoch, fixed-size
// batches (final ragged batch dropped), deterministic for a given config.
TrainResult train_retriever(const TrainConfig& cfg, const std::vector<TrainPair>& pairs,
                            std::size_t query_vocab_size, std::size_t code_vocab_size);

// As train_retriever but starting from existing parameters (fine-tuning).
TrainResult train_from(const TrainConfig& cfg, EncoderParams query_params,
                       EncoderParams code_params, const std::vector<TrainPair>& pairs);

struct LabeledPair {
    std::string query_id;
    std::string target_id;
    bool positive = false;
};

// For each positive, draws k uniform negatives from the pool excluding that
// positive's own target. Deterministic by seed.
std::vector<LabeledPair> sample_negatives(
    const std::vector<std::pair<std::string, std::string>>& positives,
    const std::vector<std::string>& pool, std::size_t k, std::uint64_t seed);

// Loss-curve artifact: "# losscurve v1" then "epoch,loss" rows.
void save_loss_curve(const std::vector<double>& losses, const std::string& path);

}  // namespace retkit::train
