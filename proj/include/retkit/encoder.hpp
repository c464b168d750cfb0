#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retkit/rng.hpp"

namespace retkit::enc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class PoolMode { mean, max, attn };
enum class Side { query, code };

// Learnable linear map applied to the code-side vector so the code embedding
// space lines up with the docstring embedding space.
struct AlignLayer {
    Mat A;  // d x d
    Vec b;  // d
};

// All parameters of one bag-of-words fusion encoder. H's columns are the
// embedding vectors of the input tokens; the encoder pools H three ways,
// combines the pooled vectors with learnable weights, and scales by beta.
struct EncoderParams {
    Mat embeddings;  // vocab_size x d, one row per token
    Vec attn_weight; // d, scores the columns of H for attention pooling
    double w_mean = 1.0 / 3.0;
    double w_max = 1.0 / 3.0;
    double w_attn = 1.0 / 3.0;
    double beta = 1.0;
    std::optional<AlignLayer> align;  // present on the code side only

    Eigen::Index dim() const { return embeddings.cols(); }
    Eigen::Index vocab_size() const { return embeddings.rows(); }
};

// Embeddings ~ uniform(-0.05, 0.05); attention weights zero so attention
// pooling starts as mean pooling; fusion weights 1/3 each; identity alignment.
EncoderParams init_params(std::size_t vocab_size, std::size_t dim, bool with_align,
                          SplitMix64& rng);

// Column-softmax attention weights for H given the weight vector.
Vec attention_weights(const Mat& H, const Vec& w_h);

// Pools the m columns of H (d x m) into a single d-vector.
Vec pool(const Mat& H, PoolMode mode, const Vec& w_h = Vec());

// beta * (w_mean*h_mean + w_max*h_max + w_attn*h_attn)
Vec fuse(const Vec& h_mean, const Vec& h_max, const Vec& h_attn, double w_mean,
         double w_max, double w_attn, double beta);

// Gathers rows of the embedding table into H columns.
Mat gather_columns(const EncoderParams& params, const std::vector<std::uint32_t>& ids);

// Full encoder forward pass (unnormalized output).
Vec encode(const EncoderParams& params, const std::vector<std::uint32_t>& ids, Side side);

// v / ||v||; rejects the zero vector.
Vec normalize(const Vec& v);

// Binary parameter file: "fenc v1 <vocab> <d> <has_align>\n" then row-major
// little-endian float32 for embeddings, attn_weight, w_mean, w_max, w_attn,
// beta, and (if present) A and b.
void save_params(const EncoderParams& params, const std::string& path);
EncoderParams load_params(const std::string& path);

}  // namespace retkit::enc
