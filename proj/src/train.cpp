#include "retkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "retkit/common.hpp"

namespace retkit::train {

namespace {

using enc::AlignLayer;
using enc::PoolMode;
using enc::Side;

struct ForwardCache {
    std::vector<std::uint32_t> ids;
    Mat H;                                // d x m
    Vec gamma;                            // attention weights over columns
    std::vector<Eigen::Index> argmax_col; // first maximal column per row
    Vec h_mean, h_max, h_attn;
    Vec u;    // pre-beta fused vector
    Vec v;    // beta * u, pre-alignment
    Vec out;  // final encoder output
};

std::vector<std::uint32_t> truncated(const std::vector<std::uint32_t>& ids, std::size_t cap) {
    if (ids.size() <= cap) return ids;
    return std::vector<std::uint32_t>(ids.begin(), ids.begin() + static_cast<long>(cap));
}

ForwardCache forward_encoder(const EncoderParams& p, std::vector<std::uint32_t> ids,
                             Side side) {
    ForwardCache c;
    c.ids = std::move(ids);
    c.H = enc::gather_columns(p, c.ids);
    const Eigen::Index d = c.H.rows();
    const Eigen::Index m = c.H.cols();

    c.h_mean = c.H.rowwise().sum() / static_cast<double>(m);

    c.h_max.resize(d);
    c.argmax_col.assign(static_cast<std::size_t>(d), 0);
    for (Eigen::Index r = 0; r < d; ++r) {
        double best = c.H(r, 0);
        Eigen::Index best_j = 0;
        for (Eigen::Index j = 1; j < m; ++j) {
            if (c.H(r, j) > best) {  // strict: ties resolve to the first column
                best = c.H(r, j);
                best_j = j;
            }
        }
        c.h_max(r) = best;
        c.argmax_col[static_cast<std::size_t>(r)] = best_j;
    }

    c.gamma = enc::attention_weights(c.H, p.attn_weight);
    c.h_attn = c.H * c.gamma;

    c.u = p.w_mean * c.h_mean + p.w_max * c.h_max + p.w_attn * c.h_attn;
    c.v = p.beta * c.u;
    if (side == Side::code && p.align) {
        c.out = p.align->A * c.v + p.align->b;
    } else {
        c.out = c.v;
    }
    return c;
}

void backward_encoder(const EncoderParams& p, const ForwardCache& c, const Vec& dout,
                      Side side, EncoderGrads& g) {
    Vec dv;
    if (side == Side::code && p.align) {
        g.align->A.noalias() += dout * c.v.transpose();
        g.align->b += dout;
        dv = p.align->A.transpose() * dout;
    } else {
        dv = dout;
    }

    g.beta += dv.dot(c.u);
    Vec du = p.beta * dv;

    g.w_mean += du.dot(c.h_mean);
    g.w_max += du.dot(c.h_max);
    g.w_attn += du.dot(c.h_attn);

    const Eigen::Index d = c.H.rows();
    const Eigen::Index m = c.H.cols();
    Vec dh_mean = p.w_mean * du;
    Vec dh_max = p.w_max * du;
    Vec dh_attn = p.w_attn * du;

    Mat dH = Mat::Zero(d, m);
    dH.colwise() += (dh_mean / static_cast<double>(m)).eval();
    for (Eigen::Index r = 0; r < d; ++r) {
        dH(r, c.argmax_col[static_cast<std::size_t>(r)]) += dh_max(r);
    }
    // h_attn = H*gamma with gamma = softmax(H^T w_h)
    Vec dgamma = c.H.transpose() * dh_attn;
    double gd = c.gamma.dot(dgamma);
    Vec dscores = (c.gamma.array() * (dgamma.array() - gd)).matrix();
    g.attn_weight.noalias() += c.H * dscores;
    dH.noalias() += dh_attn * c.gamma.transpose();
    dH.noalias() += p.attn_weight * dscores.transpose();

    for (std::size_t j = 0; j < c.ids.size(); ++j) {
        g.embeddings.row(c.ids[j]) += dH.col(static_cast<Eigen::Index>(j)).transpose();
    }
}

double logsumexp(const Vec& s) {
    double m = s.maxCoeff();
    return m + std::log((s.array() - m).exp().sum());
}

struct BatchForward {
    std::vector<ForwardCache> queries;
    std::vector<ForwardCache> codes;
    std::vector<std::vector<ForwardCache>> negatives;  // per query row
    std::size_t skipped = 0;
};

BatchForward forward_batch(const EncoderParams& qp, const EncoderParams& cp,
                           std::span<const TrainPair* const> batch, const TrainConfig& cfg) {
    BatchForward f;
    for (const TrainPair* pair : batch) {
        auto q_ids = truncated(pair->query_ids, cfg.max_query_len);
        auto c_ids = truncated(pair->code_ids, cfg.max_code_len);
        if (q_ids.empty() || c_ids.empty()) {
            ++f.skipped;
            continue;
        }
        f.queries.push_back(forward_encoder(qp, std::move(q_ids), Side::query));
        f.codes.push_back(forward_encoder(cp, std::move(c_ids), Side::code));
        std::vector<ForwardCache> negs;
        for (const auto& n_ids : pair->negative_code_ids) {
            auto trunc = truncated(n_ids, cfg.max_code_len);
            if (trunc.empty()) {
                ++f.skipped;
                continue;
            }
            negs.push_back(forward_encoder(cp, std::move(trunc), Side::code));
        }
        f.negatives.push_back(std::move(negs));
    }
    if (f.queries.size() < 2) {
        throw data_error("batch has fewer than 2 usable examples (in-batch negatives "
                         "require at least one other pair)");
    }
    return f;
}

// Per-row score vector: in-batch code columns followed by this row's own
// explicit negatives.
Vec row_scores(const BatchForward& f, std::size_t i) {
    const std::size_t b = f.queries.size();
    const auto& negs = f.negatives[i];
    Vec s(static_cast<Eigen::Index>(b + negs.size()));
    for (std::size_t j = 0; j < b; ++j) {
        s(static_cast<Eigen::Index>(j)) = f.queries[i].out.dot(f.codes[j].out);
    }
    for (std::size_t l = 0; l < negs.size(); ++l) {
        s(static_cast<Eigen::Index>(b + l)) = f.queries[i].out.dot(negs[l].out);
    }
    return s;
}

}  // namespace

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& p) {
    EncoderGrads g;
    g.embeddings = Mat::Zero(p.embeddings.rows(), p.embeddings.cols());
    g.attn_weight = Vec::Zero(p.attn_weight.size());
    if (p.align) {
        g.align = AlignLayer{Mat::Zero(p.align->A.rows(), p.align->A.cols()),
                             Vec::Zero(p.align->b.size())};
    }
    return g;
}

double contrastive_loss(const Mat& Q, const Mat& C) {
    if (Q.rows() != C.rows() || Q.cols() != C.cols()) {
        throw data_error("contrastive_loss: shape mismatch");
    }
    if (Q.rows() < 2) throw data_error("contrastive_loss: batch size must be >= 2");
    if (!Q.allFinite() || !C.allFinite()) {
        throw data_error("contrastive_loss: non-finite input");
    }
    Mat S = Q * C.transpose();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        loss += logsumexp(S.row(i).transpose()) - S(i, i);
    }
    return loss / static_cast<double>(S.rows());
}

double batch_loss(const EncoderParams& qp, const EncoderParams& cp,
                  std::span<const TrainPair> batch, const TrainConfig& cfg) {
    std::vector<const TrainPair*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& p : batch) ptrs.push_back(&p);
    BatchForward f = forward_batch(qp, cp, ptrs, cfg);
    const std::size_t b = f.queries.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        Vec s = row_scores(f, i);
        loss += logsumexp(s) - s(static_cast<Eigen::Index>(i));
    }
    loss /= static_cast<double>(b);
    if (cfg.symmetric_loss) {
        Mat S(b, b);
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < b; ++j) {
                S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    f.queries[i].out.dot(f.codes[j].out);
            }
        }
        double col_loss = 0.0;
        for (Eigen::Index j = 0; j < S.cols(); ++j) {
            col_loss += logsumexp(S.col(j)) - S(j, j);
        }
        loss = 0.5 * (loss + col_loss / static_cast<double>(b));
    }
    return loss;
}

BatchGradients compute_gradients(const EncoderParams& qp, const EncoderParams& cp,
                                 std::span<const TrainPair> batch, const TrainConfig& cfg) {
    std::vector<const TrainPair*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& p : batch) ptrs.push_back(&p);

    BatchForward f = forward_batch(qp, cp, ptrs, cfg);
    const std::size_t b = f.queries.size();

    BatchGradients result;
    result.skipped = f.skipped;
    result.grads.query = EncoderGrads::zeros_like(qp);
    result.grads.code = EncoderGrads::zeros_like(cp);

    const double inv_b = 1.0 / static_cast<double>(b);
    const double row_weight = cfg.symmetric_loss ? 0.5 : 1.0;

    std::vector<Vec> dq(b), dc(b);
    for (std::size_t i = 0; i < b; ++i) dq[i] = Vec::Zero(f.queries[i].out.size());
    for (std::size_t j = 0; j < b; ++j) dc[j] = Vec::Zero(f.codes[j].out.size());
    std::vector<std::vector<Vec>> dn(b);

    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        Vec s = row_scores(f, i);
        double lse = logsumexp(s);
        loss += lse - s(static_cast<Eigen::Index>(i));
        Vec g = (s.array() - lse).exp();  // softmax of the row
        g(static_cast<Eigen::Index>(i)) -= 1.0;
        g *= inv_b * row_weight;
        for (std::size_t j = 0; j < b; ++j) {
            double w = g(static_cast<Eigen::Index>(j));
            dq[i] += w * f.codes[j].out;
            dc[j] += w * f.queries[i].out;
        }
        const auto& negs = f.negatives[i];
        dn[i].reserve(negs.size());
        for (std::size_t l = 0; l < negs.size(); ++l) {
            double w = g(static_cast<Eigen::Index>(b + l));
            dq[i] += w * negs[l].out;
            dn[i].push_back(w * f.queries[i].out);
        }
    }
    loss *= inv_b;

    if (cfg.symmetric_loss) {
        double col_loss = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
            Vec s(static_cast<Eigen::Index>(b));
            for (std::size_t i = 0; i < b; ++i) {
                s(static_cast<Eigen::Index>(i)) = f.queries[i].out.dot(f.codes[j].out);
            }
            double lse = logsumexp(s);
            col_loss += lse - s(static_cast<Eigen::Index>(j));
            Vec g = (s.array() - lse).exp();
            g(static_cast<Eigen::Index>(j)) -= 1.0;
            g *= inv_b * 0.5;
            for (std::size_t i = 0; i < b; ++i) {
                double w = g(static_cast<Eigen::Index>(i));
                dq[i] += w * f.codes[j].out;
                dc[j] += w * f.queries[i].out;
            }
        }
        loss = 0.5 * (loss + col_loss * inv_b);
    }

    if (!std::isfinite(loss)) throw data_error("compute_gradients: non-finite loss");
    result.loss = loss;

    for (std::size_t i = 0; i < b; ++i) {
        backward_encoder(qp, f.queries[i], dq[i], Side::query, result.grads.query);
    }
    for (std::size_t j = 0; j < b; ++j) {
        backward_encoder(cp, f.codes[j], dc[j], Side::code, result.grads.code);
    }
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t l = 0; l < dn[i].size(); ++l) {
            backward_encoder(cp, f.negatives[i][l], dn[i][l], Side::code, result.grads.code);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Gradient checker
// ---------------------------------------------------------------------------

namespace {

// Flat view over every parameter tensor of the encoder pair, used to walk
// coordinates generically.
struct ParamSlot {
    double* value;
    const double* grad;
    const char* tensor;
};

void collect_slots(EncoderParams& p, const EncoderGrads& g, const char* side,
                   std::vector<std::vector<ParamSlot>>& tensors,
                   std::vector<std::string>& names) {
    auto add_tensor = [&](double* values, const double* grads, std::size_t n,
                          const std::string& name) {
        std::vector<ParamSlot> slots(n);
        for (std::size_t i = 0; i < n; ++i) slots[i] = {values + i, grads + i, nullptr};
        tensors.push_back(std::move(slots));
        names.push_back(std::string(side) + "." + name);
    };
    add_tensor(p.embeddings.data(), g.embeddings.data(),
               static_cast<std::size_t>(p.embeddings.size()), "embeddings");
    add_tensor(p.attn_weight.data(), g.attn_weight.data(),
               static_cast<std::size_t>(p.attn_weight.size()), "attn_weight");
    add_tensor(&p.w_mean, &g.w_mean, 1, "w_mean");
    add_tensor(&p.w_max, &g.w_max, 1, "w_max");
    add_tensor(&p.w_attn, &g.w_attn, 1, "w_attn");
    add_tensor(&p.beta, &g.beta, 1, "beta");
    if (p.align && g.align) {
        add_tensor(p.align->A.data(), g.align->A.data(),
                   static_cast<std::size_t>(p.align->A.size()), "align.A");
        add_tensor(p.align->b.data(), g.align->b.data(),
                   static_cast<std::size_t>(p.align->b.size()), "align.b");
    }
}

}  // namespace

double grad_check(const EncoderParams& qp_in, const EncoderParams& cp_in,
                  std::span<const TrainPair> batch, const TrainConfig& cfg,
                  double epsilon, std::size_t min_coords, std::uint64_t seed) {
    EncoderParams qp = qp_in;
    EncoderParams cp = cp_in;
    BatchGradients analytic = compute_gradients(qp, cp, batch, cfg);

    std::vector<std::vector<ParamSlot>> tensors;
    std::vector<std::string> names;
    collect_slots(qp, analytic.grads.query, "query", tensors, names);
    collect_slots(cp, analytic.grads.code, "code", tensors, names);

    SplitMix64 rng(seed);
    std::size_t per_tensor = std::max<std::size_t>(4, min_coords / tensors.size() + 1);

    double max_rel_err = 0.0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        auto& slots = tensors[t];
        std::size_t n_checks = std::min(per_tensor, slots.size());
        for (std::size_t c = 0; c < n_checks; ++c) {
            std::size_t idx = slots.size() <= per_tensor
                                  ? c
                                  : static_cast<std::size_t>(rng.next_below(slots.size()));
            double* value = slots[idx].value;
            double saved = *value;
            *value = saved + epsilon;
            double loss_plus = batch_loss(qp, cp, batch, cfg);
            *value = saved - epsilon;
            double loss_minus = batch_loss(qp, cp, batch, cfg);
            *value = saved;
            double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            double analytic_g = *slots[idx].grad;
            double diff = std::abs(analytic_g - numeric);
            // differences below the central-difference noise floor
            // (machine epsilon / step) are agreement, not error; the loss is
            // invariant to some parameters (the alignment bias shifts every
            // softmax row by a constant), so both sides can be legitimately
            // tiny
            double rel = diff < 1e-9
                             ? 0.0
                             : diff / std::max({std::abs(analytic_g), std::abs(numeric),
                                                1e-8});
            max_rel_err = std::max(max_rel_err, rel);
        }
    }
    return max_rel_err;
}

// ---------------------------------------------------------------------------
// Optimizers and the training loop
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
    EncoderGrads m;
    EncoderGrads v;
};

void adam_update_array(double* theta, const double* g, double* m, double* v, std::size_t n,
                       const TrainConfig& cfg, double bias1, double bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
        double mhat = m[i] / bias1;
        double vhat = v[i] / bias2;
        theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

void sgd_update_array(double* theta, const double* g, std::size_t n, double lr) {
    for (std::size_t i = 0; i < n; ++i) theta[i] -= lr * g[i];
}

void apply_update(EncoderParams& p, const EncoderGrads& g, AdamState* adam_state,
                  AdamState* /*unused*/, const TrainConfig& cfg, std::size_t step,
                  bool embeddings_only) {
    struct Piece {
        double* theta;
        const double* grad;
        double* m;
        double* v;
        std::size_t n;
        bool frozen;
    };
    std::vector<Piece> pieces;
    auto add = [&](double* theta, const double* grad, double* m, double* v, std::size_t n,
                   bool frozen) { pieces.push_back({theta, grad, m, v, n, frozen}); };

    EncoderGrads* m = adam_state ? &adam_state->m : nullptr;
    EncoderGrads* v = adam_state ? &adam_state->v : nullptr;
    add(p.embeddings.data(), g.embeddings.data(), m ? m->embeddings.data() : nullptr,
        v ? v->embeddings.data() : nullptr, static_cast<std::size_t>(p.embeddings.size()),
        false);
    add(p.attn_weight.data(), g.attn_weight.data(), m ? m->attn_weight.data() : nullptr,
        v ? v->attn_weight.data() : nullptr, static_cast<std::size_t>(p.attn_weight.size()),
        embeddings_only);
    add(&p.w_mean, &g.w_mean, m ? &m->w_mean : nullptr, v ? &v->w_mean : nullptr, 1,
        embeddings_only);
    add(&p.w_max, &g.w_max, m ? &m->w_max : nullptr, v ? &v->w_max : nullptr, 1,
        embeddings_only);
    add(&p.w_attn, &g.w_attn, m ? &m->w_attn : nullptr, v ? &v->w_attn : nullptr, 1,
        embeddings_only);
    add(&p.beta, &g.beta, m ? &m->beta : nullptr, v ? &v->beta : nullptr, 1, embeddings_only);
    if (p.align && g.align) {
        add(p.align->A.data(), g.align->A.data(), m ? m->align->A.data() : nullptr,
            v ? v->align->A.data() : nullptr, static_cast<std::size_t>(p.align->A.size()),
            embeddings_only);
        add(p.align->b.data(), g.align->b.data(), m ? m->align->b.data() : nullptr,
            v ? v->align->b.data() : nullptr, static_cast<std::size_t>(p.align->b.size()),
            embeddings_only);
    }

    double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
    double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
    for (auto& piece : pieces) {
        if (piece.frozen) continue;
        if (cfg.optimizer == Optimizer::adam) {
            adam_update_array(piece.theta, piece.grad, piece.m, piece.v, piece.n, cfg, bias1,
                              bias2);
        } else {
            sgd_update_array(piece.theta, piece.grad, piece.n, cfg.lr);
        }
    }
}

}  // namespace

TrainResult train_from(const TrainConfig& cfg, EncoderParams query_params,
                       EncoderParams code_params, const std::vector<TrainPair>& pairs) {
    if (cfg.batch_size < 2) throw data_error("train: batch_size must be >= 2");
    if (cfg.epochs > 0 && pairs.size() < cfg.batch_size) {
        throw data_error("train: need at least batch_size (" +
                         std::to_string(cfg.batch_size) + ") pairs, have " +
                         std::to_string(pairs.size()));
    }

    TrainResult result;
    result.query_params = std::move(query_params);
    result.code_params = std::move(code_params);

    AdamState q_adam, c_adam;
    if (cfg.optimizer == Optimizer::adam) {
        q_adam.m = EncoderGrads::zeros_like(result.query_params);
        q_adam.v = EncoderGrads::zeros_like(result.query_params);
        c_adam.m = EncoderGrads::zeros_like(result.code_params);
        c_adam.v = EncoderGrads::zeros_like(result.code_params);
    }

    const bool embeddings_only = cfg.fusion == FusionMode::mean_only;
    SplitMix64 shuffle_rng(cfg.seed ^ 0xA5A5A5A55A5A5A5AULL);
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        seeded_shuffle(order, shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t n_batches = pairs.size() / cfg.batch_size;  // ragged tail dropped
        for (std::size_t bidx = 0; bidx < n_batches; ++bidx) {
            std::vector<TrainPair> batch;
            batch.reserve(cfg.batch_size);
            for (std::size_t k = 0; k < cfg.batch_size; ++k) {
                batch.push_back(pairs[order[bidx * cfg.batch_size + k]]);
            }
            BatchGradients bg = compute_gradients(result.query_params, result.code_params,
                                                  batch, cfg);
            result.skipped += bg.skipped;
            if (!std::isfinite(bg.loss)) {
                throw internal_error("train: non-finite loss at epoch " +
                                     std::to_string(epoch + 1) + " batch " +
                                     std::to_string(bidx));
            }
            ++step;
            apply_update(result.query_params, bg.grads.query,
                         cfg.optimizer == Optimizer::adam ? &q_adam : nullptr, nullptr, cfg,
                         step, embeddings_only);
            apply_update(result.code_params, bg.grads.code,
                         cfg.optimizer == Optimizer::adam ? &c_adam : nullptr, nullptr, cfg,
                         step, embeddings_only);
            epoch_loss += bg.loss;
        }
        result.epoch_losses.push_back(n_batches > 0 ? epoch_loss / static_cast<double>(n_batches)
                                                    : 0.0);
    }
    return result;
}

TrainResult train_retriever(const TrainConfig& cfg, const std::vector<TrainPair>& pairs,
                            std::size_t query_vocab_size, std::size_t code_vocab_size) {
    SplitMix64 init_rng(cfg.seed);
    const std::size_t dim = 128;
    bool full = cfg.fusion == FusionMode::full;
    EncoderParams qp = enc::init_params(query_vocab_size, dim, /*with_align=*/false, init_rng);
    EncoderParams cp = enc::init_params(code_vocab_size, dim, /*with_align=*/full, init_rng);
    if (!full) {
        qp.w_mean = cp.w_mean = 1.0;
        qp.w_max = cp.w_max = 0.0;
        qp.w_attn = cp.w_attn = 0.0;
        qp.beta = cp.beta = 1.0;
    }
    return train_from(cfg, std::move(qp), std::move(cp), pairs);
}

std::vector<LabeledPair> sample_negatives(
    const std::vector<std::pair<std::string, std::string>>& positives,
    const std::vector<std::string>& pool, std::size_t k, std::uint64_t seed) {
    std::vector<std::string> sorted_pool = pool;
    std::sort(sorted_pool.begin(), sorted_pool.end());
    sorted_pool.erase(std::unique(sorted_pool.begin(), sorted_pool.end()), sorted_pool.end());
    if (sorted_pool.size() <= k) {
        throw data_error("sample_negatives: pool of " + std::to_string(sorted_pool.size()) +
                         " cannot supply " + std::to_string(k) + " negatives");
    }
    SplitMix64 rng(seed);
    std::vector<LabeledPair> out;
    out.reserve(positives.size() * (k + 1));
    for (const auto& [query_id, target_id] : positives) {
        out.push_back({query_id, target_id, true});
        std::vector<std::string> eligible;
        eligible.reserve(sorted_pool.size());
        for (const auto& id : sorted_pool) {
            if (id != target_id) eligible.push_back(id);
        }
        auto picks = sample_without_replacement(eligible.size(), k, rng);
        for (std::size_t idx : picks) out.push_back({query_id, eligible[idx], false});
    }
    return out;
}

void save_loss_curve(const std::vector<double>& losses, const std::string& path) {
    std::ostringstream out;
    out << "# losscurve v1\n";
    out << "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.12g\n", i + 1, losses[i]);
        out << buf;
    }
    write_text_file(path, out.str());
}

}  // namespace retkit::train
