#include "retkit/encoder.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <cstring>
#include <fstream>
#include <sstream>

#include "retkit/common.hpp"

namespace retkit::enc {

EncoderParams init_params(std::size_t vocab_size, std::size_t dim, bool with_align,
                          SplitMix64& rng) {
    EncoderParams p;
    p.embeddings.resize(static_cast<Eigen::Index>(vocab_size), static_cast<Eigen::Index>(dim));
    for (Eigen::Index r = 0; r < p.embeddings.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.embeddings.cols(); ++c) {
            p.embeddings(r, c) = rng.next_uniform(-0.05, 0.05);
        }
    }
    p.attn_weight = Vec::Zero(static_cast<Eigen::Index>(dim));
    if (with_align) {
        p.align = AlignLayer{Mat::Identity(static_cast<Eigen::Index>(dim),
                                           static_cast<Eigen::Index>(dim)),
                             Vec::Zero(static_cast<Eigen::Index>(dim))};
    }
    return p;
}

Vec attention_weights(const Mat& H, const Vec& w_h) {
    Vec scores = H.transpose() * w_h;
    double max_score = scores.maxCoeff();
    Vec gamma = (scores.array() - max_score).exp();
    return gamma / gamma.sum();
}

Vec pool(const Mat& H, PoolMode mode, const Vec& w_h) {
    if (H.cols() == 0) throw data_error("pool: empty token sequence");
    switch (mode) {
        case PoolMode::mean:
            return H.rowwise().sum() / static_cast<double>(H.cols());
        case PoolMode::max:
            return H.rowwise().maxCoeff();
        case PoolMode::attn: {
            if (w_h.size() != H.rows()) throw data_error("pool: attention weight size mismatch");
            return H * attention_weights(H, w_h);
        }
    }
    throw internal_error("pool: unknown mode");
}

Vec fuse(const Vec& h_mean, const Vec& h_max, const Vec& h_attn, double w_mean,
         double w_max, double w_attn, double beta) {
    if (h_mean.size() != h_max.size() || h_mean.size() != h_attn.size()) {
        throw data_error("fuse: dimension mismatch");
    }
    return beta * (w_mean * h_mean + w_max * h_max + w_attn * h_attn);
}

Mat gather_columns(const EncoderParams& params, const std::vector<std::uint32_t>& ids) {
    if (ids.empty()) throw data_error("encode: empty token sequence");
    Mat H(params.dim(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] >= params.vocab_size()) {
            throw data_error("encode: token id " + std::to_string(ids[j]) +
                             " out of range for vocab " + std::to_string(params.vocab_size()));
        }
        H.col(static_cast<Eigen::Index>(j)) = params.embeddings.row(ids[j]).transpose();
    }
    return H;
}

Vec encode(const EncoderParams& params, const std::vector<std::uint32_t>& ids, Side side) {
    Mat H = gather_columns(params, ids);
    Vec v = fuse(pool(H, PoolMode::mean), pool(H, PoolMode::max),
                 pool(H, PoolMode::attn, params.attn_weight), params.w_mean, params.w_max,
                 params.w_attn, params.beta);
    if (side == Side::code && params.align) {
        v = params.align->A * v + params.align->b;
    }
    return v;
}

Vec normalize(const Vec& v) {
    double norm = v.norm();
    if (norm <= 0.0 || !std::isfinite(norm)) {
        throw data_error("normalize: zero or non-finite vector");
    }
    return v / norm;
}

namespace {

void write_floats(std::ofstream& out, const double* data, std::size_t count) {
    std::vector<float> buf(count);
    for (std::size_t i = 0; i < count; ++i) buf[i] = static_cast<float>(data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
}

void write_matrix(std::ofstream& out, const Mat& m) {
    // row-major on disk
    std::vector<float> buf(static_cast<std::size_t>(m.rows() * m.cols()));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) buf[k++] = static_cast<float>(m(r, c));
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::vector<float> read_floats(std::ifstream& in, std::size_t count, const std::string& path) {
    std::vector<float> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float)) {
        throw data_error("truncated parameter file: " + path);
    }
    return buf;
}

}  // namespace

void save_params(const EncoderParams& params, const std::string& path) {
    static_assert(std::endian::native == std::endian::little,
                  "parameter files are little-endian");
    const std::string partial = path + ".partial";
    std::ofstream out(partial, std::ios::binary);
    if (!out) throw data_error("cannot write parameter file: " + partial);
    out << "fenc v1 " << params.vocab_size() << " " << params.dim() << " "
        << (params.align ? 1 : 0) << "\n";
    write_matrix(out, params.embeddings);
    write_floats(out, params.attn_weight.data(), static_cast<std::size_t>(params.attn_weight.size()));
    double scalars[4] = {params.w_mean, params.w_max, params.w_attn, params.beta};
    write_floats(out, scalars, 4);
    if (params.align) {
        write_matrix(out, params.align->A);
        write_floats(out, params.align->b.data(), static_cast<std::size_t>(params.align->b.size()));
    }
    if (!out) throw data_error("short write: " + partial);
    out.close();
    std::error_code ec;
    std::filesystem::rename(partial, path, ec);
    if (ec) throw data_error("cannot finalize " + path + ": " + ec.message());
}

EncoderParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open parameter file: " + path);
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic, version;
    std::size_t vocab = 0, dim = 0;
    int has_align = 0;
    hs >> magic >> version >> vocab >> dim >> has_align;
    if (magic != "fenc" || version != "v1" || vocab == 0 || dim == 0) {
        throw data_error("not a parameter file: " + path);
    }
    EncoderParams p;
    p.embeddings.resize(static_cast<Eigen::Index>(vocab), static_cast<Eigen::Index>(dim));
    {
        auto buf = read_floats(in, vocab * dim, path);
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < p.embeddings.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.embeddings.cols(); ++c) {
                p.embeddings(r, c) = buf[k++];
            }
        }
    }
    {
        auto buf = read_floats(in, dim, path);
        p.attn_weight.resize(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) p.attn_weight(static_cast<Eigen::Index>(i)) = buf[i];
    }
    {
        auto buf = read_floats(in, 4, path);
        p.w_mean = buf[0];
        p.w_max = buf[1];
        p.w_attn = buf[2];
        p.beta = buf[3];
    }
    if (has_align) {
        AlignLayer align;
        align.A.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        auto buf = read_floats(in, dim * dim, path);
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < align.A.rows(); ++r) {
            for (Eigen::Index c = 0; c < align.A.cols(); ++c) align.A(r, c) = buf[k++];
        }
        auto bbuf = read_floats(in, dim, path);
        align.b.resize(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) align.b(static_cast<Eigen::Index>(i)) = bbuf[i];
        p.align = std::move(align);
    }
    return p;
}

}  // namespace retkit::enc
