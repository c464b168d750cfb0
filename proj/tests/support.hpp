#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "retkit/rng.hpp"

namespace testsupport {

// Fresh scratch directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("retkit_" + tag + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

inline Eigen::VectorXf random_unit_vector(std::size_t dim, retkit::SplitMix64& rng) {
    Eigen::VectorXf v(static_cast<Eigen::Index>(dim));
    // Box-Muller from uniform bits; direction is what matters
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double u1 = rng.next_double();
        double u2 = rng.next_double();
        if (u1 < 1e-12) u1 = 1e-12;
        v(i) = static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                                  std::cos(2.0 * 3.14159265358979323846 * u2));
    }
    float n = v.norm();
    return v / (n > 0 ? n : 1.0f);
}

inline Eigen::MatrixXf random_unit_rows(std::size_t n, std::size_t dim,
                                        retkit::SplitMix64& rng) {
    Eigen::MatrixXf m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        m.row(static_cast<Eigen::Index>(i)) = random_unit_vector(dim, rng).transpose();
    }
    return m;
}

}  // namespace testsupport
