#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "xmrt/core_math.hpp"
#include "xmrt/encoders.hpp"

namespace xmrt::test {

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(rows * cols);
    for (double& x : v) x = u(rng);
    return DenseMatrix(rows, cols, std::move(v));
}

inline DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(rows * cols);
    for (double& x : v) x = n(rng);
    return DenseMatrix(rows, cols, std::move(v));
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    return worst;
}

inline bool bit_equal(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.values()[i]) != std::bit_cast<std::uint64_t>(b.values()[i])) return false;
    return true;
}

inline bool params_bit_equal(const ModelParams& a, const ModelParams& b) {
    const auto ta = tensors(a);
    const auto tb = tensors(b);
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].name != tb[i].name || ta[i].data.size() != tb[i].data.size()) return false;
        for (std::size_t k = 0; k < ta[i].data.size(); ++k)
            if (std::bit_cast<std::uint64_t>(ta[i].data[k]) != std::bit_cast<std::uint64_t>(tb[i].data[k]))
                return false;
    }
    return true;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("xmrt_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace xmrt::test
