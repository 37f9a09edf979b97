#include "compot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace compot::kernels {

namespace {

constexpr std::int64_t kColBlock = 256;

inline std::int64_t block_count(std::int64_t n) {
    return (n + kColBlock - 1) / kColBlock;
}

inline std::pair<std::int64_t, std::int64_t> block_range(std::int64_t b, std::int64_t n) {
    const std::int64_t lo = b * kColBlock;
    return {lo, std::min(lo + kColBlock, n)};
}

// Top-s selection for one column; total order = magnitude desc, row asc.
void threshold_column(const double* z, std::int64_t k, std::int64_t s, double* out,
                      std::vector<std::int32_t>& scratch) {
    std::fill(out, out + k, 0.0);
    if (s >= k) {
        std::copy(z, z + k, out);
        return;
    }
    scratch.resize(static_cast<std::size_t>(k));
    std::iota(scratch.begin(), scratch.end(), 0);
    auto cmp = [z](std::int32_t a, std::int32_t b) {
        const double ma = std::abs(z[a]);
        const double mb = std::abs(z[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    };
    std::nth_element(scratch.begin(), scratch.begin() + s, scratch.end(), cmp);
    for (std::int64_t i = 0; i < s; ++i) {
        const std::int32_t r = scratch[static_cast<std::size_t>(i)];
        out[r] = z[r];
    }
}

}  // namespace

MatrixXd matmul_at_b(const MatrixXd& a, const MatrixXd& b, Exec exec) {
    MatrixXd z(a.cols(), b.cols());
    const std::int64_t nb = block_count(b.cols());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
    for (std::int64_t blk = 0; blk < nb; ++blk) {
        const auto [lo, hi] = block_range(blk, b.cols());
        z.middleCols(lo, hi - lo).noalias() = a.transpose() * b.middleCols(lo, hi - lo);
    }
    return z;
}

MatrixXd matmul_a_bt(const MatrixXd& a, const MatrixXd& b, Exec exec) {
    MatrixXd m(a.rows(), b.rows());
    const std::int64_t nb = block_count(b.rows());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
    for (std::int64_t blk = 0; blk < nb; ++blk) {
        const auto [lo, hi] = block_range(blk, b.rows());
        m.middleCols(lo, hi - lo).noalias() = a * b.middleRows(lo, hi - lo).transpose();
    }
    return m;
}

MatrixXd matmul_a_b(const MatrixXd& a, const MatrixXd& b, Exec exec) {
    MatrixXd c(a.rows(), b.cols());
    const std::int64_t nb = block_count(b.cols());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
    for (std::int64_t blk = 0; blk < nb; ++blk) {
        const auto [lo, hi] = block_range(blk, b.cols());
        c.middleCols(lo, hi - lo).noalias() = a * b.middleCols(lo, hi - lo);
    }
    return c;
}

void hard_threshold_columns(const MatrixXd& z, std::int64_t s, MatrixXd& out, Exec exec) {
    out.resize(z.rows(), z.cols());
    const std::int64_t n = z.cols();
    const std::int64_t k = z.rows();
#pragma omp parallel if (exec == Exec::Parallel)
    {
        std::vector<std::int32_t> scratch;
#pragma omp for schedule(dynamic, 64)
        for (std::int64_t j = 0; j < n; ++j) {
            threshold_column(z.col(j).data(), k, s, out.col(j).data(), scratch);
        }
    }
}

void gram_update(MatrixXd& g, const MatrixXd& x, Exec exec) {
    const std::int64_t m = x.cols();
#pragma omp parallel for schedule(dynamic, 8) if (exec == Exec::Parallel)
    for (std::int64_t j = 0; j < m; ++j) {
        for (std::int64_t i = 0; i <= j; ++i) {
            const double v = x.col(i).dot(x.col(j));
            g(i, j) += v;
            if (i != j) g(j, i) += v;
        }
    }
}

double residual_squared_norm(const MatrixXd& w, const MatrixXd& d, const MatrixXd& s, Exec exec) {
    const std::int64_t nb = block_count(w.cols());
    std::vector<double> partial(static_cast<std::size_t>(nb), 0.0);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
    for (std::int64_t blk = 0; blk < nb; ++blk) {
        const auto [lo, hi] = block_range(blk, w.cols());
        partial[static_cast<std::size_t>(blk)] =
            (w.middleCols(lo, hi - lo) - d * s.middleCols(lo, hi - lo)).squaredNorm();
    }
    double total = 0.0;
    for (double p : partial) total += p;  // fixed order, independent of threads
    return total;
}

}  // namespace compot::kernels
