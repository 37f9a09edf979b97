#include "compot/baselines.hpp"

#include "compot/svd.hpp"

#include <Eigen/QR>

#include <cmath>
#include <map>

namespace compot {

WhitenedSvdFactors truncated_whitened_svd(const WeightMatrix& w, const CholeskyFactor& f,
                                          std::int64_t r) {
    const std::int64_t limit = std::min(w.rows(), w.cols());
    if (r < 1 || r > limit)
        throw ConfigError("rank " + std::to_string(r) + " out of range [1, " +
                          std::to_string(limit) + "]");
    const MatrixXd whitened = whiten(f, w.data);
    ThinSvd svd = thin_svd(whitened);

    WhitenedSvdFactors out;
    out.u = svd.u.leftCols(r);
    out.sigma = svd.sigma.head(r);
    out.v = svd.v.leftCols(r);
    out.whitened_residual_sq = svd.sigma.tail(svd.sigma.size() - r).squaredNorm();
    const MatrixXd truncated = out.u * out.sigma.asDiagonal() * out.v.transpose();
    out.w_hat = dewhiten_dictionary(f, truncated);
    return out;
}

double theoretical_loss(const WeightMatrix& w, const CholeskyFactor& f, double cr) {
    if (!(cr > 0.0 && cr < 1.0)) throw ConfigError("cr must lie in (0, 1)");
    const MatrixXd whitened = whiten(f, w.data);
    const double m = static_cast<double>(w.rows());
    const double n = static_cast<double>(w.cols());
    // Truncation toward zero, exactly as the recipe computes its rank.
    auto rank = static_cast<std::int64_t>(m * n * cr / (m + n));
    const VectorXd sv = singular_values(whitened);
    if (rank >= sv.size()) return 0.0;
    return sv.tail(sv.size() - rank).norm();
}

std::vector<double> v2_cr_allocation(const std::vector<WeightMatrix>& weights,
                                     const std::vector<CholeskyFactor>& factors,
                                     const std::vector<std::string>& group_of, double target_cr) {
    if (weights.size() != factors.size() || weights.size() != group_of.size())
        throw ConfigError("v2 allocation inputs must have matching lengths");
    if (weights.empty()) throw ConfigError("v2 allocation requires at least one matrix");

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < weights.size(); ++i) groups[group_of[i]].push_back(i);

    std::vector<double> ratios(weights.size(), 0.0);
    for (const auto& [tag, idx] : groups) {
        std::vector<double> inv_log(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const double loss = theoretical_loss(weights[idx[j]], factors[idx[j]], target_cr);
            if (loss <= 1.0)
                throw NumericalError("V2 normalization undefined: theoretical loss " +
                                     std::to_string(loss) + " <= 1 in group " + tag);
            inv_log[j] = 1.0 / std::log(loss);
        }
        double sum = 0.0;
        for (double v : inv_log) sum += v;
        const double scale = static_cast<double>(idx.size()) * target_cr / sum;
        for (std::size_t j = 0; j < idx.size(); ++j) ratios[idx[j]] = scale * inv_log[j];
    }
    return ratios;
}

BruteForceCode brute_force_sparse_code(const MatrixXd& dict, const VectorXd& target,
                                       std::int64_t s) {
    const std::int64_t k = dict.cols();
    if (k > 12) throw ConfigError("brute-force oracle limited to k <= 12");
    if (s < 0 || s > k) throw ConfigError("sparsity out of range");
    if (dict.rows() != target.size()) throw ConfigError("dimension mismatch");

    BruteForceCode best;
    best.code = VectorXd::Zero(k);
    best.residual_sq = target.squaredNorm();
    if (s == 0) return best;

    // Lexicographic support enumeration; strictly better residuals win, so
    // ties settle on the earliest (lowest-index) support.
    std::vector<std::int64_t> support(static_cast<std::size_t>(s));
    for (std::int64_t i = 0; i < s; ++i) support[static_cast<std::size_t>(i)] = i;
    while (true) {
        MatrixXd sub(dict.rows(), s);
        for (std::int64_t i = 0; i < s; ++i)
            sub.col(i) = dict.col(support[static_cast<std::size_t>(i)]);
        const VectorXd coef = sub.colPivHouseholderQr().solve(target);
        const double residual_sq = (target - sub * coef).squaredNorm();
        if (residual_sq < best.residual_sq) {
            best.residual_sq = residual_sq;
            best.support = support;
            best.code.setZero();
            for (std::int64_t i = 0; i < s; ++i)
                best.code(support[static_cast<std::size_t>(i)]) = coef(i);
        }

        // Advance to the next combination.
        std::int64_t pos = s - 1;
        while (pos >= 0 &&
               support[static_cast<std::size_t>(pos)] == k - s + pos)
            --pos;
        if (pos < 0) break;
        ++support[static_cast<std::size_t>(pos)];
        for (std::int64_t i = pos + 1; i < s; ++i)
            support[static_cast<std::size_t>(i)] = support[static_cast<std::size_t>(i) - 1] + 1;
    }
    return best;
}

}  // namespace compot
