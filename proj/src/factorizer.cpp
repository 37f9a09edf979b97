#include "compot/factorizer.hpp"

#include "compot/rng.hpp"
#include "compot/svd.hpp"

#include <Eigen/QR>

#include <cmath>
#include <string>

namespace compot {

MatrixXd SparseCodes::to_dense() const {
    MatrixXd dense = MatrixXd::Zero(k, n);
    for (std::int64_t j = 0; j < n; ++j) {
        for (std::int64_t p = col_ptr[static_cast<std::size_t>(j)];
             p < col_ptr[static_cast<std::size_t>(j) + 1]; ++p) {
            dense(row[static_cast<std::size_t>(p)], j) = val[static_cast<std::size_t>(p)];
        }
    }
    return dense;
}

SparseCodes SparseCodes::from_dense(const MatrixXd& dense, std::int64_t s) {
    SparseCodes codes;
    codes.k = dense.rows();
    codes.n = dense.cols();
    codes.s = s;
    codes.col_ptr.assign(static_cast<std::size_t>(dense.cols()) + 1, 0);
    for (std::int64_t j = 0; j < dense.cols(); ++j) {
        for (std::int64_t r = 0; r < dense.rows(); ++r) {
            const double v = dense(r, j);
            if (v != 0.0) {
                codes.row.push_back(static_cast<std::int32_t>(r));
                codes.val.push_back(v);
            }
        }
        codes.col_ptr[static_cast<std::size_t>(j) + 1] =
            static_cast<std::int64_t>(codes.val.size());
        const std::int64_t in_col = codes.col_ptr[static_cast<std::size_t>(j) + 1] -
                                    codes.col_ptr[static_cast<std::size_t>(j)];
        if (in_col > s)
            throw NumericalError("column " + std::to_string(j) + " has " +
                                 std::to_string(in_col) + " nonzeros, exceeding sparsity " +
                                 std::to_string(s));
    }
    return codes;
}

KsBudget solve_ks(std::int64_t m, std::int64_t n, double target_cr, double ks_ratio) {
    if (m < 1 || n < 1) throw ConfigError("matrix dimensions must be positive");
    if (!(target_cr > 0.0 && target_cr < 1.0))
        throw ConfigError("target compression ratio must lie in (0, 1)");
    if (!(ks_ratio > 1.0)) throw ConfigError("ks_ratio must exceed 1");

    const auto atoms_for = [&](std::int64_t s) {
        const auto k = static_cast<std::int64_t>(std::llround(ks_ratio * static_cast<double>(s)));
        return std::clamp<std::int64_t>(k, 1, m);
    };
    const double budget_bits = (1.0 - target_cr) * 16.0 * static_cast<double>(m) *
                               static_cast<double>(n);
    const auto fits = [&](std::int64_t s) {
        const std::int64_t k = atoms_for(s);
        if (s > k) return false;
        const double bits = 16.0 * static_cast<double>(m) * static_cast<double>(k) +
                            16.0 * static_cast<double>(s) * static_cast<double>(n) +
                            static_cast<double>(k) * static_cast<double>(n);
        return bits <= budget_bits;
    };

    if (!fits(1)) throw BudgetError("budget too tight: no feasible sparsity at target_cr=" +
                                    std::to_string(target_cr));
    // Storage grows monotonically in s, so the feasible set is a prefix.
    std::int64_t lo = 1, hi = m;
    while (lo < hi) {
        const std::int64_t mid = lo + (hi - lo + 1) / 2;
        if (fits(mid))
            lo = mid;
        else
            hi = mid - 1;
    }
    return KsBudget{atoms_for(lo), lo};
}

OrthoDictionary init_dictionary(const MatrixXd& w, std::int64_t k, const FactorizerConfig& cfg) {
    const std::int64_t m = w.rows();
    const std::int64_t n = w.cols();
    if (k < 1) throw ConfigError("dictionary size must be positive");
    if (k > m) throw ConfigError("dictionary size " + std::to_string(k) +
                                 " exceeds atom dimension " + std::to_string(m));

    if (cfg.init_mode == InitMode::Svd) {
        if (k > std::min(m, n))
            throw NumericalError("svd init needs k <= min(m, n) left singular vectors");
        ThinSvd svd = thin_svd(w);
        MatrixXd d = svd.u.leftCols(k);
        if (cfg.sign_fix) fix_svd_signs(d);
        return OrthoDictionary{std::move(d)};
    }

    if (k > n)
        throw ConfigError("random init cannot draw " + std::to_string(k) + " columns from " +
                          std::to_string(n));
    Rng rng(cfg.seed);
    for (int attempt = 0; attempt < 8; ++attempt) {
        const auto perm = rng.permutation(n);
        MatrixXd subset(m, k);
        for (std::int64_t c = 0; c < k; ++c) subset.col(c) = w.col(perm[static_cast<std::size_t>(c)]);
        Eigen::ColPivHouseholderQR<MatrixXd> qr(subset);
        qr.setThreshold(1e-10);
        if (qr.rank() < k) continue;  // numerically dependent draw
        MatrixXd q = qr.householderQ() * MatrixXd::Identity(m, k);
        if (cfg.sign_fix) fix_svd_signs(q);
        return OrthoDictionary{std::move(q)};
    }
    throw NumericalError("random init failed: fewer than " + std::to_string(k) +
                         " numerically independent columns after 8 draws");
}

SparseCodes sparse_code(const OrthoDictionary& dict, const MatrixXd& w, std::int64_t s,
                        kernels::Exec exec) {
    if (s > dict.atoms())
        throw ConfigError("sparsity " + std::to_string(s) + " exceeds dictionary size " +
                          std::to_string(dict.atoms()));
    if (dict.atom_dim() != w.rows()) throw ConfigError("dictionary/weight dimension mismatch");
    const MatrixXd z = kernels::matmul_at_b(dict.basis, w, exec);
    MatrixXd dense;
    kernels::hard_threshold_columns(z, s, dense, exec);
    return SparseCodes::from_dense(dense, s);
}

namespace {

ProcrustesResult procrustes_from_dense(const MatrixXd& w, const MatrixXd& codes_dense,
                                       const OrthoDictionary& current, kernels::Exec exec) {
    MatrixXd cross = kernels::matmul_a_bt(w, codes_dense, exec);
    if (cross.isZero(0.0)) return ProcrustesResult{current, true};
    ThinSvd svd = thin_svd(cross);
    fix_svd_signs(svd.u, &svd.v);
    return ProcrustesResult{OrthoDictionary{svd.u * svd.v.transpose()}, false};
}

}  // namespace

ProcrustesResult procrustes_update(const MatrixXd& w, const SparseCodes& codes,
                                   const OrthoDictionary& current, kernels::Exec exec) {
    if (codes.k != current.atoms() || w.rows() != current.atom_dim() || w.cols() != codes.n)
        throw ConfigError("procrustes dimension mismatch");
    return procrustes_from_dense(w, codes.to_dense(), current, exec);
}

FactorizationResult factorize(const MatrixXd& w, const FactorizerConfig& cfg, std::int64_t k,
                              std::int64_t s, kernels::Exec exec) {
    if (s < 1) throw ConfigError("sparsity must be positive");
    if (s > k) throw ConfigError("sparsity exceeds dictionary size");
    if (cfg.max_iterations < 1) throw ConfigError("iteration count must be positive");

    OrthoDictionary dict = init_dictionary(w, k, cfg);
    FactorizationTrace trace;
    MatrixXd codes_dense;
    for (int t = 0; t < cfg.max_iterations; ++t) {
        const MatrixXd z = kernels::matmul_at_b(dict.basis, w, exec);
        kernels::hard_threshold_columns(z, s, codes_dense, exec);

        ProcrustesResult up = procrustes_from_dense(w, codes_dense, dict, exec);
        if (up.degenerate) trace.degenerate_update = true;
        dict = std::move(up.dictionary);

        const double loss = kernels::residual_squared_norm(w, dict.basis, codes_dense, exec);
        trace.losses.push_back(loss);
        trace.iterations_run = t + 1;
        if (cfg.early_stop_tol && t >= 1) {
            const double prev = trace.losses[static_cast<std::size_t>(t) - 1];
            if (prev == 0.0 || std::abs(prev - loss) / prev <= *cfg.early_stop_tol) {
                trace.stop_reason = StopReason::Tolerance;
                break;
            }
        }
    }
    return FactorizationResult{std::move(dict), SparseCodes::from_dense(codes_dense, s),
                               std::move(trace)};
}

}  // namespace compot
