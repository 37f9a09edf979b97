#pragma once

#include "compot/kernels.hpp"
#include "compot/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace compot {

enum class InitMode { Svd, Random };

struct FactorizerConfig {
    double ks_ratio = 2.0;                  // dictionary size over per-column sparsity
    int max_iterations = 20;
    InitMode init_mode = InitMode::Svd;
    std::uint64_t seed = 0;                 // used by random init
    std::optional<double> early_stop_tol;   // relative loss-change tolerance
    bool sign_fix = true;                   // canonical SVD column signs
};

// Column-orthonormal dictionary (complete or undercomplete, k <= m).
struct OrthoDictionary {
    MatrixXd basis;  // m x k

    std::int64_t atom_dim() const { return basis.rows(); }
    std::int64_t atoms() const { return basis.cols(); }
};

// Column-sparse coefficients in compressed-column form; at most s stored
// nonzeros per column, rows ascending within a column.
struct SparseCodes {
    std::int64_t k = 0;
    std::int64_t n = 0;
    std::int64_t s = 0;
    std::vector<std::int64_t> col_ptr;  // n + 1
    std::vector<std::int32_t> row;
    std::vector<double> val;

    std::int64_t nnz() const { return static_cast<std::int64_t>(val.size()); }
    MatrixXd to_dense() const;

    // Extracts stored nonzeros from a dense coefficient matrix; entries that
    // are exactly zero carry no information and are not stored.
    static SparseCodes from_dense(const MatrixXd& dense, std::int64_t s);
};

enum class StopReason { MaxIterations, Tolerance };

struct FactorizationTrace {
    std::vector<double> losses;  // squared Frobenius loss after each iteration
    int iterations_run = 0;
    StopReason stop_reason = StopReason::MaxIterations;
    bool degenerate_update = false;  // a zero cross-matrix left the dictionary unchanged
};

struct FactorizationResult {
    OrthoDictionary dictionary;
    SparseCodes codes;
    FactorizationTrace trace;
};

struct KsBudget {
    std::int64_t k = 0;
    std::int64_t s = 0;
};

// Largest per-column sparsity s (with k tied to it by ks_ratio, clamped to
// [1, m]) whose 16-bit storage footprint, including the position mask, fits
// the budget left by target_cr. Throws BudgetError when no s >= 1 fits.
KsBudget solve_ks(std::int64_t m, std::int64_t n, double target_cr, double ks_ratio);

// Initial dictionary: either the leading left singular vectors of w (svd
// mode, sign-canonicalized) or an orthonormalized random subset of its
// columns (random mode, seeded).
OrthoDictionary init_dictionary(const MatrixXd& w, std::int64_t k, const FactorizerConfig& cfg);

// Exact sparse coding under an orthonormal dictionary: hard thresholding of
// the analysis coefficients, per column.
SparseCodes sparse_code(const OrthoDictionary& dict, const MatrixXd& w, std::int64_t s,
                        kernels::Exec exec = kernels::Exec::Parallel);

struct ProcrustesResult {
    OrthoDictionary dictionary;
    bool degenerate = false;  // cross matrix was identically zero
};

// Closed-form dictionary update: the orthogonal polar factor of w * codes^T.
ProcrustesResult procrustes_update(const MatrixXd& w, const SparseCodes& codes,
                                   const OrthoDictionary& current,
                                   kernels::Exec exec = kernels::Exec::Parallel);

// Alternating minimization: exact sparse coding and Procrustes dictionary
// updates for up to cfg.max_iterations, with optional early stopping on the
// relative change of the loss.
FactorizationResult factorize(const MatrixXd& w, const FactorizerConfig& cfg, std::int64_t k,
                              std::int64_t s, kernels::Exec exec = kernels::Exec::Parallel);

}  // namespace compot
