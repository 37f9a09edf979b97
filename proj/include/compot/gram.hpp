#pragma once

#include "compot/kernels.hpp"
#include "compot/types.hpp"

#include <cstdint>

namespace compot {

// Running second-moment accumulator over calibration activations.
struct GramState {
    std::int64_t dim = 0;
    MatrixXd g;                     // dim x dim, symmetric PSD
    std::int64_t sample_count = 0;

    static GramState zeros(std::int64_t dim);
};

// Lower-triangular factor of the (possibly ridge-regularized) Gram.
struct CholeskyFactor {
    MatrixXd l;            // lower triangular
    double ridge_used = 0.0;

    std::int64_t dim() const { return l.rows(); }
};

struct RidgePolicy {
    // Ridge starts at initial_scale * mean(diag G) and is multiplied by
    // step until max_scale * mean(diag G) is exceeded.
    double initial_scale = 1e-8;
    double step = 10.0;
    double max_scale = 1e-2;
};

// Adds a block of activations (rows are samples of width state.dim).
void accumulate(GramState& state, const MatrixXd& chunk,
                kernels::Exec exec = kernels::Exec::Parallel);

// Factorizes the accumulated Gram, escalating the ridge per policy until a
// positive-definite factorization with a faithful reconstruction exists.
CholeskyFactor cholesky(const GramState& state, const RidgePolicy& policy = {});

// Same, for a Gram matrix loaded from storage.
CholeskyFactor cholesky_of(const MatrixXd& g, const RidgePolicy& policy = {});

// Whitened weight: L^T * W. Functional error on the calibration set equals
// plain reconstruction error in these coordinates (exact at ridge 0).
MatrixXd whiten(const CholeskyFactor& f, const MatrixXd& w);

// Pulls a dictionary learned in whitened coordinates back to the original
// space via a triangular solve: returns a with l^T * a = d.
MatrixXd dewhiten_dictionary(const CholeskyFactor& f, const MatrixXd& d);

}  // namespace compot
