#pragma once

#include "compot/types.hpp"

namespace compot {

struct ThinSvd {
    MatrixXd u;        // m x r
    VectorXd sigma;    // r, non-increasing
    MatrixXd v;        // n x r
};

// Deterministic thin SVD. Dispatches between Jacobi (small) and
// divide-and-conquer (large) on a fixed size threshold, so a given shape
// always takes the same code path.
ThinSvd thin_svd(const MatrixXd& a);

// Singular values only, non-increasing.
VectorXd singular_values(const MatrixXd& a);

// Resolves the SVD sign ambiguity in place: each column of u is flipped so
// its largest-magnitude entry (lowest index on ties) is positive. When v is
// given, its columns are flipped in tandem so u * diag(sigma) * v^T is
// unchanged.
void fix_svd_signs(MatrixXd& u, MatrixXd* v = nullptr);

}  // namespace compot
