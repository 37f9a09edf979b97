#pragma once

#include "compot/types.hpp"

#include <cstdint>

namespace compot::kernels {

// Every kernel has a serial reference path and an OpenMP path. Work is
// partitioned into fixed-size column blocks and every output element is
// produced by exactly one task from the same per-block routine, so the two
// paths (and any thread count) are bit-identical.
enum class Exec {
    Serial,
    Parallel,
};

// z = a^T * b
MatrixXd matmul_at_b(const MatrixXd& a, const MatrixXd& b, Exec exec = Exec::Parallel);

// m = a * b^T
MatrixXd matmul_a_bt(const MatrixXd& a, const MatrixXd& b, Exec exec = Exec::Parallel);

// c = a * b
MatrixXd matmul_a_b(const MatrixXd& a, const MatrixXd& b, Exec exec = Exec::Parallel);

// Column-wise hard thresholding: keeps the s largest-magnitude entries of
// each column of z (ties keep the lowest row index) and zeroes the rest.
// out is resized to z's shape.
void hard_threshold_columns(const MatrixXd& z, std::int64_t s, MatrixXd& out,
                            Exec exec = Exec::Parallel);

// g += x^T * x for an activation block x (rows are samples).
void gram_update(MatrixXd& g, const MatrixXd& x, Exec exec = Exec::Parallel);

// ||w - d * s||_F^2 with a deterministic block-order reduction.
double residual_squared_norm(const MatrixXd& w, const MatrixXd& d, const MatrixXd& s,
                             Exec exec = Exec::Parallel);

}  // namespace compot::kernels
