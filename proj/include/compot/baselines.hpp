#pragma once

#include "compot/gram.hpp"
#include "compot/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace compot {

// Reference low-rank compaction: rank-r truncation in whitened coordinates,
// mapped back to the original space.
struct WhitenedSvdFactors {
    MatrixXd w_hat;    // m x n reconstruction
    MatrixXd u;        // m x r, whitened-space left vectors
    VectorXd sigma;    // r
    MatrixXd v;        // n x r
    double whitened_residual_sq = 0.0;
};

WhitenedSvdFactors truncated_whitened_svd(const WeightMatrix& w, const CholeskyFactor& f,
                                          std::int64_t r);

// Predicted truncation loss at a kept-budget fraction cr: whitens, truncates
// at rank floor(m*n*cr/(m+n)) and returns the Frobenius norm (not squared)
// of the whitened residual. Note cr counts the parameters *kept*, and rank 0
// returns the full whitened norm; both quirks are preserved deliberately as
// this routine exists to mirror an external allocation recipe.
double theoretical_loss(const WeightMatrix& w, const CholeskyFactor& f, double cr);

// Loss-proportional ratio assignment per projection-type group: within each
// group, ratios are proportional to 1/log(theoretical loss), rescaled to sum
// to group_size * target_cr. Returned ratios keep the source recipe's
// kept-fraction semantics. Losses <= 1 make the 1/log weighting meaningless
// and raise an error rather than being patched over.
std::vector<double> v2_cr_allocation(const std::vector<WeightMatrix>& weights,
                                     const std::vector<CholeskyFactor>& factors,
                                     const std::vector<std::string>& group_of, double target_cr);

// Exhaustive-support sparse coding oracle: solves a least squares problem on
// every size-s support (k <= 12) and returns the best. Ties keep the first
// support in lexicographic order.
struct BruteForceCode {
    VectorXd code;  // dense length-k coefficient vector
    std::vector<std::int64_t> support;
    double residual_sq = 0.0;
};

BruteForceCode brute_force_sparse_code(const MatrixXd& dict, const VectorXd& target,
                                       std::int64_t s);

}  // namespace compot
