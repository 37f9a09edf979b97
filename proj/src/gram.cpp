#include "compot/gram.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace compot {

GramState GramState::zeros(std::int64_t dim) {
    GramState s;
    s.dim = dim;
    s.g = MatrixXd::Zero(dim, dim);
    return s;
}

void accumulate(GramState& state, const MatrixXd& chunk, kernels::Exec exec) {
    if (chunk.cols() != state.dim)
        throw ConfigError("activation chunk width " + std::to_string(chunk.cols()) +
                          " does not match gram dimension " + std::to_string(state.dim));
    if (!chunk.allFinite()) throw NumericalError("non-finite values in activation chunk");
    kernels::gram_update(state.g, chunk, exec);
    state.sample_count += chunk.rows();
}

namespace {

bool try_factor(const MatrixXd& g, double ridge, MatrixXd& l_out) {
    MatrixXd g_reg = g;
    if (ridge > 0.0) g_reg.diagonal().array() += ridge;
    Eigen::LLT<MatrixXd> llt(g_reg);
    if (llt.info() != Eigen::Success) return false;
    MatrixXd l = llt.matrixL();
    if (!(l.diagonal().minCoeff() > 0.0) || !l.allFinite()) return false;
    // Reconstruction must be faithful, not merely non-failing.
    const double ref = g_reg.norm();
    const double err = (l * l.transpose() - g_reg).norm();
    if (ref > 0.0 && err > 1e-10 * ref) return false;
    l_out = std::move(l);
    return true;
}

}  // namespace

CholeskyFactor cholesky_of(const MatrixXd& g, const RidgePolicy& policy) {
    CholeskyFactor f;
    if (try_factor(g, 0.0, f.l)) {
        f.ridge_used = 0.0;
        return f;
    }
    const double diag_mean = g.diagonal().mean();
    for (double scale = policy.initial_scale; scale <= policy.max_scale; scale *= policy.step) {
        const double ridge = scale * diag_mean;
        if (try_factor(g, ridge, f.l)) {
            f.ridge_used = ridge;
            return f;
        }
    }
    throw NumericalError("gram not factorizable");
}

CholeskyFactor cholesky(const GramState& state, const RidgePolicy& policy) {
    if (state.sample_count <= 0) throw ConfigError("gram has no accumulated samples");
    return cholesky_of(state.g, policy);
}

MatrixXd whiten(const CholeskyFactor& f, const MatrixXd& w) {
    if (f.dim() != w.rows())
        throw ConfigError("whitening dimension mismatch: factor " + std::to_string(f.dim()) +
                          " vs weight rows " + std::to_string(w.rows()));
    return f.l.transpose() * w;
}

MatrixXd dewhiten_dictionary(const CholeskyFactor& f, const MatrixXd& d) {
    if (f.dim() != d.rows())
        throw ConfigError("dewhitening dimension mismatch: factor " + std::to_string(f.dim()) +
                          " vs dictionary rows " + std::to_string(d.rows()));
    return f.l.transpose().triangularView<Eigen::Upper>().solve(d);
}

}  // namespace compot
