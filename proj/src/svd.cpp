#include "compot/svd.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace compot {

namespace {

// Below this min-dimension BDCSVD internally falls back to Jacobi anyway;
// pinning the dispatch keeps the path explicit and shape-stable.
constexpr Eigen::Index kJacobiLimit = 16;

}  // namespace

ThinSvd thin_svd(const MatrixXd& a) {
    ThinSvd out;
    if (std::min(a.rows(), a.cols()) <= kJacobiLimit) {
        Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.u = svd.matrixU();
        out.sigma = svd.singularValues();
        out.v = svd.matrixV();
    } else {
        Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.u = svd.matrixU();
        out.sigma = svd.singularValues();
        out.v = svd.matrixV();
    }
    return out;
}

VectorXd singular_values(const MatrixXd& a) {
    if (std::min(a.rows(), a.cols()) <= kJacobiLimit) {
        return Eigen::JacobiSVD<MatrixXd>(a).singularValues();
    }
    return Eigen::BDCSVD<MatrixXd>(a).singularValues();
}

void fix_svd_signs(MatrixXd& u, MatrixXd* v) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < u.rows(); ++r) {
            const double mag = std::abs(u(r, c));
            if (mag > best) {
                best = mag;
                arg = r;
            }
        }
        if (u(arg, c) < 0.0) {
            u.col(c) = -u.col(c);
            if (v && c < v->cols()) v->col(c) = -v->col(c);
        }
    }
}

}  // namespace compot
