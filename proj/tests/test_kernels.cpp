#include "compot/kernels.hpp"

#include "test_util.hpp"

#include <doctest.h>

using namespace compot;
using kernels::Exec;

TEST_CASE("serial and parallel kernel paths are bit-identical") {
    Rng rng(21);
    const MatrixXd d = testutil::random_matrix(rng, 40, 17);
    const MatrixXd w = testutil::random_matrix(rng, 40, 301);
    const MatrixXd s = testutil::random_matrix(rng, 17, 301);

    CHECK(kernels::matmul_at_b(d, w, Exec::Serial) == kernels::matmul_at_b(d, w, Exec::Parallel));
    CHECK(kernels::matmul_a_bt(w, s, Exec::Serial) == kernels::matmul_a_bt(w, s, Exec::Parallel));
    CHECK(kernels::matmul_a_b(d, s.topRows(17), Exec::Serial) ==
          kernels::matmul_a_b(d, s.topRows(17), Exec::Parallel));

    MatrixXd t_serial, t_parallel;
    kernels::hard_threshold_columns(s, 5, t_serial, Exec::Serial);
    kernels::hard_threshold_columns(s, 5, t_parallel, Exec::Parallel);
    CHECK(t_serial == t_parallel);

    MatrixXd g1 = MatrixXd::Zero(40, 40);
    MatrixXd g2 = MatrixXd::Zero(40, 40);
    const MatrixXd x = testutil::random_matrix(rng, 128, 40);
    kernels::gram_update(g1, x, Exec::Serial);
    kernels::gram_update(g2, x, Exec::Parallel);
    CHECK(g1 == g2);

    CHECK(kernels::residual_squared_norm(w, d, s, Exec::Serial) ==
          kernels::residual_squared_norm(w, d, s, Exec::Parallel));
}

TEST_CASE("kernels agree with direct dense evaluation") {
    Rng rng(22);
    const MatrixXd a = testutil::random_matrix(rng, 12, 9);
    const MatrixXd b = testutil::random_matrix(rng, 12, 20);
    const MatrixXd c = testutil::random_matrix(rng, 9, 20);

    CHECK((kernels::matmul_at_b(a, b) - a.transpose() * b).norm() == 0.0);
    CHECK((kernels::matmul_a_bt(b, c) - b * c.transpose()).norm() == 0.0);
    CHECK((kernels::matmul_a_b(a, c) - a * c).norm() == 0.0);

    const double direct = (b - a * c).squaredNorm();
    CHECK(kernels::residual_squared_norm(b, a, c) ==
          doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("hard thresholding keeps magnitudes with row-order ties") {
    MatrixXd z(4, 2);
    z << 3.0, 1.0,
        -5.0, -1.0,
         1.0, 1.0,
         0.0, -1.0;
    MatrixXd out;
    kernels::hard_threshold_columns(z, 2, out);
    CHECK(out(0, 0) == 3.0);
    CHECK(out(1, 0) == -5.0);
    CHECK(out(2, 0) == 0.0);
    CHECK(out(3, 0) == 0.0);
    // Column 1 is all ties: lowest row indices win.
    CHECK(out(0, 1) == 1.0);
    CHECK(out(1, 1) == -1.0);
    CHECK(out(2, 1) == 0.0);
    CHECK(out(3, 1) == 0.0);
}

TEST_CASE("gram update accumulates x^T x") {
    Rng rng(23);
    const MatrixXd x = testutil::random_matrix(rng, 64, 8);
    MatrixXd g = MatrixXd::Zero(8, 8);
    kernels::gram_update(g, x);
    const MatrixXd direct = x.transpose() * x;
    CHECK((g - direct).norm() <= 1e-12 * direct.norm());
    CHECK(g == g.transpose().eval());
}
