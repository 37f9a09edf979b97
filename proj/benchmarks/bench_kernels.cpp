// Times the serial reference path of each kernel against the OpenMP path
// and verifies that both produce identical bytes while doing so.
//
// Usage: compot_bench [m] [n] [k] [reps]

#include "compot/factorizer.hpp"
#include "compot/kernels.hpp"
#include "compot/rng.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

using namespace compot;
using kernels::Exec;
using clock_type = std::chrono::steady_clock;

namespace {

MatrixXd random_matrix(Rng& rng, std::int64_t rows, std::int64_t cols) {
    MatrixXd m(rows, cols);
    for (std::int64_t c = 0; c < cols; ++c)
        for (std::int64_t r = 0; r < rows; ++r) m(r, c) = rng.normal();
    return m;
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = clock_type::now();
        fn();
        const auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-22s %10.4fs %10.4fs %7.2fx  %s\n", name, serial, parallel,
                serial / parallel, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const std::int64_t m = argc > 1 ? std::atoll(argv[1]) : 1024;
    const std::int64_t n = argc > 2 ? std::atoll(argv[2]) : 4096;
    const std::int64_t k = argc > 3 ? std::atoll(argv[3]) : 512;
    const int reps = argc > 4 ? std::atoi(argv[4]) : 3;

    Rng rng(1);
    const MatrixXd w = random_matrix(rng, m, n);
    const MatrixXd d = random_matrix(rng, m, k);
    const MatrixXd s = random_matrix(rng, k, n);
    const MatrixXd x = random_matrix(rng, 2048, std::min<std::int64_t>(m, 512));

    std::printf("kernel benchmark: m=%lld n=%lld k=%lld threads=%d (best of %d)\n",
                static_cast<long long>(m), static_cast<long long>(n),
                static_cast<long long>(k), omp_get_max_threads(), reps);
    std::printf("%-22s %11s %11s %8s\n", "kernel", "serial", "openmp", "speedup");

    {
        MatrixXd zs, zp;
        const double ts = time_best_of(reps, [&] { zs = kernels::matmul_at_b(d, w, Exec::Serial); });
        const double tp = time_best_of(reps, [&] { zp = kernels::matmul_at_b(d, w, Exec::Parallel); });
        row("analysis gemm", ts, tp, zs == zp);

        MatrixXd hs, hp;
        const std::int64_t sparsity = std::max<std::int64_t>(1, k / 2);
        const double ths =
            time_best_of(reps, [&] { kernels::hard_threshold_columns(zs, sparsity, hs, Exec::Serial); });
        const double thp =
            time_best_of(reps, [&] { kernels::hard_threshold_columns(zp, sparsity, hp, Exec::Parallel); });
        row("hard threshold", ths, thp, hs == hp);
    }
    {
        MatrixXd ms, mp;
        const double ts = time_best_of(reps, [&] { ms = kernels::matmul_a_bt(w, s, Exec::Serial); });
        const double tp = time_best_of(reps, [&] { mp = kernels::matmul_a_bt(w, s, Exec::Parallel); });
        row("cross gemm", ts, tp, ms == mp);
    }
    {
        MatrixXd gs = MatrixXd::Zero(x.cols(), x.cols());
        MatrixXd gp = gs;
        const double ts = time_best_of(reps, [&] {
            gs.setZero();
            kernels::gram_update(gs, x, Exec::Serial);
        });
        const double tp = time_best_of(reps, [&] {
            gp.setZero();
            kernels::gram_update(gp, x, Exec::Parallel);
        });
        row("gram update", ts, tp, gs == gp);
    }
    {
        double rs = 0, rp = 0;
        const double ts =
            time_best_of(reps, [&] { rs = kernels::residual_squared_norm(w, d, s, Exec::Serial); });
        const double tp =
            time_best_of(reps, [&] { rp = kernels::residual_squared_norm(w, d, s, Exec::Parallel); });
        row("residual norm", ts, tp, rs == rp);
    }
    return 0;
}
