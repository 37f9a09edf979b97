#include "compot/gram.hpp"

#include "compot/factorizer.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <vector>

using namespace compot;

TEST_CASE("identity chunk accumulates to the identity gram") {
    GramState s = GramState::zeros(5);
    accumulate(s, MatrixXd::Identity(5, 5));
    CHECK(s.g.isIdentity(0.0));
    CHECK(s.sample_count == 5);
}

TEST_CASE("accumulation is additive over chunk splits") {
    Rng rng(31);
    const MatrixXd x = testutil::random_matrix(rng, 48, 6);
    GramState split = GramState::zeros(6);
    accumulate(split, x.topRows(20));
    accumulate(split, x.bottomRows(28));
    GramState whole = GramState::zeros(6);
    accumulate(whole, x);
    CHECK((split.g - whole.g).norm() <= 1e-12 * whole.g.norm());
    CHECK(split.sample_count == whole.sample_count);
}

TEST_CASE("accumulated gram equals the direct product") {
    Rng rng(32);
    const MatrixXd x = testutil::random_matrix(rng, 64, 8);
    GramState s = GramState::zeros(8);
    accumulate(s, x);
    const MatrixXd direct = x.transpose() * x;
    CHECK((s.g - direct).norm() <= 1e-12 * direct.norm());
}

TEST_CASE("accumulation is permutation invariant over chunks") {
    Rng rng(33);
    std::vector<MatrixXd> chunks;
    for (int i = 0; i < 5; ++i) chunks.push_back(testutil::random_matrix(rng, 16, 7));
    GramState fwd = GramState::zeros(7);
    for (const auto& c : chunks) accumulate(fwd, c);
    GramState rev = GramState::zeros(7);
    for (auto it = chunks.rbegin(); it != chunks.rend(); ++it) accumulate(rev, *it);
    CHECK((fwd.g - rev.g).norm() <= 1e-10 * fwd.g.norm());
}

TEST_CASE("accumulate rejects width mismatches and non-finite input") {
    GramState s = GramState::zeros(4);
    CHECK_THROWS_AS(accumulate(s, MatrixXd::Zero(3, 5)), ConfigError);
    MatrixXd bad = MatrixXd::Zero(2, 4);
    bad(1, 2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(accumulate(s, bad), NumericalError);
}

TEST_CASE("identity gram factors without ridge") {
    GramState s = GramState::zeros(3);
    accumulate(s, MatrixXd::Identity(3, 3));
    const CholeskyFactor f = cholesky(s);
    CHECK(f.ridge_used == 0.0);
    CHECK(f.l.isIdentity(1e-14));
}

TEST_CASE("diagonal gram factors to diagonal square roots") {
    GramState s = GramState::zeros(2);
    MatrixXd x(1, 2);
    x << 2.0, 0.0;
    accumulate(s, x);
    x << 0.0, 3.0;
    accumulate(s, x);
    const CholeskyFactor f = cholesky(s);
    CHECK(f.l(0, 0) == doctest::Approx(2.0));
    CHECK(f.l(1, 1) == doctest::Approx(3.0));
    CHECK(f.l(0, 1) == 0.0);
    CHECK(f.l(1, 0) == 0.0);
}

TEST_CASE("rank-deficient gram engages the ridge and keeps reconstruction") {
    Rng rng(34);
    VectorXd v(4);
    for (int i = 0; i < 4; ++i) v(i) = rng.normal();
    GramState s = GramState::zeros(4);
    accumulate(s, v.transpose());  // rank-1 outer product
    const CholeskyFactor f = cholesky(s);
    CHECK(f.ridge_used > 0.0);
    MatrixXd g_reg = s.g;
    g_reg.diagonal().array() += f.ridge_used;
    CHECK((f.l * f.l.transpose() - g_reg).norm() <= 1e-10 * g_reg.norm());
    CHECK(f.l.diagonal().minCoeff() > 0.0);
}

TEST_CASE("an empty gram cannot be factorized") {
    GramState s = GramState::zeros(3);
    CHECK_THROWS_AS(cholesky(s), ConfigError);
}

TEST_CASE("whitening with the identity factor is the identity") {
    Rng rng(35);
    const MatrixXd w = testutil::random_matrix(rng, 6, 9);
    const CholeskyFactor f{MatrixXd::Identity(6, 6), 0.0};
    CHECK(whiten(f, w) == w);
    CHECK(whiten(f, MatrixXd::Zero(6, 3)).isZero(0.0));
    CHECK_THROWS_AS(whiten(f, MatrixXd::Zero(5, 3)), ConfigError);
}

TEST_CASE("whitened loss equals calibration loss") {
    Rng rng(36);
    const MatrixXd x = testutil::random_matrix(rng, 128, 16);
    const MatrixXd w = testutil::random_matrix(rng, 16, 24);
    const MatrixXd w_hat = testutil::random_matrix(rng, 16, 24);
    GramState s = GramState::zeros(16);
    accumulate(s, x);
    const CholeskyFactor f = cholesky(s);
    REQUIRE(f.ridge_used == 0.0);

    const double functional = (x * (w - w_hat)).squaredNorm();
    const double whitened = (f.l.transpose() * (w - w_hat)).squaredNorm();
    CHECK(whitened == doctest::Approx(functional).epsilon(1e-8));
}

TEST_CASE("dewhitening inverts the whitening transform") {
    Rng rng(37);
    const MatrixXd x = testutil::random_matrix(rng, 64, 8);
    GramState s = GramState::zeros(8);
    accumulate(s, x);
    const CholeskyFactor f = cholesky(s);

    SUBCASE("identity factor passes the dictionary through") {
        const CholeskyFactor id{MatrixXd::Identity(8, 8), 0.0};
        const MatrixXd d = testutil::random_matrix(rng, 8, 4);
        CHECK(dewhiten_dictionary(id, d) == d);
    }

    SUBCASE("definitional round trip") {
        const MatrixXd d = testutil::random_matrix(rng, 8, 4);
        const MatrixXd a = dewhiten_dictionary(f, d);
        CHECK((f.l.transpose() * a - d).norm() <= 1e-8 * d.norm());
    }
}

TEST_CASE("functional error of a factorization equals its whitened error") {
    Rng rng(38);
    const MatrixXd x = testutil::random_matrix(rng, 96, 12);
    const MatrixXd w = testutil::random_matrix(rng, 12, 20);
    GramState st = GramState::zeros(12);
    accumulate(st, x);
    const CholeskyFactor f = cholesky(st);
    REQUIRE(f.ridge_used == 0.0);

    const MatrixXd whitened = whiten(f, w);
    const FactorizationResult res = factorize(whitened, FactorizerConfig{}, 6, 3);
    const MatrixXd a = dewhiten_dictionary(f, res.dictionary.basis);
    const MatrixXd s_dense = res.codes.to_dense();

    const double functional = (x * (w - a * s_dense)).squaredNorm();
    const double whitened_err = (whitened - res.dictionary.basis * s_dense).squaredNorm();
    CHECK(whitened_err == doctest::Approx(functional).epsilon(1e-6));
}
