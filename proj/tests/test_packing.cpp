#include "compot/packing.hpp"

#include "compot/half.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace compot;

namespace {

SparseCodes random_codes(Rng& rng, std::int64_t k, std::int64_t n, std::int64_t s) {
    MatrixXd dense = MatrixXd::Zero(k, n);
    for (std::int64_t j = 0; j < n; ++j) {
        const auto perm = rng.permutation(k);
        for (std::int64_t i = 0; i < s; ++i) {
            double v = 0.0;
            while (v == 0.0) v = rng.normal();
            dense(perm[static_cast<std::size_t>(i)], j) = v;
        }
    }
    return SparseCodes::from_dense(dense, s);
}

}  // namespace

TEST_CASE("all-zero codes pack to an empty value list and a zero mask") {
    const SparseCodes zero = SparseCodes::from_dense(MatrixXd::Zero(5, 4), 2);
    const PackedCodes p = pack(zero);
    CHECK(p.values.empty());
    CHECK(p.mask.size() == 4);  // ceil(5/8) byte per column
    for (auto b : p.mask) CHECK(b == 0);
    const SparseCodes back = unpack(p);
    CHECK(back.nnz() == 0);
    CHECK(back.to_dense().isZero(0.0));
}

TEST_CASE("full supports hit the exact payload arithmetic") {
    Rng rng(61);
    const SparseCodes codes = random_codes(rng, 32, 64, 16);
    REQUIRE(codes.nnz() == 16 * 64);
    const PackedCodes p = pack(codes);
    CHECK(p.values.size() * 2 == 2048);  // 16 values/column * 64 columns * 2 bytes
    CHECK(p.mask.size() == 256);         // 4 bytes/column * 64 columns
}

TEST_CASE("pack/unpack round trip is support-exact with f16 values") {
    Rng rng(62);
    for (int trial = 0; trial < 25; ++trial) {
        const auto k = static_cast<std::int64_t>(2 + rng.below(40));
        const auto n = static_cast<std::int64_t>(1 + rng.below(30));
        const auto s = static_cast<std::int64_t>(1 + rng.below(static_cast<std::uint64_t>(k)));
        const SparseCodes codes = random_codes(rng, k, n, s);
        const SparseCodes back = unpack(pack(codes));
        REQUIRE(back.row == codes.row);
        REQUIRE(back.col_ptr == codes.col_ptr);
        for (std::size_t i = 0; i < codes.val.size(); ++i) {
            const double rounded =
                static_cast<double>(f16_bits_to_f32(f32_to_f16_bits(static_cast<float>(codes.val[i]))));
            CHECK(back.val[i] == rounded);
        }
    }
}

TEST_CASE("a single nonzero sets the right mask bit") {
    MatrixXd dense = MatrixXd::Zero(8, 2);
    dense(3, 0) = 2.5;
    const PackedCodes p = pack(SparseCodes::from_dense(dense, 1));
    REQUIRE(p.mask.size() == 2);
    CHECK(p.mask[0] == (1u << 3));
    CHECK(p.mask[1] == 0);
    CHECK(p.values.size() == 1);
}

TEST_CASE("explicit zeros are dropped from mask and values") {
    SparseCodes codes;
    codes.k = 4;
    codes.n = 1;
    codes.s = 2;
    codes.col_ptr = {0, 2};
    codes.row = {1, 3};
    codes.val = {0.0, 5.0};  // stored zero in the support
    const PackedCodes p = pack(codes);
    CHECK(p.values.size() == 1);
    CHECK(p.mask[0] == (1u << 3));
}

TEST_CASE("corrupted packings are detected") {
    Rng rng(63);
    const SparseCodes codes = random_codes(rng, 16, 6, 4);
    PackedCodes good = pack(codes);

    SUBCASE("flipping a clear mask bit breaks the popcount") {
        PackedCodes bad = good;
        // Find a clear bit within the k range of column 0 and set it.
        for (std::int64_t r = 0; r < bad.k; ++r) {
            auto& byte = bad.mask[static_cast<std::size_t>(r / 8)];
            const auto bit = static_cast<std::uint8_t>(1u << (r % 8));
            if (!(byte & bit)) {
                byte |= bit;
                break;
            }
        }
        CHECK_THROWS_WITH_AS(unpack(bad), doctest::Contains("corrupt packed codes"), IoError);
    }

    SUBCASE("clearing a set mask bit breaks the popcount") {
        PackedCodes bad = good;
        for (auto& byte : bad.mask) {
            if (byte != 0) {
                byte = static_cast<std::uint8_t>(byte & (byte - 1));  // drop lowest set bit
                break;
            }
        }
        CHECK_THROWS_WITH_AS(unpack(bad), doctest::Contains("corrupt packed codes"), IoError);
    }

    SUBCASE("a bit in the padding region is rejected") {
        SparseCodes c2 = random_codes(rng, 5, 2, 2);  // 3 padding bits per column
        PackedCodes bad = pack(c2);
        bad.mask[0] |= 1u << 7;
        CHECK_THROWS_WITH_AS(unpack(bad), doctest::Contains("padding"), IoError);
    }

    SUBCASE("an over-dense column is rejected") {
        PackedCodes bad = good;
        bad.s = 1;  // every column now exceeds the declared sparsity
        CHECK_THROWS_WITH_AS(unpack(bad), doctest::Contains("corrupt packed codes"), IoError);
    }
}

TEST_CASE("storage accounting is exact") {
    const StorageReport r = storage_report(64, 64, 32, 16);
    CHECK(r.bits_dictionary == 16 * 64 * 32);
    CHECK(r.bits_values == 16 * 16 * 64);
    CHECK(r.bits_mask == 32 * 64);
    CHECK(r.bits_dense == 16 * 64 * 64);
    CHECK(r.achieved_cr == 0.21875);  // exact dyadic rational
    CHECK(r.achieved_cr_padded == 0.21875);  // k divisible by 8: no padding
}

TEST_CASE("storage accounting represents negative ratios") {
    // No compression structure at all: s = k = m, n = m.
    const std::int64_t m = 8;
    const StorageReport r = storage_report(m, m, m, m);
    CHECK(r.achieved_cr < 0.0);
    const double expect =
        1.0 - (16.0 * m * m + 16.0 * m * m + 1.0 * m * m) / (16.0 * m * m);
    CHECK(r.achieved_cr == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("padded accounting counts mask padding exactly") {
    const StorageReport r = storage_report(16, 10, 5, 2);
    CHECK(r.bits_mask == 50);
    CHECK(r.bits_mask_padded == 80);  // one byte per column
    CHECK(r.achieved_cr > r.achieved_cr_padded);
}

TEST_CASE("reconstruction multiplies the dictionary into unpacked codes") {
    Rng rng(64);
    const MatrixXd a = testutil::random_matrix(rng, 10, 6);
    const SparseCodes codes = random_codes(rng, 6, 8, 3);
    const FactorizedLayer layer{a, pack(codes)};
    const MatrixXd w_hat = reconstruct(layer);
    const MatrixXd direct = a * unpack(layer.codes).to_dense();
    CHECK(w_hat == direct);
}
