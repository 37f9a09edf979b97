#include "compot/packing.hpp"

#include "compot/half.hpp"
#include "compot/kernels.hpp"

#include <bit>
#include <string>

namespace compot {

PackedCodes pack(const SparseCodes& codes) {
    PackedCodes p;
    p.k = codes.k;
    p.n = codes.n;
    p.s = codes.s;
    const std::int64_t stride = p.mask_bytes_per_col();
    p.mask.assign(static_cast<std::size_t>(stride * codes.n), 0);
    for (std::int64_t j = 0; j < codes.n; ++j) {
        for (std::int64_t q = codes.col_ptr[static_cast<std::size_t>(j)];
             q < codes.col_ptr[static_cast<std::size_t>(j) + 1]; ++q) {
            const std::int32_t r = codes.row[static_cast<std::size_t>(q)];
            const double v = codes.val[static_cast<std::size_t>(q)];
            if (v == 0.0) continue;  // an explicit zero carries no information
            p.mask[static_cast<std::size_t>(j * stride + r / 8)] |=
                static_cast<std::uint8_t>(1u << (r % 8));
            p.values.push_back(f32_to_f16_bits(static_cast<float>(v)));
        }
    }
    return p;
}

SparseCodes unpack(const PackedCodes& packed) {
    const std::int64_t stride = packed.mask_bytes_per_col();
    if (static_cast<std::int64_t>(packed.mask.size()) != stride * packed.n)
        throw IoError("corrupt packed codes: mask length mismatch");

    SparseCodes codes;
    codes.k = packed.k;
    codes.n = packed.n;
    codes.s = packed.s;
    codes.col_ptr.assign(static_cast<std::size_t>(packed.n) + 1, 0);
    std::size_t vpos = 0;
    for (std::int64_t j = 0; j < packed.n; ++j) {
        std::int64_t in_col = 0;
        for (std::int64_t byte = 0; byte < stride; ++byte) {
            const std::uint8_t b = packed.mask[static_cast<std::size_t>(j * stride + byte)];
            if (b == 0) continue;
            for (int bit = 0; bit < 8; ++bit) {
                if (!(b & (1u << bit))) continue;
                const std::int64_t r = byte * 8 + bit;
                if (r >= packed.k) throw IoError("corrupt packed codes: bit set in mask padding");
                if (vpos >= packed.values.size())
                    throw IoError("corrupt packed codes: mask popcount exceeds value count");
                codes.row.push_back(static_cast<std::int32_t>(r));
                codes.val.push_back(
                    static_cast<double>(f16_bits_to_f32(packed.values[vpos++])));
                ++in_col;
            }
        }
        if (in_col > packed.s)
            throw IoError("corrupt packed codes: column " + std::to_string(j) +
                          " exceeds sparsity " + std::to_string(packed.s));
        codes.col_ptr[static_cast<std::size_t>(j) + 1] =
            static_cast<std::int64_t>(codes.val.size());
    }
    if (vpos != packed.values.size())
        throw IoError("corrupt packed codes: value count exceeds mask popcount");
    return codes;
}

StorageReport storage_report(std::int64_t m, std::int64_t n, std::int64_t k, std::int64_t s) {
    if (m < 1 || n < 1 || k < 1 || s < 1) throw ConfigError("storage report needs positive dims");
    if (s > k || k > m) throw ConfigError("storage report requires s <= k <= m");
    StorageReport r;
    r.bits_dictionary = 16 * m * k;
    r.bits_values = 16 * s * n;
    r.bits_mask = k * n;
    r.bits_mask_padded = 8 * n * ((k + 7) / 8);
    r.bits_dense = 16 * m * n;
    r.achieved_cr = 1.0 - static_cast<double>(r.bits_dictionary + r.bits_values + r.bits_mask) /
                              static_cast<double>(r.bits_dense);
    r.achieved_cr_padded =
        1.0 - static_cast<double>(r.bits_dictionary + r.bits_values + r.bits_mask_padded) /
                  static_cast<double>(r.bits_dense);
    return r;
}

MatrixXd reconstruct(const FactorizedLayer& layer) {
    const SparseCodes codes = unpack(layer.codes);
    return kernels::matmul_a_b(layer.a, codes.to_dense());
}

}  // namespace compot
