#pragma once

#include "compot/factorizer.hpp"
#include "compot/types.hpp"

#include <cstdint>
#include <vector>

namespace compot {

// Bit-exact packed form of sparse codes: 16-bit nonzero values plus a
// position bitmask. Layout is normative for the on-disk format: columns in
// order; within a column, values in increasing row index; the mask is
// column-major with bit r stored LSB-first in byte r/8 of the column's
// byte-padded block.
struct PackedCodes {
    std::int64_t k = 0;
    std::int64_t n = 0;
    std::int64_t s = 0;
    std::vector<std::uint16_t> values;  // binary16 bit patterns
    std::vector<std::uint8_t> mask;     // n * ceil(k/8) bytes

    std::int64_t mask_bytes_per_col() const { return (k + 7) / 8; }
};

PackedCodes pack(const SparseCodes& codes);

// Inverse of pack up to binary16 value rounding; validates structural
// consistency and throws IoError("corrupt packed codes") on mismatch.
SparseCodes unpack(const PackedCodes& packed);

// Exact storage accounting for one factorized matrix against a 16-bit dense
// baseline. The ideal figure counts exactly k*n mask bits; the padded figure
// counts the per-column byte padding actually serialized.
struct StorageReport {
    std::int64_t bits_dictionary = 0;   // 16 m k
    std::int64_t bits_values = 0;       // 16 s n
    std::int64_t bits_mask = 0;         // k n
    std::int64_t bits_mask_padded = 0;  // 8 n ceil(k/8)
    std::int64_t bits_dense = 0;        // 16 m n
    double achieved_cr = 0.0;           // from the ideal mask accounting
    double achieved_cr_padded = 0.0;    // from the padded mask accounting
};

StorageReport storage_report(std::int64_t m, std::int64_t n, std::int64_t k, std::int64_t s);

// The deployable artifact for one layer: dewhitened dictionary plus packed
// codes; the reconstruction a * codes is the single reconstruction path
// shared by metrics and the reconstruct command.
struct FactorizedLayer {
    MatrixXd a;  // m x k
    PackedCodes codes;
};

MatrixXd reconstruct(const FactorizedLayer& layer);

}  // namespace compot
