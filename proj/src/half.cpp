#include "compot/half.hpp"

#include <bit>
#include <cstring>

namespace compot {

float f16_bits_to_f32(std::uint16_t bits) {
    const std::uint32_t sign = static_cast<std::uint32_t>(bits >> 15) & 1u;
    const std::uint32_t exp = (bits >> 10) & 0x1Fu;
    const std::uint32_t frac = bits & 0x3FFu;

    std::uint32_t out;
    if (exp == 0) {
        if (frac == 0) {
            out = sign << 31;  // signed zero
        } else {
            // Subnormal half: value = frac * 2^-24, always normal in f32.
            const int msb = 31 - std::countl_zero(frac);
            const std::uint32_t e32 = static_cast<std::uint32_t>(103 + msb);  // (msb - 24) + 127
            const std::uint32_t mant = (frac << (23 - msb)) & 0x7FFFFFu;
            out = (sign << 31) | (e32 << 23) | mant;
        }
    } else if (exp == 0x1F) {
        out = (sign << 31) | 0x7F800000u | (frac << 13);  // inf / nan
    } else {
        out = (sign << 31) | ((exp + 127 - 15) << 23) | (frac << 13);
    }
    return std::bit_cast<float>(out);
}

std::uint16_t f32_to_f16_bits(float value) {
    const std::uint32_t in = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (in >> 16) & 0x8000u;
    const std::uint32_t exp = (in >> 23) & 0xFFu;
    const std::uint32_t frac = in & 0x7FFFFFu;

    if (exp == 0xFF) {
        // Inf or NaN; keep NaN-ness by forcing a mantissa bit.
        if (frac == 0) return static_cast<std::uint16_t>(sign | 0x7C00u);
        return static_cast<std::uint16_t>(sign | 0x7C00u | (frac >> 13) | ((frac >> 13) == 0 ? 1u : 0u));
    }

    // Unbiased exponent of the input.
    const int e = static_cast<int>(exp) - 127;
    if (e > 15) return static_cast<std::uint16_t>(sign | 0x7C00u);  // overflow -> inf

    // Full 24-bit significand (implicit bit set for normals).
    std::uint32_t sig = frac | (exp != 0 ? 0x800000u : 0u);

    // Number of low bits dropped when aligning to the 10-bit half mantissa.
    int drop = 13;
    if (e < -14) {
        // Result is subnormal in half precision; shift further right.
        drop += (-14 - e);
        if (drop > 24) drop = 25;  // underflows past the sticky range
    }

    std::uint16_t out;
    if (drop >= 25) {
        out = static_cast<std::uint16_t>(sign);  // rounds to zero
    } else {
        const std::uint32_t kept = sig >> drop;
        const std::uint32_t round_bit = (sig >> (drop - 1)) & 1u;
        const std::uint32_t sticky = (sig & ((1u << (drop - 1)) - 1u)) != 0 ? 1u : 0u;
        std::uint32_t mant = kept;
        if (round_bit && (sticky || (mant & 1u))) mant += 1u;  // round to nearest even

        std::uint32_t e16;
        if (e < -14) {
            e16 = 0;
            // Carry out of the subnormal mantissa promotes to the smallest normal.
            if (mant == 0x400u) {
                e16 = 1;
                mant = 0;
            }
        } else {
            e16 = static_cast<std::uint32_t>(e + 15);
            if (mant >= 0x800u) {  // mantissa carry
                mant >>= 1;
                e16 += 1;
            }
            mant &= 0x3FFu;
            if (e16 >= 0x1F) return static_cast<std::uint16_t>(sign | 0x7C00u);
        }
        out = static_cast<std::uint16_t>(sign | (e16 << 10) | (mant & 0x3FFu));
    }
    return out;
}

}  // namespace compot
