#pragma once

#include <cstdint>

namespace compot {

// IEEE 754 binary16 <-> binary32 conversion. Widening is exact; narrowing
// rounds to nearest-even and handles subnormals, overflow-to-infinity,
// and NaN propagation.
float f16_bits_to_f32(std::uint16_t bits);
std::uint16_t f32_to_f16_bits(float value);

}  // namespace compot
