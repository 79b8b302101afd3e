#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace prerank {

// IEEE 754 binary16, round to nearest even. Values beyond +-65504 clamp to the
// half range boundary and bump *clamped. NaN passes through as a half NaN and
// is not counted.
std::uint16_t float_to_half_bits(float f, std::size_t* clamped = nullptr);

// Exact widening; every binary16 value is representable in binary32.
float half_bits_to_float(std::uint16_t h);

struct HalfVector {
    std::vector<std::uint16_t> bits;
    std::size_t clamped = 0;
};

HalfVector to_half(const std::vector<float>& values);
std::vector<float> from_half(const std::vector<std::uint16_t>& bits);

}  // namespace prerank
