#include "prerank/half.hpp"

#include <bit>
#include <cmath>

namespace prerank {

std::uint16_t float_to_half_bits(float f, std::size_t* clamped) {
    const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
    const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    const std::uint32_t mag = x & 0x7fffffffu;

    if (mag > 0x7f800000u) {  // NaN
        return static_cast<std::uint16_t>(sign | 0x7e00u);
    }
    // 65520 and above (including inf) would round past the largest half.
    if (mag >= 0x477ff000u) {
        if (clamped) ++*clamped;
        return static_cast<std::uint16_t>(sign | 0x7bffu);
    }
    if (mag >= 0x38800000u) {  // normal half range, exponent >= -14
        const std::uint32_t exp16 = (mag >> 23) - 112u;
        std::uint32_t base = (exp16 << 10) | ((mag & 0x7fffffu) >> 13);
        const std::uint32_t rem = mag & 0x1fffu;
        if (rem > 0x1000u || (rem == 0x1000u && (base & 1u))) ++base;
        return static_cast<std::uint16_t>(sign | base);
    }
    if (mag >= 0x33000000u) {  // subnormal half range
        const std::uint32_t e = mag >> 23;
        const std::uint32_t mant = (mag & 0x7fffffu) | 0x800000u;
        const std::uint32_t shift = 126u - e;
        if (shift > 24u) return sign;
        std::uint32_t base = mant >> shift;
        const std::uint32_t rem = mant & ((1u << shift) - 1u);
        const std::uint32_t tie = 1u << (shift - 1u);
        if (rem > tie || (rem == tie && (base & 1u))) ++base;
        return static_cast<std::uint16_t>(sign | base);
    }
    return sign;  // rounds to zero
}

float half_bits_to_float(std::uint16_t h) {
    const std::uint32_t sign = h & 0x8000u;
    const std::uint32_t exp = (h >> 10) & 0x1fu;
    const std::uint32_t mant = h & 0x3ffu;
    float mag;
    if (exp == 0) {
        mag = std::ldexp(static_cast<float>(mant), -24);
    } else if (exp == 31) {
        mag = mant ? std::numeric_limits<float>::quiet_NaN()
                   : std::numeric_limits<float>::infinity();
    } else {
        mag = std::ldexp(static_cast<float>(mant | 0x400u), static_cast<int>(exp) - 25);
    }
    return sign ? -mag : mag;
}

HalfVector to_half(const std::vector<float>& values) {
    HalfVector out;
    out.bits.reserve(values.size());
    for (float f : values) out.bits.push_back(float_to_half_bits(f, &out.clamped));
    return out;
}

std::vector<float> from_half(const std::vector<std::uint16_t>& bits) {
    std::vector<float> out;
    out.reserve(bits.size());
    for (std::uint16_t h : bits) out.push_back(half_bits_to_float(h));
    return out;
}

}  // namespace prerank
