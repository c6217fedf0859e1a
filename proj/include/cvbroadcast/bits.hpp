#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cvb {

enum class Bit : std::uint8_t { Zero = 0, One = 1 };

// Trit::U marks the discarded element produced by the bit pair (0, 0).
enum class Trit : std::uint8_t { Zero = 0, One = 1, Two = 2, U = 3 };

constexpr int value_of(Bit b) { return static_cast<int>(b); }
constexpr Bit flip(Bit b) { return b == Bit::Zero ? Bit::One : Bit::Zero; }
constexpr Bit bit_from_int(int v) { return v == 0 ? Bit::Zero : Bit::One; }

constexpr std::string_view to_string(Trit t) {
  switch (t) {
    case Trit::Zero: return "0";
    case Trit::One: return "1";
    case Trit::Two: return "2";
    case Trit::U: return "u";
  }
  return "?";
}

// Sign patterns (b_S, b_R0, b_R1) are indexed 4*b_S + 2*b_R0 + b_R1.
using SignPattern = std::array<Bit, 3>;

constexpr std::size_t pattern_index(Bit s, Bit r0, Bit r1) {
  return 4u * static_cast<std::size_t>(s) + 2u * static_cast<std::size_t>(r0) +
         static_cast<std::size_t>(r1);
}

constexpr std::size_t pattern_index(const SignPattern& p) { return pattern_index(p[0], p[1], p[2]); }

constexpr SignPattern pattern_from_index(std::size_t i) {
  return {bit_from_int(static_cast<int>((i >> 2) & 1u)), bit_from_int(static_cast<int>((i >> 1) & 1u)),
          bit_from_int(static_cast<int>(i & 1u))};
}

// The patterns the primitive is built from: exactly one player holds bit 0.
constexpr bool is_primitive_pattern(std::size_t i) {
  const std::size_t zeros = 3u - (((i >> 2) & 1u) + ((i >> 1) & 1u) + (i & 1u));
  return zeros == 1;
}

inline constexpr std::array<std::size_t, 3> kPrimitivePatterns{3, 5, 6};  // 011, 101, 110

}  // namespace cvb
