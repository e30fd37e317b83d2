#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

namespace bidscape {

/// Integer money in units of 1e-6 currency. Used at every I/O boundary so
/// logged amounts round-trip exactly.
struct Micros {
  std::int64_t value = 0;

  constexpr double currency() const { return static_cast<double>(value) / 1e6; }

  static Micros from_currency(double amount) {
    return Micros{static_cast<std::int64_t>(std::llround(amount * 1e6))};
  }

  friend constexpr auto operator<=>(const Micros&, const Micros&) = default;
};

}  // namespace bidscape
