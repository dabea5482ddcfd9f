#include "evobo/random.hpp"

#include <cmath>
#include <numbers>

namespace evobo {

double CounterNormal::uniform_open(std::uint64_t counter) const {
  const std::uint64_t bits = splitmix64(key_ ^ splitmix64(counter));
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double CounterNormal::normal(std::uint64_t index) const {
  // Box-Muller; each index consumes its own pair of uniforms.
  const double u1 = uniform_open(2 * index);
  const double u2 = uniform_open(2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace evobo
