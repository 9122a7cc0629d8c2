// SPDX-License-Identifier: Apache-2.0

#include "mrcad/format.hpp"

#include <array>
#include <charconv>

namespace mrcad {

std::string format_number(double value) {
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

}  // namespace mrcad
