// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace mrcad {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_number(double value);

}  // namespace mrcad
