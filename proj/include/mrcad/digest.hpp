// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mrcad {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace mrcad
