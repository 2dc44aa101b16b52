#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace asrc {

using Hash256 = std::array<std::uint8_t, 32>;

Hash256 sha256(std::string_view data);
std::string hex(const Hash256& h);

/// Stable text rendering of a double for hashing and manifests.
std::string canonical_double(double v);

}  // namespace asrc
