#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relight {

// Standard alphabet with '=' padding.
std::string base64_encode(std::span<const std::uint8_t> bytes);
// Ignores ASCII whitespace; returns nullopt on any other invalid input.
std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text);

}  // namespace relight
