#pragma once

#include <string_view>

namespace wgad {

inline constexpr std::string_view version = "1.0.0";

}  // namespace wgad
