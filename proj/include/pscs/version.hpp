#pragma once

namespace pscs {

inline constexpr const char* version = "0.1.0";

} // namespace pscs
