#pragma once

namespace sfwm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sfwm
