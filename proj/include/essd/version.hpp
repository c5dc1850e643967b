#pragma once

namespace essd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace essd
