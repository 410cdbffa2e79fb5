#pragma once

namespace bindelta {

inline constexpr const char* kVersion = "0.1.0";

} // namespace bindelta
