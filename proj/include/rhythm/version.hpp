#pragma once

namespace rhythm {

inline constexpr const char* kVersion = "0.1.0";

} // namespace rhythm
