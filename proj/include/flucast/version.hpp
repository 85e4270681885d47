#pragma once

namespace flucast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace flucast
