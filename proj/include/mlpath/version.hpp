#pragma once

namespace mlpath {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mlpath
