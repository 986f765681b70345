#pragma once

namespace polyfw {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace polyfw
