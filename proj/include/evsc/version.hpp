#pragma once

namespace evsc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace evsc
