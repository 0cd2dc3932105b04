#pragma once

namespace isearch {

inline constexpr const char* kToolName = "isearch";
inline constexpr const char* kVersion = "0.1.0";

}
