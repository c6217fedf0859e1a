#pragma once

namespace cvb {

inline constexpr const char* kToolName = "cvbroadcast";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace cvb
