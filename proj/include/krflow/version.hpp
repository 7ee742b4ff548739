#pragma once

namespace krflow {

inline constexpr const char* version_string = "krflow 1.0.0";
inline constexpr const char* version_number = "1.0.0";

}  // namespace krflow
