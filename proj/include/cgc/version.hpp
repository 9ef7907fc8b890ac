#pragma once

namespace cgc {

inline constexpr const char* kVersion = "0.1.0";

} // namespace cgc
