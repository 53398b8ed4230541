#pragma once

namespace sxfer {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sxfer
