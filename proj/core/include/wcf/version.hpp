#pragma once

namespace wcf {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace wcf
