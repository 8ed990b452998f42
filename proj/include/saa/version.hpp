#pragma once

namespace saa {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace saa
