#pragma once

namespace conav {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace conav
