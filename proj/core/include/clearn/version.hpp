#pragma once

namespace clearn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace clearn
