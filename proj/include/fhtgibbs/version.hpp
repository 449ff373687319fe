#pragma once

namespace fhtgibbs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fhtgibbs
