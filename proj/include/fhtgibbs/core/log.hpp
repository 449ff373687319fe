#pragma once

#include <iostream>
#include <string>

namespace fhtgibbs {

// Non-fatal diagnostics (degraded modes, low sample counts). Kept on stderr
// so machine-readable stdout stays clean.
inline void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

}  // namespace fhtgibbs
