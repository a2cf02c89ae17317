#pragma once

namespace qpburst {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace qpburst
