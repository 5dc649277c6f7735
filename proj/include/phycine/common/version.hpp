#pragma once

namespace phycine {

inline constexpr const char* kVersionString = "phycine 0.1.0";

}  // namespace phycine
