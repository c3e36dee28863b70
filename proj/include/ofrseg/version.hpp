#pragma once

namespace ofr {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ofr
