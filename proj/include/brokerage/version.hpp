#pragma once

namespace brokerage {
inline constexpr const char* kVersion = "0.1.0";
}
