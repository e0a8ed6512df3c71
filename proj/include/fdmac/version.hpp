#pragma once

namespace fdmac {
inline constexpr const char* kVersion = "0.1.0";
}
