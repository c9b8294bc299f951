#pragma once

namespace nodulekit {
inline constexpr const char* kVersion = "0.1.0";
}
