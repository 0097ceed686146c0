#pragma once

namespace reifenberg {
inline constexpr const char* kVersion = "0.1.0";
}
