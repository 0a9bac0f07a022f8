#pragma once

namespace fbcontrol {

inline constexpr const char* kVersion = "0.1.0";

}
