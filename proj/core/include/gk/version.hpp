#pragma once

namespace gk {

inline constexpr const char* version = "0.1.0";

}
