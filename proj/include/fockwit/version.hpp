#pragma once

namespace fockwit {

inline constexpr const char* version = "0.1.0";

}  // namespace fockwit
