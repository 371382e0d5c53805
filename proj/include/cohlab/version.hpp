// version.hpp

#pragma once

namespace cohlab {

inline constexpr const char* kVersion = "0.1.0";

} // namespace cohlab
