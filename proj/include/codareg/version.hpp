#pragma once

namespace codareg {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace codareg
