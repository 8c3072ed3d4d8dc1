#pragma once

namespace pcreg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pcreg
