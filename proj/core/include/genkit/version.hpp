#pragma once

namespace genkit {

inline constexpr const char* kVersion = "0.1.0";

} // namespace genkit
