#pragma once

namespace gradlearn {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kArchiveSchemaVersion = 1;

} // namespace gradlearn
