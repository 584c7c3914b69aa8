#pragma once

#ifndef QFB_VERSION
#define QFB_VERSION "0.1.0"
#endif

namespace qfb {

inline constexpr const char* kVersion = QFB_VERSION;

} // namespace qfb
