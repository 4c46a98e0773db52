#ifndef HOMOGND_VERSION_HPP
#define HOMOGND_VERSION_HPP

namespace homognd {
inline constexpr const char* library_version = "0.1.0";
}

#endif  // HOMOGND_VERSION_HPP
