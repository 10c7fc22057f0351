#ifndef GWKIT_VERSION_HPP
#define GWKIT_VERSION_HPP

namespace gwkit {

// Keep in step with the CMake project version.
inline constexpr const char* kVersion = "0.1.0";

} // namespace gwkit

#endif
