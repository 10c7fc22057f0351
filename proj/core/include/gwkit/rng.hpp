#ifndef GWKIT_RNG_HPP
#define GWKIT_RNG_HPP

#include <cstdint>

namespace gwkit {

// splitmix64: tiny, well specified, identical everywhere. Normals come from
// Box-Muller on pairs of uniforms (the cosine branch only), so any language
// can replay a stream bit for bit from the seed.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double next_uniform();  // [0, 1)
    double next_normal();   // standard normal

private:
    std::uint64_t state_;
};

} // namespace gwkit

#endif
