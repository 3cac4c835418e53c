#pragma once

#include <cstdint>

namespace dipolescope {

// splitmix64; used to derive independent per-run/per-train seeds from one
// scenario seed so that re-runs are bit-reproducible
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t state = base ^ (0xD2B74407B1CE6E93ull * (salt + 1));
    return splitmix64(state);
}

}  // namespace dipolescope
