#pragma once

#include <cstdint>
#include <initializer_list>

namespace rmab {

/// Splittable counter-based random stream. A stream is keyed by a tuple of
/// integers (seed, replication, t, i, s, a, ...) hashed together, so the order
/// in which independent streams are consumed never affects their output.
class RngStream {
   public:
    explicit RngStream(std::uint64_t key) : state_(mix(key ^ 0x9e3779b97f4a7c15ULL)) {}

    static std::uint64_t key_of(std::initializer_list<std::uint64_t> parts) {
        std::uint64_t h = 0x243f6a8885a308d3ULL;  // arbitrary nonzero constant
        for (std::uint64_t p : parts) h = mix(h ^ mix(p + 0x9e3779b97f4a7c15ULL));
        return h;
    }

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

   private:
    static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace rmab
