#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "levycouple/vec.hpp"

namespace levycouple {

// SplitMix64 step, used to derive independent per-path seeds from a master
// seed and a path index. Standard finalizer constants.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t s = master_seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

// A seeded random stream. Distribution sampling is implemented by hand on top
// of raw 64-bit draws so output does not depend on the standard library's
// distribution internals.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    static RngStream for_path(std::uint64_t master_seed, std::uint64_t path_index) {
        return RngStream(derive_stream_seed(master_seed, path_index));
    }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as argument to log().
    double uniform_pos() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal() {
        double u = uniform_pos();
        double v = uniform();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586477 * v);
    }

    // Uniform direction on the unit sphere in R^d. d = 1 gives a fair sign.
    Vec unit_sphere(int d) {
        Vec v(d);
        if (d == 1) {
            v[0] = uniform() < 0.5 ? -1.0 : 1.0;
            return v;
        }
        double norm2;
        do {
            for (int i = 0; i < d; ++i) v[i] = normal();
            norm2 = v.squaredNorm();
        } while (norm2 < 1e-300);
        return v / std::sqrt(norm2);
    }

    std::uint64_t raw() { return engine_(); }

    std::uint64_t seed() const { return seed_; }

  private:
    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
};

} // namespace levycouple
