#ifndef FLUCAST_RNG_HPP
#define FLUCAST_RNG_HPP

#include <cstdint>
#include <cmath>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace flucast {

// All randomness in the toolkit flows through this wrapper around
// std::mt19937_64. The uniform/normal mappings are written out explicitly
// instead of using std::*_distribution, whose output differs between
// standard library implementations; with the mappings pinned, a (seed,
// stream-name) pair fully determines every draw.
//
// Algorithm identifier stamped into manifests: "mt19937_64/explicit-map".

inline constexpr std::string_view kRngAlgorithm = "mt19937_64/explicit-map";

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_mix_(seed) {}

    /// Derive an independent child stream, e.g. rng.stream("tree", 7).
    Rng stream(std::string_view name, std::uint64_t index = 0) const {
        std::uint64_t s = splitmix64(seed_mix_ ^ fnv1a64(name) ^ splitmix64(index));
        return Rng(s);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1): top 53 bits of the engine output.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // modulo bias is irrelevant at these magnitudes
        return next_u64() % n;
    }

    /// Standard normal via Box-Muller (polar form avoided to keep the
    /// draw count per call fixed).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_mix_ = 0;
};

inline Rng make_rng(std::uint64_t seed) {
    Rng r(splitmix64(seed));
    return r;
}

} // namespace flucast

#endif
