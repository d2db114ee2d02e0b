#pragma once

// Counter-based random streams. A stream is identified by a key derived from
// the root seed and a tuple of counters (stream tag, replica, player, ...),
// so every draw is a pure function of (key, position) and results do not
// depend on how work is scheduled across threads.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace mfgjump {

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class StreamTag : std::uint64_t {
    system = 1,
    player = 2,
    initial = 3,
    probe = 4,
    bootstrap = 5,
    mollifier = 6,
    test = 7,
};

/// Derives a stream key from a root seed and any number of counters.
inline std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
    std::uint64_t k = splitmix64_mix(seed ^ 0x6A09E667F3BCC909ULL);
    for (std::uint64_t c : counters) k = splitmix64_mix(k ^ splitmix64_mix(c + 0x9E3779B97F4A7C15ULL));
    return k;
}

/// value(i) = mix(key + (i + 1) * golden); satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key = 0) : key_(key) {}
    CounterRng(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> counters = {})
        : key_(derive(seed, tag, counters)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        ++counter_;
        return splitmix64_mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform in the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    double normal() {
        // Box-Muller; the second variate is discarded to keep draws positional.
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::uint64_t position() const { return counter_; }

private:
    static std::uint64_t derive(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> counters) {
        std::uint64_t k = derive_key(seed, {static_cast<std::uint64_t>(tag)});
        for (std::uint64_t c : counters) k = splitmix64_mix(k ^ splitmix64_mix(c + 0x9E3779B97F4A7C15ULL));
        return k;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace mfgjump
