#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>

namespace licra {

/// Counter-based pseudo-random stream (SplitMix64 core). The state advances
/// by a fixed stride per draw, so a stream is fully determined by its seed
/// and the number of draws taken; no draw depends on platform-specific
/// library distributions. Streams are cheap value types; one stream per
/// consumer, never shared between threads.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Multiply-shift mapping keeps the draw
    /// count fixed (exactly one u64 per call).
    int uniform_int(int n) {
        return static_cast<int>(
            (static_cast<unsigned __int128>(next_u64()) * static_cast<std::uint64_t>(n)) >> 64);
    }

    /// Standard normal via Box-Muller; the paired value is cached so the
    /// stream consumes exactly two u64 per pair of normals.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Draws an index from a probability row by inverse CDF with
    /// left-to-right accumulation. Rows are validated elsewhere to sum to 1
    /// within 1e-12; any residual rounding mass lands on the last index with
    /// positive probability.
    int sample_discrete(std::span<const double> probs) {
        double u = uniform();
        double acc = 0.0;
        int last_positive = 0;
        for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
            if (probs[i] > 0.0) last_positive = i;
            acc += probs[i];
            if (u < acc) return i;
        }
        return last_positive;
    }

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {
inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t mix_u64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Derives an independent named stream from a master seed. Every consumer
/// asks for its own name ("env", "behavior", "train/seed=3", ...), which
/// makes run-level determinism independent of execution order.
inline RngStream rng_stream(std::uint64_t master_seed, std::string_view name) {
    std::uint64_t key = detail::mix_u64(master_seed ^ 0x6A09E667F3BCC909ULL);
    std::uint64_t sub = detail::mix_u64(detail::fnv1a(name) + 0x9E3779B97F4A7C15ULL * key);
    return RngStream(sub);
}

} // namespace licra
