#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace bope {

// Identifies one reproducible random stream. Identical (seed, stream) pairs
// always generate identical sequences; distinct streams are independent
// substreams of the same seed, so parallel work can be given disjoint stream
// ids and remain reproducible regardless of scheduling.
struct RngSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

namespace detail {

// SplitMix64 step (Steele, Lea, Flood 2014). Used for state expansion and as
// a 64-bit finalizer when deriving substreams.
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) { return splitmix64(x); }

}  // namespace detail

// Derive a child stream id from a parent spec and a salt. Distinct
// (parent stream, salt) pairs map to distinct streams except with
// negligible probability.
inline RngSpec substream(const RngSpec& spec, std::uint64_t salt) {
    std::uint64_t x = spec.stream * 0x9E3779B97F4A7C15ULL + salt + 1;
    return RngSpec{spec.seed, detail::mix64(x)};
}

// xoshiro256++ (Blackman & Vigna 2019) seeded through SplitMix64 over
// (seed, stream). Fixed, portable, and fully specified: all draws below are
// defined in terms of next_u64() so output is bit-identical across platforms.
class Rng {
  public:
    explicit Rng(RngSpec spec) {
        std::uint64_t x = spec.seed;
        std::uint64_t key = detail::splitmix64(x);
        x = key ^ (spec.stream * 0xD2B74407B1CE6E93ULL + 0x8BB84B93962EACC9ULL);
        for (auto& s : state_) s = detail::splitmix64(x);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe under log().
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Standard normal via Box-Muller; consumes exactly two draws per call.
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Unbiased integer in [0, n) via bitmask rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t mask = n - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        for (;;) {
            const std::uint64_t v = next_u64() & mask;
            if (v < n) return v;
        }
    }

    // Index into a probability vector by inverse-CDF scan. Probabilities are
    // assumed nonnegative; any rounding slack goes to the last positive entry.
    int categorical(const Eigen::Ref<const Eigen::VectorXd>& probs) {
        const double total = probs.sum();
        double u = uniform01() * total;
        int last_positive = 0;
        for (int i = 0; i < probs.size(); ++i) {
            if (probs[i] > 0.0) last_positive = i;
            u -= probs[i];
            if (u < 0.0 && probs[i] > 0.0) return i;
        }
        return last_positive;
    }

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

  private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace bope
