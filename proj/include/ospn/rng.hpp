#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <vector>

namespace ospn {

// xoshiro256** with splitmix64 seeding. Hand-rolled so that draws are
// bitwise identical across platforms and the full state is four words
// (std::mt19937 state is ~2.5 KB and its distributions are
// implementation-defined, which would break reproducibility guarantees).
class Rng {
public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            word = splitmix64(x);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53 bits of precision.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
    std::size_t below(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<std::size_t>(r % bound);
    }

    // Standard normal via Box-Muller (no cached spare: one state, no hidden flag).
    double normal() {
        const double u = 1.0 - uniform01();
        const double v = uniform01();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    std::array<std::uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::array<std::uint64_t, 4> state_{};
};

// Derives independent seeds for named sub-streams (per-step dropout, per-epoch
// shuffles, dataset attempts) from one root seed. Counter-based streams make
// checkpoint resume exact: the stream for step t never depends on steps < t.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream_tag, std::uint64_t counter) {
    std::uint64_t x = root ^ (stream_tag * 0x9e3779b97f4a7c15ULL) ^ (counter * 0xd1b54a32d192ed03ULL);
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

namespace stream {
constexpr std::uint64_t kTrainStep = 0x5354455030ULL;  // per-step sampling + dropout
constexpr std::uint64_t kEpochShuffle = 0x45504f4348ULL;
constexpr std::uint64_t kDataGen = 0x44415441ULL;
constexpr std::uint64_t kModelInit = 0x494e4954ULL;
constexpr std::uint64_t kSearch = 0x53524348ULL;
} // namespace stream

} // namespace ospn
