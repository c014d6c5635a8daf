#include "genkit/numerics/rng.hpp"

#include <stdexcept>

#include "genkit/numerics/gaussian.hpp"

namespace genkit::numerics {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

RngStream::RngStream(std::uint64_t base_seed, std::uint64_t stream_id,
                     std::uint64_t substream_id) {
    // Mix the key through splitmix64 to seed the xoshiro state, the
    // recommended way to expand a small seed into four nonzero words.
    std::uint64_t key = base_seed;
    (void)splitmix64(key);
    key ^= 0x2545f4914f6cdd1dULL * (stream_id + 1);
    (void)splitmix64(key);
    key ^= 0x9e3779b97f4a7c15ULL * (substream_id + 1);
    for (auto& word : state_) {
        word = splitmix64(key);
    }
}

std::uint64_t RngStream::next_u64() {
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

double RngStream::uniform01() {
    // 53 random bits, centered so the result lies strictly inside (0, 1).
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    return normal_quantile(uniform01());
}

bool RngStream::bernoulli(double p) {
    if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("bernoulli probability outside [0,1]");
    }
    return uniform01() < p;
}

} // namespace genkit::numerics
