#pragma once

#include <array>
#include <cstdint>

namespace genkit::numerics {

// Counter-keyed xoshiro256++ stream. Two streams built from the same
// (base_seed, stream_id, substream_id) triple produce identical draws, so
// simulation output does not depend on thread scheduling: each unit of work
// derives its own stream from its index instead of sharing one generator.
class RngStream {
public:
    RngStream(std::uint64_t base_seed, std::uint64_t stream_id,
              std::uint64_t substream_id = 0);

    std::uint64_t next_u64();

    // Uniform on the open interval (0, 1).
    double uniform01();

    // Standard normal draw via the inverse CDF, so the exact output sequence
    // is a pure function of the stream key on every platform.
    double normal();

    bool bernoulli(double p);

private:
    std::array<std::uint64_t, 4> state_;
};

} // namespace genkit::numerics
