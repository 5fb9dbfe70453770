#pragma once

#include <cstdint>
#include <vector>

namespace mimo {

/// Counter-based pseudo-random stream (Philox4x32-10).
///
/// A stream is fully determined by (seed, stream_id): the same pair
/// yields a bit-identical sequence on every run, independent of thread
/// count or the order in which other streams are consumed. Monte-Carlo
/// code derives one stream per unit of work (trial block, training
/// iteration, ...) via derive_stream(), so results never depend on
/// scheduling.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_; }

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;

    /// Uniform double in (0, 1] with 53 random bits (never exactly 0,
    /// so it is safe under log()).
    double uniform_pos() noexcept;

    /// Uniform double in [0, 1).
    double uniform() noexcept;

    /// Uniform double in [lo, hi).
    double uniform_in(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal draw (Box-Muller; the paired value is cached).
    double gaussian() noexcept;

    /// Uniform index in [0, m) for power-of-two m (mask, no modulo bias).
    std::uint32_t index_pow2(std::uint32_t m) noexcept { return next_u32() & (m - 1u); }

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int buf_pos_ = 4;           // empty
    double cached_gauss_ = 0.0;
    bool have_gauss_ = false;
};

/// Stable 64-bit mix of an arbitrary list of indices into a stream id.
/// hash(a, b, c) != hash(a, c, b) and collisions are no more likely than
/// for any 64-bit hash. Used to give every (channel, snr, block, ...)
/// tuple its own independent stream.
std::uint64_t stream_hash(std::initializer_list<std::uint64_t> parts) noexcept;

/// Convenience: a stream whose id is stream_hash(parts) mixed with a
/// namespace tag. Namespaces keep e.g. held-out evaluation data disjoint
/// from training data drawn from the same seed.
RngStream derive_stream(std::uint64_t seed, std::uint64_t ns,
                        std::initializer_list<std::uint64_t> parts) noexcept;

/// n i.i.d. standard-normal draws from the stream.
std::vector<double> rng_draw_gaussian(RngStream& s, std::size_t n);

/// Stream-id namespaces. Values are shifted into the top byte of the id.
namespace stream_ns {
inline constexpr std::uint64_t channel = 1;   ///< channel generation
inline constexpr std::uint64_t noise = 2;     ///< additive receiver noise
inline constexpr std::uint64_t symbols = 3;   ///< transmitted symbol draws
inline constexpr std::uint64_t training = 4;  ///< training batches
inline constexpr std::uint64_t heldout = 5;   ///< held-out evaluation batches
inline constexpr std::uint64_t sweep = 6;     ///< Monte-Carlo sweep blocks
} // namespace stream_ns

} // namespace mimo
