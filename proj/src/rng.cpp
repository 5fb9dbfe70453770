#include "mimo/rng.hpp"

#include <cmath>

namespace mimo {

namespace {

// Philox4x32-10 round constants (Salmon et al., SC'11).
constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t ctr[4], const std::uint32_t key[2]) noexcept {
    const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * ctr[2];
    const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    ctr[0] = hi1 ^ ctr[1] ^ key[0];
    ctr[1] = lo1;
    ctr[2] = hi0 ^ ctr[3] ^ key[1];
    ctr[3] = lo0;
}

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

void RngStream::refill() noexcept {
    std::uint32_t ctr[4] = {
        std::uint32_t(block_), std::uint32_t(block_ >> 32),
        std::uint32_t(stream_), std::uint32_t(stream_ >> 32)};
    std::uint32_t key[2] = {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)};
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, key);
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    buf_[0] = ctr[0];
    buf_[1] = ctr[1];
    buf_[2] = ctr[2];
    buf_[3] = ctr[3];
    buf_pos_ = 0;
    ++block_;
}

std::uint32_t RngStream::next_u32() noexcept {
    if (buf_pos_ >= 4) refill();
    return buf_[buf_pos_++];
}

std::uint64_t RngStream::next_u64() noexcept {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
}

double RngStream::uniform_pos() noexcept {
    // 53-bit mantissa, shifted into (0, 1].
    return double((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::uniform() noexcept {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::gaussian() noexcept {
    if (have_gauss_) {
        have_gauss_ = false;
        return cached_gauss_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_gauss_ = r * std::sin(a);
    have_gauss_ = true;
    return r * std::cos(a);
}

std::uint64_t stream_hash(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x243F6A8885A308D3ull; // pi fraction, arbitrary non-zero start
    for (std::uint64_t p : parts) h = splitmix64(h ^ p);
    return h;
}

RngStream derive_stream(std::uint64_t seed, std::uint64_t ns,
                        std::initializer_list<std::uint64_t> parts) noexcept {
    const std::uint64_t id = splitmix64(stream_hash(parts) ^ (ns << 56));
    return RngStream(seed, id);
}

std::vector<double> rng_draw_gaussian(RngStream& s, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = s.gaussian();
    return out;
}

} // namespace mimo
