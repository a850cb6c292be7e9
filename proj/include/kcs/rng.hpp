#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace kcs {

// Philox 4x32-10 counter-based generator. Each (master_seed, stream_id) pair
// names an independent substream whose output depends only on its own counter,
// so trajectories can be generated in any order, on any number of threads,
// with bit-identical results.
//
// Counter layout: words 0..1 hold the running 64-bit block index, words 2..3
// hold the stream id. The key is the 64-bit master seed.
struct Philox4x32 {
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    static constexpr std::uint32_t kMultA = 0xD2511F53u;
    static constexpr std::uint32_t kMultB = 0xCD9E8D57u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key);
};

class CounterRng {
  public:
    CounterRng(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          stream_{static_cast<std::uint32_t>(stream_id),
                  static_cast<std::uint32_t>(stream_id >> 32)} {}

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform on (0, 1]; never returns 0, so log(uniform()) is always finite.
    double uniform() {
        return (static_cast<double>(next_u32()) + 1.0) * 0x1p-32;
    }

    // Standard normal via Box-Muller. Exactly two uniforms per pair of
    // normals keeps the draw count deterministic.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::complex<double> normal_complex() {
        const double re = normal();
        const double im = normal();
        return {re, im};
    }

  private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 2> stream_;
    std::uint64_t block_index_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;

    void refill();
};

} // namespace kcs
