#include "kcs/rng.hpp"

#include <cmath>

namespace kcs {

namespace {

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> single_round(const std::array<std::uint32_t, 4>& ctr,
                                                 const std::array<std::uint32_t, 2>& key) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mul_hi_lo(Philox4x32::kMultA, ctr[0], hi0, lo0);
    mul_hi_lo(Philox4x32::kMultB, ctr[2], hi1, lo1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

} // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        ctr = single_round(ctr, key);
    }
    return ctr;
}

void CounterRng::refill() {
    const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block_index_),
                                           static_cast<std::uint32_t>(block_index_ >> 32),
                                           stream_[0], stream_[1]};
    buf_ = Philox4x32::block(ctr, key_);
    ++block_index_;
    pos_ = 0;
}

} // namespace kcs
