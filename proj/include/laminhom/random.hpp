#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace laminhom {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

inline constexpr std::string_view kPrngName = "philox4x32-10";

/**
 * Counter-based stream of doubles addressed by (seed, stream, index).
 * The draw sequence depends only on those three values, so any sample can
 * be regenerated independently of every other sample.
 */
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t index);

    /// Uniform in (0, 1), 53 random bits.
    double uniform();
    /// Standard normal by Box-Muller.
    double normal();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace laminhom
