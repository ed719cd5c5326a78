#pragma once

#include <compare>
#include <stdexcept>

namespace mose {

/// Bytes per second carried by one megabit per second.
inline constexpr double kBytesPerMbps = 125000.0;

/// Link or allocation rate in bytes per second. Mbps only appears at I/O
/// boundaries.
class Bandwidth {
public:
    constexpr Bandwidth() = default;

    static constexpr Bandwidth bytes_per_s(double v) { return Bandwidth(v); }
    static constexpr Bandwidth mbps(double v) { return Bandwidth(v * kBytesPerMbps); }

    constexpr double bytes_per_s() const { return value_; }
    constexpr double mbps() const { return value_ / kBytesPerMbps; }

    constexpr bool positive() const { return value_ > 0.0; }

    friend constexpr auto operator<=>(const Bandwidth&, const Bandwidth&) = default;

private:
    constexpr explicit Bandwidth(double v) : value_(v) {}
    double value_ = 0.0;
};

inline void require_positive(Bandwidth bw, const char* what)
{
    if (!bw.positive())
        throw std::domain_error(std::string(what) + ": bandwidth must be positive");
}

}  // namespace mose
