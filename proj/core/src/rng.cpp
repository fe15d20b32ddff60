#include "gamenet/rng.hpp"

#include "gamenet/error.hpp"

#include <cmath>
#include <numbers>

namespace gamenet {

double Rng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n)
{
    if (n == 0)
        throw ConfigError("Rng::index: empty range");
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = engine_();
        if (r >= threshold)
            return static_cast<std::size_t>(r % bound);
    }
}

} // namespace gamenet
