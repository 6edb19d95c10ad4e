#include "shield/rng.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "shield/error.hpp"

namespace shield {

double Prng::next_gaussian(double mu, double sigma)
{
    if (!(sigma >= 0.0)) {
        throw ParameterError("gaussian sigma must be >= 0, got " + std::to_string(sigma));
    }
    const double u1 = 1.0 - next_unit(); // (0, 1]
    const double u2 = next_unit();
    if (sigma == 0.0) {
        return mu;
    }
    return mu + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t parse_seed(std::string_view text)
{
    int base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        text.remove_prefix(2);
        base = 16;
    }
    std::uint64_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value, base);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw ParameterError("invalid seed '" + std::string(text) + "'");
    }
    return value;
}

} // namespace shield
