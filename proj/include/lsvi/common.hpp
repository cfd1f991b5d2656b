#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace lsvi {

/// Random engine used everywhere. Every run owns its engine; none are shared.
using Rng = std::mt19937_64;

/// Raised when a model, config or argument violates its contract.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct StateAction {
    int state = 0;
    int action = 0;

    friend auto operator<=>(const StateAction&, const StateAction&) = default;
};

inline double clamp_to(double value, double lo, double hi) {
    return std::min(std::max(value, lo), hi);
}

/// Ceiling with the convention that exact integers (up to rounding noise) map to themselves.
inline long long ceil_exact(double x) {
    const double rounded = std::round(x);
    if (std::abs(x - rounded) <= 1e-9 * std::max(1.0, std::abs(x)))
        return static_cast<long long>(rounded);
    return static_cast<long long>(std::ceil(x));
}

/// Uniform draw in [0,1).
inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Derives an independent seed from a parent seed and a stream index (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
    std::uint64_t z = parent + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline void require(bool condition, const std::string& message) {
    if (!condition)
        throw ModelError(message);
}

} // namespace lsvi
