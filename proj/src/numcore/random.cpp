#include "fraudfuse/numcore/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace fraudfuse::nc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view stream) {
    return splitmix64(splitmix64(seed) ^ fnv1a(stream));
}

Rng::Rng(std::uint64_t seed, std::string_view stream) : engine_(mix_seed(seed, stream)) {}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
    double u = 0.0;
    do {
        u = uniform();
    } while (u == 0.0);
    return u;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling on the top of the range keeps the result unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = 0;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::exponential(double mean) {
    return -mean * std::log(uniform_open());
}

double Rng::gumbel() {
    return -std::log(-std::log(uniform_open()));
}

Rng Rng::fork(std::string_view stream) {
    return Rng(engine_(), stream);
}

}  // namespace fraudfuse::nc
