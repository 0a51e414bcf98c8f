#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace fraudfuse::nc {

// Seedable generator used for every random draw in the project.
//
// The raw engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distribution transforms below are written out by hand because
// the std:: distributions are implementation-defined, and byte-identical
// outputs across toolchains are part of the determinism contract.
//
// A stream name is hashed into the seed so that independent consumers
// (initialization, shuffling, Gumbel noise, dropout) never share a sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::string_view stream = {});

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1) with 53 random bits.
    double uniform();
    // (0, 1), never returns an endpoint.
    double uniform_open();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);
    double normal();
    double exponential(double mean);
    // Standard Gumbel(0, 1).
    double gumbel();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Child generator whose seed is drawn from this one.
    Rng fork(std::string_view stream);

private:
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view stream);

}  // namespace fraudfuse::nc
