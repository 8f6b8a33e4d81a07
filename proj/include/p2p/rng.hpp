#ifndef P2P_RNG_HPP
#define P2P_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "p2p/errors.hpp"

namespace p2p {

// xoshiro256** with splitmix64 seeding. We roll our own sampling instead of
// using <random> distributions because their output differs between standard
// library implementations and every run must be reproducible bit-for-bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_)
            word = splitmix64(x);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0)
            throw InvalidParams("Rng::below: bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold)
                return r % bound;
        }
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    bool bernoulli(double p) {
        if (p <= 0.0)
            return false;
        if (p >= 1.0)
            return true;
        return uniform01() < p;
    }

    // Exponential holding time with the given mean; returns +inf for an
    // infinite mean (disabled process).
    double exponential(double mean) {
        if (std::isinf(mean))
            return mean;
        if (mean <= 0.0)
            throw InvalidParams("Rng::exponential: mean must be positive");
        return -mean * std::log1p(-uniform01());
    }

    // k distinct elements drawn without replacement, order of draws preserved.
    template <typename T>
    std::vector<T> sample(const std::vector<T>& pool, std::size_t k) {
        std::vector<T> scratch = pool;
        if (k > scratch.size())
            k = scratch.size();
        std::vector<T> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + index(scratch.size() - i);
            std::swap(scratch[i], scratch[j]);
            out.push_back(scratch[i]);
        }
        return out;
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
};

} // namespace p2p

#endif
