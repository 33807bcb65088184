#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string_view>

#include "dhtm/check.hpp"

namespace dhtm {

// SplitMix64 finalizer; used to derive independent sub-seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic seed hierarchy: trial seed -> named component sub-seeds.
// Components draw from separate streams so a change in one does not perturb
// the others.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the label
    for (char c : label) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ull;
    }
    return splitmix64(root ^ h);
}

// Thin wrapper over mt19937_64 with the distribution code written out, so
// that draws are identical across standard library implementations.
class Rng {
public:
    Rng() : gen_(0) {}
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        check_arg(n > 0, "uniform_int: n must be positive");
        return static_cast<int>(uniform() * n) % n;
    }

    // Sample an index from an unnormalized nonnegative weight vector.
    int categorical(std::span<const double> weights) {
        check_arg(!weights.empty(), "categorical: empty weights");
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) return uniform_int(static_cast<int>(weights.size()));
        double r = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    void save(std::ostream& os) const { os << gen_; }
    void load(std::istream& is) { is >> gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace dhtm
