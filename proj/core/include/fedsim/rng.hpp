#pragma once

#include <cstdint>
#include <random>

namespace fedsim {

// splitmix64 step; the mixing primitive behind all derived seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from (base, stream, index).
// Stated mixing function: base XOR-folded with the splitmix64 of its ids,
// so that every (stream, index) pair owns a disjoint stream for one run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
    return splitmix64(base ^ splitmix64(stream ^ splitmix64(index)));
}

// Named streams hung off a single run seed.
namespace stream {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t test_data = 2;
inline constexpr std::uint64_t partition = 3;
inline constexpr std::uint64_t model_init = 4;
inline constexpr std::uint64_t server = 5;
inline constexpr std::uint64_t client = 16;
} // namespace stream

// Seeded generator owned by exactly one caller at a time.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
    }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }

    // Inclusive on both ends.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen_);
    }

    bool bernoulli(double p) {
        return std::bernoulli_distribution(p)(gen_);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

} // namespace fedsim
