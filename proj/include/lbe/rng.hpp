#pragma once

#include <cstdint>
#include <random>

namespace lbe {

// Purpose tags for seed derivation. New consumers get new tags so that
// existing streams never shift.
enum class StreamTag : std::uint64_t {
    path = 1,
    partition = 2,
    grid_row = 3,
    cycles = 4,
    sampler = 5,
    experiment = 6,
    test = 7,
};

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based derivation: the result depends only on its arguments.
std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t index,
                          std::uint64_t sub);

class Rng {
public:
    using engine_type = std::mt19937_64;

    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return unif_(eng_); }
    // strictly positive, for logs and ratios
    double uniform_pos() {
        double u;
        do { u = unif_(eng_); } while (u <= 0.0);
        return u;
    }
    double normal() { return normal_(eng_); }
    double exponential() { return expo_(eng_); }
    bool bernoulli(double prob) { return unif_(eng_) < prob; }
    std::uint64_t bits() { return eng_(); }
    engine_type& engine() { return eng_; }

private:
    engine_type eng_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::exponential_distribution<double> expo_{1.0};
};

}  // namespace lbe
