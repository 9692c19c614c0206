#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace osfd {

/// Deterministic counter-free PRNG (splitmix64). The whole pipeline derives
/// every random stream from a single root seed through derive_seed, so runs
/// are reproducible bit-for-bit regardless of evaluation order or thread
/// count. Do not swap in std:: distributions; their output is
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in [lo, hi], inclusive. Requires lo <= hi.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal (Box-Muller).
    double normal();

    /// Bernoulli draw.
    bool chance(double p) { return uniform() < p; }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices drawn from [0, n), in random order.
    std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

private:
    std::uint64_t state_;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

/// Seed derivation: hashes (base, tag, a, b) into a new stream seed.
/// Used to split one root seed into independent per-purpose streams
/// (per video, per epoch, per view, ...).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace osfd
