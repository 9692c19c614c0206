#include "osfd/rng.hpp"

#include <cmath>

#include "osfd/error.hpp"

namespace osfd {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    OSFD_REQUIRE(lo <= hi, "uniform_int: empty range [", lo, ", ", hi, "]");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Rejection sampling keeps the draw unbiased.
    std::uint64_t limit = ~0ULL - (~0ULL % span);
    std::uint64_t r;
    do {
        r = next_u64();
    } while (r >= limit && span != 0);
    return lo + static_cast<std::int64_t>(r % span);
}

double Rng::normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 1e-300);
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    cached_normal_ = radius * std::sin(angle);
    have_cached_normal_ = true;
    return radius * std::cos(angle);
}

std::vector<std::int64_t> Rng::sample_without_replacement(std::int64_t n, std::int64_t k) {
    OSFD_REQUIRE(k >= 0 && k <= n, "sample_without_replacement: k=", k, " out of range for n=", n);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    // Partial Fisher-Yates: only the first k slots are needed.
    for (std::int64_t i = 0; i < k; ++i) {
        std::int64_t j = uniform_int(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    h = fnv1a(h, &base, sizeof(base));
    h = fnv1a(h, tag.data(), tag.size());
    h = fnv1a(h, &a, sizeof(a));
    h = fnv1a(h, &b, sizeof(b));
    // One splitmix round decorrelates seeds that share a prefix.
    std::uint64_t s = h;
    return splitmix64(s);
}

}  // namespace osfd
