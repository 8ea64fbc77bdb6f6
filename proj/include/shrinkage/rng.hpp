#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace shrinkage {

/// SplitMix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/**
 * Seed splitting rule used everywhere a stochastic operation needs its own
 * stream: child = splitmix64(splitmix64(seed) ^ splitmix64(stream + golden)).
 * Children of children are obtained by applying the rule again, so a
 * replicate/method/chain path maps to a unique, schedule-independent seed.
 */
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t stream)
{
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

// Stream ids shared across modules.
namespace stream {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t method = 2;
inline constexpr std::uint64_t folds = 3;
inline constexpr std::uint64_t chain = 4;
inline constexpr std::uint64_t groups = 5;
inline constexpr std::uint64_t noise = 6;
inline constexpr std::uint64_t subsets = 7;
}  // namespace stream

/**
 * Random source: mt19937_64 driven through Boost.Random distributions, whose
 * algorithms are fixed across platforms (unlike the <random> distributions).
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return boost::random::uniform_01<double>()(engine_); }
    double normal() { return normal_(engine_); }
    double exponential() { return boost::random::exponential_distribution<double>(1.0)(engine_); }

    /// Gamma with shape a and rate b.
    double gamma(double shape, double rate)
    {
        return boost::random::gamma_distribution<double>(shape, 1.0)(engine_) / rate;
    }

    /// Inverse-gamma with shape a and scale b: 1/X for X ~ Gamma(a, rate b).
    double inv_gamma(double shape, double scale)
    {
        return scale / boost::random::gamma_distribution<double>(shape, 1.0)(engine_);
    }

    std::size_t index(std::size_t n)
    {
        return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    /// Fisher-Yates shuffle with a portable index draw.
    template <class T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n)
    {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        shuffle(idx);
        return idx;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace shrinkage
