#pragma once

#include "opaug/common.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace opaug {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Counter-free deterministic random stream. The generator is xoshiro-style
// splitmix chained state, so identical (seed, stream_id) reproduces identical
// draws bit-for-bit on every platform; no standard-library distribution is
// involved anywhere.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id) {
        // Decorrelate streams: fold the id through two splitmix rounds.
        std::uint64_t s = seed ^ 0x6a09e667f3bcc909ULL;
        state_ = detail::splitmix64(s) ^ (stream_id * 0x9e3779b97f4a7c15ULL);
        state_ = detail::splitmix64(state_);
        (void)next_u64();
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    // Independent substream for trial/cell `index` of this stream.
    RandomStream substream(std::uint64_t index) const {
        std::uint64_t mixed = stream_id_;
        mixed = detail::splitmix64(mixed) ^ index;
        return RandomStream(seed_, detail::splitmix64(mixed));
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Binomial(count, p) by CDF inversion (one uniform, O(count*p) expected walk).
    std::uint64_t binomial(std::uint64_t count, double p) {
        if (count == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return count;
        const double u = uniform();
        const double q = 1.0 - p;
        double pmf = std::pow(q, static_cast<double>(count));
        double cdf = pmf;
        std::uint64_t k = 0;
        // pow(q, count) can underflow for large count; fall back to a
        // log-space walk in that case.
        if (pmf > 0.0) {
            while (cdf < u && k < count) {
                pmf *= (static_cast<double>(count - k) / static_cast<double>(k + 1)) * (p / q);
                cdf += pmf;
                ++k;
            }
            return k;
        }
        double logpmf = static_cast<double>(count) * std::log(q);
        double logcdf = logpmf;
        while (std::exp(logcdf) < u && k < count) {
            logpmf += std::log(static_cast<double>(count - k) / static_cast<double>(k + 1)) +
                      std::log(p) - std::log(q);
            logcdf = logcdf + std::log1p(std::exp(logpmf - logcdf));
            ++k;
        }
        return k;
    }

    // Multinomial(count, probs) via sequential binomial conditioning. The
    // counts land in `out`, which must have probs.size() entries.
    template <typename ProbVec, typename CountVec>
    void multinomial(std::uint64_t count, const ProbVec& probs, CountVec& out) {
        const auto k = static_cast<std::size_t>(probs.size());
        double remaining_p = 1.0;
        std::uint64_t remaining_n = count;
        for (std::size_t j = 0; j < k; ++j) {
            if (remaining_n == 0) {
                out[j] = 0;
                continue;
            }
            if (j + 1 == k) {
                out[j] = remaining_n;
                remaining_n = 0;
                continue;
            }
            const double pj = probs[j];
            double cond = remaining_p > 0.0 ? pj / remaining_p : 0.0;
            if (cond > 1.0) cond = 1.0;
            const std::uint64_t c = binomial(remaining_n, cond);
            out[j] = c;
            remaining_n -= c;
            remaining_p -= pj;
        }
    }

    // One draw from a finite distribution (linear scan; rows here are short).
    template <typename ProbVec>
    std::size_t discrete(const ProbVec& probs) {
        const double u = uniform();
        double cdf = 0.0;
        const auto k = static_cast<std::size_t>(probs.size());
        for (std::size_t j = 0; j < k; ++j) {
            cdf += probs[j];
            if (u < cdf) return j;
        }
        return k - 1;
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace opaug
