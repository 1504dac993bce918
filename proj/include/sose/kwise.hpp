#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sose/error.hpp"

// K-wise independent random families.
//
// A family is a polynomial of degree K-1 over the prime field F_q whose K
// coefficients are expanded deterministically from a 64-bit seed. Evaluating
// the polynomial at K distinct points gives K jointly uniform field elements,
// which is all the sketch constructions need: signs are read off one bit of an
// evaluation and bounded integers are obtained by fixed-point scaling.
//
// Coefficient expansion (pinned; changing it changes every sketch):
//   c_i = splitmix64(seed + (i + 1) * 0x9e3779b97f4a7c15) mod q,  i = 0..K-1
// where splitmix64 is the finalizer of Steele, Lea and Flood's SplitMix64
// generator (constants 0xbf58476d1ce4e5b9, 0x94d049bb133111eb, shifts 30/27/31).
//
// A second "fully independent" mode replaces the polynomial by the SplitMix64
// counter stream keyed by the seed. It is what OSE-IE and the dense baselines
// use by default, and it allows A/B comparison against K-wise mode.

namespace sose {

inline constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

/// SplitMix64 finalizer (a bijection on 64-bit words).
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Combines a master seed with a counter into a derived seed. Used for trial
/// seeds and per-column sub-streams.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) noexcept {
    return splitmix64(splitmix64(seed) ^ (counter * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

namespace detail {

inline std::uint64_t mulmod_mersenne61(std::uint64_t a, std::uint64_t b) noexcept {
    const unsigned __int128 z = static_cast<unsigned __int128>(a) * b;
    std::uint64_t r = (static_cast<std::uint64_t>(z) & kMersenne61) + static_cast<std::uint64_t>(z >> 61);
    r = (r & kMersenne61) + (r >> 61);
    return r >= kMersenne61 ? r - kMersenne61 : r;
}

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t q) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % q);
}

inline std::uint64_t powmod(std::uint64_t a, std::uint64_t e, std::uint64_t q) noexcept {
    std::uint64_t r = 1 % q;
    a %= q;
    while (e) {
        if (e & 1) r = mulmod(r, a, q);
        a = mulmod(a, a, q);
        e >>= 1;
    }
    return r;
}

}  // namespace detail

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
inline bool is_prime(std::uint64_t n) noexcept {
    if (n < 2) return false;
    for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        if (n % p == 0) return n == p;
    }
    std::uint64_t d = n - 1;
    int r = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++r;
    }
    for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        std::uint64_t x = detail::powmod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 1; i < r; ++i) {
            x = detail::mulmod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

enum class Independence { kwise, full };

class KWiseFamily {
public:
    /// Seeded degree-(K-1) polynomial family over F_q.
    static KWiseFamily create(std::uint64_t seed, int degree_k, std::uint64_t field_modulus = kMersenne61) {
        check_parameters(degree_k, field_modulus);
        std::vector<std::uint64_t> coeffs(static_cast<std::size_t>(degree_k));
        for (int i = 0; i < degree_k; ++i) {
            coeffs[static_cast<std::size_t>(i)] =
                splitmix64(seed + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL) % field_modulus;
        }
        return KWiseFamily(seed, Independence::kwise, field_modulus, std::move(coeffs));
    }

    /// Family with caller-chosen coefficients c_0..c_{K-1} (lowest degree
    /// first). Used to enumerate every member of a family exhaustively.
    static KWiseFamily from_coefficients(std::vector<std::uint64_t> coeffs, std::uint64_t field_modulus) {
        check_parameters(static_cast<int>(coeffs.size()), field_modulus);
        for (auto& c : coeffs) c %= field_modulus;
        return KWiseFamily(0, Independence::kwise, field_modulus, std::move(coeffs));
    }

    /// Fully independent stream over F_{2^61-1}: evaluation at index i is a
    /// keyed SplitMix64 hash of i.
    static KWiseFamily fully_independent(std::uint64_t seed) {
        return KWiseFamily(seed, Independence::full, kMersenne61, {});
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t field_modulus() const noexcept { return modulus_; }
    Independence independence() const noexcept { return mode_; }
    /// K for K-wise families; 0 denotes full independence.
    int degree_k() const noexcept { return static_cast<int>(coeffs_.size()); }
    const std::vector<std::uint64_t>& coefficients() const noexcept { return coeffs_; }

    /// Field element at `index`; pure function of (family, index).
    std::uint64_t evaluate(std::uint64_t index) const {
        if (index >= modulus_) {
            throw RangeError("index " + std::to_string(index) + " outside field of size " +
                             std::to_string(modulus_));
        }
        return evaluate_unchecked(index);
    }

    std::uint64_t evaluate_unchecked(std::uint64_t x) const noexcept {
        if (mode_ == Independence::full) {
            // 2^61-1 has 61 bits; fold the (at most one) out-of-range value.
            const std::uint64_t v = splitmix64(key_ ^ splitmix64(x)) >> 3;
            return v == kMersenne61 ? 0 : v;
        }
        const std::size_t k = coeffs_.size();
        std::uint64_t v = coeffs_[k - 1];
        if (modulus_ == kMersenne61) {
            for (std::size_t i = k - 1; i-- > 0;) {
                v = detail::mulmod_mersenne61(v, x) + coeffs_[i];
                if (v >= kMersenne61) v -= kMersenne61;
            }
        } else {
            for (std::size_t i = k - 1; i-- > 0;) {
                v = (detail::mulmod(v, x, modulus_) + coeffs_[i]) % modulus_;
            }
        }
        return v;
    }

    /// Rademacher sign from the low bit of the evaluation (+1 for even).
    int rademacher_at(std::uint64_t index) const { return (evaluate(index) & 1) ? -1 : 1; }

    /// Integer in [lo, hi] by fixed-point scaling of the evaluation:
    /// lo + floor(v * (hi - lo + 1) / q). A range of size q is the identity.
    std::int64_t uniform_range_at(std::uint64_t index, std::int64_t lo, std::int64_t hi) const {
        if (lo > hi) throw ParameterError("empty range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        const auto width = static_cast<std::uint64_t>(hi - lo) + 1;
        if (width > modulus_) throw ParameterError("range wider than the field");
        return lo + static_cast<std::int64_t>(scale_to(evaluate(index), width));
    }

    /// Uniform real in (0, 1): (v + 1/2) / q.
    double uniform01_at(std::uint64_t index) const {
        return (static_cast<double>(evaluate(index)) + 0.5) / static_cast<double>(modulus_);
    }

    /// Bernoulli(prob) via threshold on the evaluation; exact up to 1/q.
    bool bernoulli_at(std::uint64_t index, double prob) const {
        if (prob >= 1.0) return true;
        if (prob <= 0.0) return false;
        const auto threshold = static_cast<std::uint64_t>(std::llround(prob * static_cast<double>(modulus_)));
        return evaluate(index) < threshold;
    }

    /// Seed of an independent sub-stream, used by samplers that consume a
    /// conventional PRNG (e.g. per-column binomial counts).
    std::uint64_t substream_seed(std::uint64_t tag) const noexcept { return mix_seed(key_, tag); }

    std::uint64_t scale_to(std::uint64_t v, std::uint64_t width) const noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(v) * width) / modulus_);
    }

    friend bool operator==(const KWiseFamily&, const KWiseFamily&) = default;

private:
    KWiseFamily(std::uint64_t seed, Independence mode, std::uint64_t q, std::vector<std::uint64_t> coeffs)
        : seed_(seed), key_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)), mode_(mode), modulus_(q),
          coeffs_(std::move(coeffs)) {}

    static void check_parameters(int degree_k, std::uint64_t q) {
        if (degree_k < 1) throw ParameterError("degree_k must be at least 1");
        if (q < 2) throw ParameterError("field modulus must be at least 2");
        if (q > kMersenne61) throw ParameterError("field modulus must not exceed 2^61-1");
        if (!is_prime(q)) throw ParameterError("field modulus " + std::to_string(q) + " is not prime");
    }

    std::uint64_t seed_;
    std::uint64_t key_;
    Independence mode_;
    std::uint64_t modulus_;
    std::vector<std::uint64_t> coeffs_;
};

inline KWiseFamily new_kwise_family(std::uint64_t seed, int degree_k, std::uint64_t field_modulus = kMersenne61) {
    return KWiseFamily::create(seed, degree_k, field_modulus);
}

// Sign and position collections draw from disjoint halves of the index space
// (tag bit 0 for signs, 1 for positions), so any K of them together are still
// jointly uniform.
constexpr std::uint64_t sign_index(std::uint64_t slot) noexcept { return slot << 1; }
constexpr std::uint64_t position_index(std::uint64_t slot) noexcept { return (slot << 1) | 1; }

}  // namespace sose
