#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sose/calibration.hpp"
#include "sose/error.hpp"
#include "sose/kwise.hpp"
#include "sose/parallel.hpp"
#include "sose/sketch.hpp"

namespace sose {

/// Small URBG over the SplitMix64 counter stream; cheap to seed per column.
class SplitMix64Engine {
public:
    using result_type = std::uint64_t;
    explicit SplitMix64Engine(std::uint64_t seed) noexcept : state_(seed) {}
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
    result_type operator()() noexcept {
        const std::uint64_t out = splitmix64(state_);
        state_ += 0x9e3779b97f4a7c15ULL;
        return out;
    }

private:
    std::uint64_t state_;
};

/// Random family matching a spec: degree_k = 0 selects full independence.
inline KWiseFamily family_for(const SketchSpec& spec) {
    return spec.degree_k == 0 ? KWiseFamily::fully_independent(spec.seed)
                              : KWiseFamily::create(spec.seed, spec.degree_k);
}

namespace detail {

inline void check_index_budget(const KWiseFamily& family, double slots) {
    if (2.0 * slots >= static_cast<double>(family.field_modulus()))
        throw RangeError("sketch needs more random slots than the field provides");
}

/// Sorted k-subset of [0, m) drawn uniformly.
template <class Engine>
void sample_subset(std::int64_t m, std::int64_t k, Engine& rng, std::vector<std::int32_t>& out) {
    out.clear();
    if (k <= 0) return;
    if (k * 16 < m) {
        // Floyd's algorithm; k is small so membership is a linear scan.
        for (std::int64_t j = m - k; j < m; ++j) {
            std::uniform_int_distribution<std::int64_t> pick(0, j);
            const auto t = static_cast<std::int32_t>(pick(rng));
            if (std::find(out.begin(), out.end(), t) == out.end())
                out.push_back(t);
            else
                out.push_back(static_cast<std::int32_t>(j));
        }
        std::sort(out.begin(), out.end());
        return;
    }
    // Selection sampling (Knuth, Algorithm S): ordered output in one pass.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::int64_t chosen = 0;
    for (std::int64_t i = 0; i < m && chosen < k; ++i) {
        if (static_cast<double>(m - i) * u(rng) < static_cast<double>(k - chosen)) {
            out.push_back(static_cast<std::int32_t>(i));
            ++chosen;
        }
    }
}

inline SparseSketch empty_sketch(const SketchSpec& spec) {
    SparseSketch out;
    out.spec = spec;
    out.col_ptr.assign(static_cast<std::size_t>(spec.n) + 1, 0);
    out.scale = 1.0 / std::sqrt(spec.pm());
    return out;
}

/// Builds a column-compressed sketch whose columns are produced
/// independently by fill(j, rows, values). Output does not depend on the
/// thread count.
template <class Fill>
void fill_columns(SparseSketch& out, int threads, Fill&& fill) {
    const auto n = static_cast<std::size_t>(out.spec.n);
    std::vector<std::vector<std::int32_t>> rows(n);
    std::vector<std::vector<double>> vals(n);
    parallel_for(n, threads, [&](std::size_t j) { fill(static_cast<std::int64_t>(j), rows[j], vals[j]); });
    for (std::size_t j = 0; j < n; ++j)
        out.col_ptr[j + 1] = out.col_ptr[j] + static_cast<std::int64_t>(rows[j].size());
    out.row_idx.reserve(static_cast<std::size_t>(out.col_ptr[n]));
    out.values.reserve(static_cast<std::size_t>(out.col_ptr[n]));
    for (std::size_t j = 0; j < n; ++j) {
        out.row_idx.insert(out.row_idx.end(), rows[j].begin(), rows[j].end());
        out.values.insert(out.values.end(), vals[j].begin(), vals[j].end());
    }
}

}  // namespace detail

/// OSNAP: column j holds one +-1 in each of the s blocks of height m/s.
/// Slot (j, g) = j*s + g reads its sign and its in-block offset from the
/// sign/position halves of the family's index space.
inline SparseSketch build_osnap(const SketchSpec& spec, const KWiseFamily& family, int threads = 1) {
    if (spec.kind != SketchKind::osnap) throw ParameterError("build_osnap requires kind osnap");
    spec.validate();
    const std::int64_t s = spec.sparsity();
    const std::int64_t block = spec.m / s;
    detail::check_index_budget(family, static_cast<double>(spec.n) * static_cast<double>(s));

    SparseSketch out = detail::empty_sketch(spec);
    out.row_idx.resize(static_cast<std::size_t>(spec.n * s));
    out.values.resize(static_cast<std::size_t>(spec.n * s));
    for (std::int64_t j = 0; j <= spec.n; ++j) out.col_ptr[static_cast<std::size_t>(j)] = j * s;
    parallel_for(static_cast<std::size_t>(spec.n), threads, [&](std::size_t jj) {
        const auto j = static_cast<std::int64_t>(jj);
        for (std::int64_t g = 0; g < s; ++g) {
            const auto slot = static_cast<std::uint64_t>(j * s + g);
            const auto k = static_cast<std::size_t>(j * s + g);
            const auto offset = family.scale_to(family.evaluate_unchecked(position_index(slot)),
                                                static_cast<std::uint64_t>(block));
            out.row_idx[k] = static_cast<std::int32_t>(g * block + static_cast<std::int64_t>(offset));
            out.values[k] = (family.evaluate_unchecked(sign_index(slot)) & 1) ? -1.0 : 1.0;
        }
    });
    return out;
}

/// OSE-IE: every entry independently +-1 with probability p, else 0.
///
/// With a fully independent family each column draws its nonzero count from
/// Binomial(m, p) and then a uniform subset of rows, which has the same law
/// as scanning all m cells. A K-wise family scans the cells directly.
inline SparseSketch build_ose_ie(const SketchSpec& spec, const KWiseFamily& family, int threads = 1) {
    if (spec.kind != SketchKind::ose_ie) throw ParameterError("build_ose_ie requires kind ose-ie");
    spec.validate();
    detail::check_index_budget(family, static_cast<double>(spec.m) * static_cast<double>(spec.n));
    SparseSketch out = detail::empty_sketch(spec);
    const double p = spec.p;
    if (family.independence() == Independence::full) {
        detail::fill_columns(out, threads, [&](std::int64_t j, auto& rows, auto& vals) {
            SplitMix64Engine rng(family.substream_seed(static_cast<std::uint64_t>(j)));
            const std::int64_t count =
                p >= 1.0 ? spec.m : std::binomial_distribution<std::int64_t>(spec.m, p)(rng);
            detail::sample_subset(spec.m, count, rng, rows);
            vals.resize(rows.size());
            for (auto& v : vals) v = (rng() >> 63) ? -1.0 : 1.0;
        });
    } else {
        detail::fill_columns(out, threads, [&](std::int64_t j, auto& rows, auto& vals) {
            for (std::int64_t i = 0; i < spec.m; ++i) {
                const auto slot = static_cast<std::uint64_t>(j * spec.m + i);
                if (!family.bernoulli_at(position_index(slot), p)) continue;
                rows.push_back(static_cast<std::int32_t>(i));
                vals.push_back(static_cast<double>(family.rademacher_at(sign_index(slot))));
            }
        });
    }
    return out;
}

/// Reference OSE-IE generator scanning every cell with a per-column PRNG.
/// Same law as build_ose_ie; used to test the binomial shortcut.
inline SparseSketch build_ose_ie_naive(const SketchSpec& spec, std::uint64_t seed) {
    spec.validate();
    SparseSketch out = detail::empty_sketch(spec);
    detail::fill_columns(out, 1, [&](std::int64_t j, auto& rows, auto& vals) {
        SplitMix64Engine rng(mix_seed(seed, static_cast<std::uint64_t>(j)));
        std::bernoulli_distribution keep(spec.p);
        for (std::int64_t i = 0; i < spec.m; ++i) {
            if (!keep(rng)) continue;
            rows.push_back(static_cast<std::int32_t>(i));
            vals.push_back((rng() >> 63) ? -1.0 : 1.0);
        }
    });
    return out;
}

/// Dense Gaussian (variance p) or Rademacher (+-sqrt(p)) baseline.
/// Gaussian entries use the Box-Muller cosine branch on the uniforms at
/// indices 2t and 2t+1, t = j*m + i.
inline DenseSketch build_dense_baseline(const SketchSpec& spec, const KWiseFamily& family, int threads = 1) {
    if (!is_dense_kind(spec.kind)) throw ParameterError("build_dense_baseline requires a dense kind");
    spec.validate();
    detail::check_index_budget(family, static_cast<double>(spec.m) * static_cast<double>(spec.n));
    DenseSketch out{spec, Eigen::MatrixXd(spec.m, spec.n), 1.0 / std::sqrt(spec.pm())};
    const double sd = std::sqrt(spec.p);
    const bool gaussian = spec.kind == SketchKind::gaussian_dense;
    parallel_for(static_cast<std::size_t>(spec.n), threads, [&](std::size_t jj) {
        const auto j = static_cast<std::int64_t>(jj);
        for (std::int64_t i = 0; i < spec.m; ++i) {
            const auto t = static_cast<std::uint64_t>(j * spec.m + i);
            double v;
            if (gaussian) {
                const double u1 = family.uniform01_at(2 * t);
                const double u2 = family.uniform01_at(2 * t + 1);
                v = sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
            } else {
                v = (family.evaluate_unchecked(sign_index(t)) & 1) ? -sd : sd;
            }
            out.unscaled(i, j) = v;
        }
    });
    return out;
}

/// Builds whatever kind of oblivious sketch the spec names.
inline AnySketch build_oblivious(const SketchSpec& spec, int threads = 1) {
    const KWiseFamily family = family_for(spec);
    switch (spec.kind) {
        case SketchKind::osnap: return build_osnap(spec, family, threads);
        case SketchKind::ose_ie: return build_ose_ie(spec, family, threads);
        case SketchKind::gaussian_dense:
        case SketchKind::rademacher_dense: return build_dense_baseline(spec, family, threads);
        default: throw ParameterError("kind " + std::string(to_string(spec.kind)) + " is not oblivious");
    }
}

/// Independence degree 8 * ceil(ln max(d/(eps delta), pm)).
inline int default_degree_k(double d, double eps, double delta, double pm) {
    const double arg = std::max(d / (eps * delta), pm);
    return 8 * static_cast<int>(std::ceil(std::log(std::max(arg, 2.0))));
}

inline std::int64_t round_up_to_multiple(std::int64_t value, std::int64_t s) { return (value + s - 1) / s * s; }

/// Default oblivious parameters for embedding a d-dimensional subspace of
/// R^n with distortion eps and failure probability delta.
///
///   m0 = ceil(C_m (d + ln(1/delta)) / eps^2)
///   osnap: s = ceil(C_s (L^2/eps + L^3)),   L = ln(d/(eps delta))
///   ose-ie: s = max(osnap s, ceil(C_e L / eps^2))
///   s is capped at m0 (p = 1, reported through `warnings`); for OSNAP m is
///   then rounded up to the next multiple of s.
inline SketchSpec default_parameters(std::int64_t d, std::int64_t n, double eps, double delta, SketchKind kind,
                                     std::uint64_t seed = 0, const Calibration& cal = kDefaultCalibration,
                                     std::vector<std::string>* warnings = nullptr) {
    if (!(eps > 0 && eps < 1) || !(delta > 0 && delta < 1)) throw ParameterError("eps and delta must lie in (0, 1)");
    if (d < 1 || d > n) throw ParameterError("need 1 <= d <= n");
    const double dd = static_cast<double>(d);
    const double L = std::log(dd / (eps * delta));
    const auto m0 = static_cast<std::int64_t>(std::ceil(cal.c_m * (dd + std::log(1.0 / delta)) / (eps * eps)));
    SketchSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.seed = seed;
    if (is_dense_kind(kind)) {
        spec.m = m0;
        spec.p = 1.0;
        spec.degree_k = 0;
        return spec;
    }
    if (kind != SketchKind::osnap && kind != SketchKind::ose_ie)
        throw ParameterError("default_parameters covers oblivious kinds only");
    auto s = static_cast<std::int64_t>(std::ceil(cal.c_s * (L * L / eps + L * L * L)));
    if (kind == SketchKind::ose_ie)
        s = std::max(s, static_cast<std::int64_t>(std::ceil(cal.c_e * L / (eps * eps))));
    s = std::max<std::int64_t>(s, 1);
    if (s >= m0) {
        if (warnings) warnings->push_back("required sparsity exceeds m; falling back to p = 1 (dense)");
        s = m0;
    }
    spec.m = kind == SketchKind::osnap ? round_up_to_multiple(m0, s) : m0;
    spec.p = static_cast<double>(s) / static_cast<double>(spec.m);
    spec.degree_k = kind == SketchKind::ose_ie ? 0 : default_degree_k(dd, eps, delta, static_cast<double>(s));
    return spec;
}

}  // namespace sose
