#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sose/calibration.hpp"
#include "sose/error.hpp"
#include "sose/kwise.hpp"
#include "sose/leverage.hpp"
#include "sose/oblivious.hpp"
#include "sose/sketch.hpp"

namespace sose {

/// LESS-IC parameters. Column j is cut into s_j = ceil(m / b_j) blocks of
/// height b_j = max(floor(1 / (beta1 p z_j)), 1); the last block is truncated
/// at row m.
struct LessIcSpec {
    std::int64_t m = 1;
    double p = 0.5;
    LeverageScores scores;
    int degree_k = 2;
    std::uint64_t seed = 0;

    std::int64_t n() const noexcept { return scores.size(); }
    double pm() const noexcept { return p * static_cast<double>(m); }

    /// b_j, capped at m (any larger value yields the same single block).
    std::int64_t block_width(std::int64_t j) const {
        const double x = scores.beta1 * p * scores.z[j];
        if (!(x > 0.0)) return m;
        const double b = std::floor(1.0 / x);
        if (b >= static_cast<double>(m)) return m;
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(b));
    }

    std::int64_t subcolumns(std::int64_t j) const {
        const std::int64_t b = block_width(j);
        return (m + b - 1) / b;
    }

    void validate() const {
        if (m < 1) throw ParameterError("m must be positive");
        if (p >= 1.0) throw ParameterError("LESS-IC needs p < 1; use a dense embedding (p = 1) instead");
        if (!(p > 0.0)) throw ParameterError("p must be positive");
        if (pm() < 1.0 - 1e-12) throw ParameterError("LESS-IC needs p*m >= 1");
        if (scores.size() < 1) throw ParameterError("empty leverage score vector");
        if (scores.beta1 < 1.0 || scores.beta2 < 1.0) throw ParameterError("beta1 and beta2 must be at least 1");
        if ((scores.z.array() < 0.0).any() || (scores.z.array() > 1.0).any())
            throw ParameterError("leverage scores must lie in [0, 1]");
        if (degree_k < 0) throw ParameterError("degree_k must be non-negative");
    }
};

/// One subcolumn: rows [begin, end) (0-based) and its weight sqrt(p * width).
struct Subcolumn {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    double alpha = 0.0;

    std::int64_t width() const noexcept { return end - begin; }
};

inline std::vector<Subcolumn> subcolumn_layout(const LessIcSpec& spec, std::int64_t j) {
    if (j < 0 || j >= spec.n()) throw RangeError("column index out of range");
    const std::int64_t b = spec.block_width(j);
    const std::int64_t s = spec.subcolumns(j);
    std::vector<Subcolumn> out;
    out.reserve(static_cast<std::size_t>(s));
    for (std::int64_t g = 0; g < s; ++g) {
        const std::int64_t begin = b * g;
        const std::int64_t end = std::min(b * (g + 1), spec.m);
        out.push_back({begin, end, std::sqrt(spec.p * static_cast<double>(end - begin))});
    }
    return out;
}

/// Upper bound n + 4 beta1 beta2 p m d on the nonzeros of a LESS-IC sketch.
inline double less_nnz_bound(std::int64_t n, double beta1, double beta2, double pm, std::int64_t d) {
    return static_cast<double>(n) + 4.0 * beta1 * beta2 * pm * static_cast<double>(d);
}

/// LESS-IC: column j holds one nonzero per subcolumn, at a uniform row of the
/// block, with value +-alpha. Slots are numbered consecutively across columns.
inline SparseSketch build_less_ic(const LessIcSpec& spec, const KWiseFamily& family, int threads = 1) {
    spec.validate();
    const std::int64_t n = spec.n();
    SparseSketch out;
    out.spec = {spec.m, n, spec.p, SketchKind::less_ic, spec.degree_k, spec.seed};
    out.scale = 1.0 / std::sqrt(spec.pm());
    out.less = LessMetadata{spec.scores.beta1, spec.scores.beta2, digest(spec.scores)};
    out.col_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::int64_t j = 0; j < n; ++j) out.col_ptr[j + 1] = out.col_ptr[j] + spec.subcolumns(j);
    detail::check_index_budget(family, static_cast<double>(out.col_ptr.back()));
    out.row_idx.resize(static_cast<std::size_t>(out.col_ptr.back()));
    out.values.resize(static_cast<std::size_t>(out.col_ptr.back()));
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t jj) {
        const auto j = static_cast<std::int64_t>(jj);
        const std::int64_t b = spec.block_width(j);
        const std::int64_t s = out.col_ptr[jj + 1] - out.col_ptr[jj];
        for (std::int64_t g = 0; g < s; ++g) {
            const auto slot = static_cast<std::uint64_t>(out.col_ptr[jj] + g);
            const std::int64_t begin = b * g;
            const std::int64_t width = std::min(b * (g + 1), spec.m) - begin;
            const auto offset = family.scale_to(family.evaluate_unchecked(position_index(slot)),
                                                static_cast<std::uint64_t>(width));
            const double alpha = std::sqrt(spec.p * static_cast<double>(width));
            out.row_idx[slot] = static_cast<std::int32_t>(begin + static_cast<std::int64_t>(offset));
            out.values[slot] = (family.evaluate_unchecked(sign_index(slot)) & 1) ? -alpha : alpha;
        }
    });
    return out;
}

/// LESS-IE: entry (i, j) is nonzero with probability beta1 z_j p, valued
/// +-1/sqrt(beta1 z_j). Probabilities above 1 are clamped to 1 and reported
/// in `warnings`.
inline SparseSketch build_less_ie(const LeverageScores& scores, double p, std::int64_t m, const KWiseFamily& family,
                                  int threads = 1) {
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("p must lie in (0, 1]");
    if (m < 1) throw ParameterError("m must be positive");
    const std::int64_t n = scores.size();
    SparseSketch out = detail::empty_sketch(
        {m, n, p, SketchKind::less_ie, family.degree_k(), family.seed()});
    out.less = LessMetadata{scores.beta1, scores.beta2, digest(scores)};
    detail::check_index_budget(family, static_cast<double>(m) * static_cast<double>(n));

    std::int64_t clamped = 0;
    for (std::int64_t j = 0; j < n; ++j)
        if (scores.beta1 * scores.z[j] * p > 1.0) ++clamped;
    if (clamped > 0)
        out.warnings.push_back(std::to_string(clamped) +
                               " column(s) had beta1 * z_j * p > 1; their keep probability was clamped to 1");

    auto column_params = [&](std::int64_t j) {
        const double w = scores.beta1 * scores.z[j];
        return std::pair{std::min(1.0, w * p), w > 0.0 ? 1.0 / std::sqrt(w) : 0.0};
    };
    if (family.independence() == Independence::full) {
        detail::fill_columns(out, threads, [&](std::int64_t j, auto& rows, auto& vals) {
            const auto [prob, mag] = column_params(j);
            if (prob <= 0.0) return;
            SplitMix64Engine rng(family.substream_seed(static_cast<std::uint64_t>(j)));
            const std::int64_t count = prob >= 1.0 ? m : std::binomial_distribution<std::int64_t>(m, prob)(rng);
            detail::sample_subset(m, count, rng, rows);
            vals.resize(rows.size());
            for (auto& v : vals) v = (rng() >> 63) ? -mag : mag;
        });
    } else {
        detail::fill_columns(out, threads, [&](std::int64_t j, auto& rows, auto& vals) {
            const auto [prob, mag] = column_params(j);
            if (prob <= 0.0) return;
            for (std::int64_t i = 0; i < m; ++i) {
                const auto slot = static_cast<std::uint64_t>(j * m + i);
                if (!family.bernoulli_at(position_index(slot), prob)) continue;
                rows.push_back(static_cast<std::int32_t>(i));
                vals.push_back(family.rademacher_at(sign_index(slot)) * mag);
            }
        });
    }
    return out;
}

/// Default LESS-IC parameters:
///   m  = ceil(C_mL ((d + ln^2(d/delta)) / eps^2 + ln^3(d/delta) / eps))
///   pm = ceil(C_L max(L^2.5 / eps, L^3)),  L = ln(d / (eps delta)), capped at m
///   K  = 8 ceil(ln max(d / (eps delta), pm))
/// When pm reaches m the returned spec has p = 1 and a warning is recorded;
/// build_less_ic rejects it, and callers fall back to a dense embedding.
inline LessIcSpec less_default_parameters(std::int64_t d, double eps, double delta, const LeverageScores& scores,
                                          std::uint64_t seed = 0, const Calibration& cal = kDefaultCalibration,
                                          std::vector<std::string>* warnings = nullptr) {
    if (!(eps > 0 && eps < 1) || !(delta > 0 && delta < 1)) throw ParameterError("eps and delta must lie in (0, 1)");
    if (d < 1) throw ParameterError("d must be positive");
    const double dd = static_cast<double>(d);
    const double ld = std::log(dd / delta);
    const double L = std::log(dd / (eps * delta));
    const auto m = static_cast<std::int64_t>(
        std::ceil(cal.c_m_less * ((dd + ld * ld) / (eps * eps) + ld * ld * ld / eps)));
    auto pm = static_cast<std::int64_t>(std::ceil(cal.c_l * std::max(std::pow(L, 2.5) / eps, L * L * L)));
    pm = std::max<std::int64_t>(pm, 1);
    if (pm >= m) {
        if (warnings) warnings->push_back("required p*m reaches m; falling back to p = 1 (dense)");
        pm = m;
    }
    LessIcSpec spec;
    spec.m = m;
    spec.p = static_cast<double>(pm) / static_cast<double>(m);
    spec.scores = scores;
    spec.degree_k = default_degree_k(dd, eps, delta, static_cast<double>(pm));
    spec.seed = seed;
    return spec;
}

}  // namespace sose
