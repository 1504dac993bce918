#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sose/error.hpp"

namespace sose {

enum class SketchKind { osnap, ose_ie, less_ic, less_ie, gaussian_dense, rademacher_dense };

inline std::string_view to_string(SketchKind k) {
    switch (k) {
        case SketchKind::osnap: return "osnap";
        case SketchKind::ose_ie: return "ose-ie";
        case SketchKind::less_ic: return "less-ic";
        case SketchKind::less_ie: return "less-ie";
        case SketchKind::gaussian_dense: return "gaussian-dense";
        case SketchKind::rademacher_dense: return "rademacher-dense";
    }
    return "unknown";
}

inline SketchKind parse_sketch_kind(std::string_view s) {
    for (auto k : {SketchKind::osnap, SketchKind::ose_ie, SketchKind::less_ic, SketchKind::less_ie,
                   SketchKind::gaussian_dense, SketchKind::rademacher_dense}) {
        if (to_string(k) == s) return k;
    }
    throw ParameterError("unknown sketch kind '" + std::string(s) + "'");
}

inline bool is_dense_kind(SketchKind k) {
    return k == SketchKind::gaussian_dense || k == SketchKind::rademacher_dense;
}

/// Embedding parameters. p is the per-entry variance of the unscaled matrix;
/// s = p*m is the (expected) number of nonzeros per column.
struct SketchSpec {
    std::int64_t m = 1;
    std::int64_t n = 1;
    double p = 1.0;
    SketchKind kind = SketchKind::osnap;
    int degree_k = 2;  // 0 selects the fully independent stream
    std::uint64_t seed = 0;

    /// OSNAP spec with exactly s nonzeros per column.
    static SketchSpec osnap(std::int64_t m, std::int64_t n, std::int64_t s, int degree_k, std::uint64_t seed) {
        return {m, n, static_cast<double>(s) / static_cast<double>(m), SketchKind::osnap, degree_k, seed};
    }

    double pm() const noexcept { return p * static_cast<double>(m); }

    /// s = p*m rounded; exact for specs built through osnap().
    std::int64_t sparsity() const noexcept { return std::llround(pm()); }

    void validate() const {
        if (m < 1 || n < 1) throw ParameterError("sketch dimensions must be positive");
        if (!(p > 0.0 && p <= 1.0)) throw ParameterError("p must lie in (0, 1]");
        if (degree_k < 0) throw ParameterError("degree_k must be non-negative");
        if (kind == SketchKind::osnap) {
            const std::int64_t s = sparsity();
            if (s < 1) throw ParameterError("OSNAP sparsity s = p*m must be at least 1");
            if (std::abs(pm() - static_cast<double>(s)) > 1e-9 * static_cast<double>(m))
                throw ParameterError("OSNAP sparsity s = p*m must be an integer");
            if (m % s != 0)
                throw ParameterError("OSNAP sparsity s = " + std::to_string(s) + " does not divide m = " +
                                     std::to_string(m));
        }
    }
};

/// Extra header data carried by leverage-adapted sketches.
struct LessMetadata {
    double beta1 = 1.0;
    double beta2 = 1.0;
    std::uint64_t scores_digest = 0;
};

/// Column-compressed unscaled matrix S with the global scale 1/sqrt(pm);
/// the embedding is Pi = scale * S. Row indices are 0-based and strictly
/// increasing within a column.
struct SparseSketch {
    SketchSpec spec;
    std::vector<std::int64_t> col_ptr;  // size n + 1
    std::vector<std::int32_t> row_idx;  // size nnz
    std::vector<double> values;         // size nnz, unscaled
    double scale = 1.0;
    std::optional<LessMetadata> less;
    std::vector<std::string> warnings;  // not serialized

    std::int64_t rows() const noexcept { return spec.m; }
    std::int64_t cols() const noexcept { return spec.n; }
    std::int64_t nnz() const noexcept { return static_cast<std::int64_t>(values.size()); }
    std::int64_t column_nnz(std::int64_t j) const { return col_ptr[j + 1] - col_ptr[j]; }

    /// Sum of squared unscaled entries in column j.
    double column_energy(std::int64_t j) const {
        double e = 0.0;
        for (auto k = col_ptr[j]; k < col_ptr[j + 1]; ++k) e += values[k] * values[k];
        return e;
    }

    /// Structural checks shared by every kind: sizes agree, rows sorted, in
    /// range, and nonzero.
    void check_structure() const {
        if (static_cast<std::int64_t>(col_ptr.size()) != spec.n + 1 || col_ptr.front() != 0 ||
            col_ptr.back() != nnz() || row_idx.size() != values.size())
            throw ParameterError("sketch arrays are inconsistent");
        for (std::int64_t j = 0; j < spec.n; ++j) {
            if (col_ptr[j + 1] < col_ptr[j]) throw ParameterError("column pointers decrease");
            for (auto k = col_ptr[j]; k < col_ptr[j + 1]; ++k) {
                if (row_idx[k] < 0 || row_idx[k] >= spec.m) throw ParameterError("row index out of range");
                if (k > col_ptr[j] && row_idx[k] <= row_idx[k - 1])
                    throw ParameterError("row indices not strictly increasing");
                if (values[k] == 0.0) throw ParameterError("explicit zero stored in sketch");
            }
        }
    }

    friend bool operator==(const SparseSketch& a, const SparseSketch& b) {
        return a.spec.m == b.spec.m && a.spec.n == b.spec.n && a.spec.p == b.spec.p && a.spec.kind == b.spec.kind &&
               a.spec.degree_k == b.spec.degree_k && a.spec.seed == b.spec.seed && a.col_ptr == b.col_ptr &&
               a.row_idx == b.row_idx && a.values == b.values && a.scale == b.scale;
    }
};

/// Dense m x n baseline with unscaled entries of variance p.
struct DenseSketch {
    SketchSpec spec;
    Eigen::MatrixXd unscaled;
    double scale = 1.0;

    std::int64_t rows() const noexcept { return spec.m; }
    std::int64_t cols() const noexcept { return spec.n; }
};

using AnySketch = std::variant<SparseSketch, DenseSketch>;

inline const SketchSpec& spec_of(const AnySketch& s) {
    return std::visit([](const auto& x) -> const SketchSpec& { return x.spec; }, s);
}

inline double scale_of(const AnySketch& s) {
    return std::visit([](const auto& x) { return x.scale; }, s);
}

}  // namespace sose
