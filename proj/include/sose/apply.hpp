#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sose/error.hpp"
#include "sose/parallel.hpp"
#include "sose/sketch.hpp"

namespace sose {

using DenseRows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

/// Tall n x d input, stored densely (row-major) or as sorted sparse rows.
class TallMatrix {
public:
    TallMatrix() = default;
    TallMatrix(DenseRows dense) : storage_(std::move(dense)) {}  // NOLINT(google-explicit-constructor)
    TallMatrix(SparseRows sparse) : storage_(std::move(sparse)) {  // NOLINT(google-explicit-constructor)
        std::get<SparseRows>(storage_).makeCompressed();
    }
    template <class Derived>
    static TallMatrix from_dense(const Eigen::MatrixBase<Derived>& m) {
        return TallMatrix(DenseRows(m));
    }

    std::int64_t rows() const {
        return std::visit([](const auto& s) { return static_cast<std::int64_t>(s.rows()); }, storage_);
    }
    std::int64_t cols() const {
        return std::visit([](const auto& s) { return static_cast<std::int64_t>(s.cols()); }, storage_);
    }
    bool is_sparse() const noexcept { return std::holds_alternative<SparseRows>(storage_); }
    const DenseRows& dense() const { return std::get<DenseRows>(storage_); }
    const SparseRows& sparse() const { return std::get<SparseRows>(storage_); }

    std::int64_t nnz() const {
        if (is_sparse()) return static_cast<std::int64_t>(sparse().nonZeros());
        return static_cast<std::int64_t>((dense().array() != 0.0).count());
    }

    Eigen::MatrixXd to_dense() const {
        if (is_sparse()) return Eigen::MatrixXd(sparse());
        return Eigen::MatrixXd(dense());
    }

    bool all_finite() const {
        if (is_sparse()) {
            const auto& s = sparse();
            for (Eigen::Index k = 0; k < s.nonZeros(); ++k)
                if (!std::isfinite(s.valuePtr()[k])) return false;
            return true;
        }
        return dense().allFinite();
    }

private:
    std::variant<DenseRows, SparseRows> storage_;
};

namespace detail {

inline void check_apply_dims(const SparseSketch& sk, std::int64_t n) {
    if (sk.cols() != n)
        throw DimensionError("sketch has " + std::to_string(sk.cols()) + " columns but input has " +
                             std::to_string(n) + " rows");
}

/// Scatters row i of the input into the rows of the output named by sketch
/// column i. `entries(i, emit)` calls emit(col, value) for each nonzero of
/// input row i. Threads own disjoint output columns and every entry is summed
/// in input-row order, so the bits do not depend on the thread count.
template <class RowEntries>
Eigen::MatrixXd scatter_rows(const SparseSketch& sk, std::int64_t d, int threads, double final_scale,
                             RowEntries&& entries) {
    const std::int64_t n = sk.cols();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(sk.rows(), d);
    parallel_chunks(static_cast<std::size_t>(d), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        const auto c0 = static_cast<std::int64_t>(begin);
        const auto c1 = static_cast<std::int64_t>(end);
        for (std::int64_t i = 0; i < n; ++i) {
            const auto lo = sk.col_ptr[i];
            const auto hi = sk.col_ptr[i + 1];
            if (lo == hi) continue;
            entries(i, [&](std::int64_t col, double a) {
                if (col < c0 || col >= c1) return;
                for (auto k = lo; k < hi; ++k) out(sk.row_idx[k], col) += sk.values[k] * a;
            });
        }
    });
    out *= final_scale;
    return out;
}

}  // namespace detail

/// Pi * A for a dense Eigen operand, touching each input row once per
/// nonzero of the matching sketch column.
template <class Derived>
Eigen::MatrixXd apply(const SparseSketch& sk, const Eigen::MatrixBase<Derived>& A, int threads = 1) {
    detail::check_apply_dims(sk, A.rows());
    const auto d = static_cast<std::int64_t>(A.cols());
    return detail::scatter_rows(sk, d, threads, sk.scale, [&](std::int64_t i, auto&& emit) {
        for (std::int64_t c = 0; c < d; ++c) {
            const double a = A(i, c);
            if (a != 0.0) emit(c, a);
        }
    });
}

/// Pi * A for sparse rows; cost proportional to sum_i nnz(row i) * nnz(col i of S).
inline Eigen::MatrixXd apply(const SparseSketch& sk, const SparseRows& A, int threads = 1) {
    detail::check_apply_dims(sk, A.rows());
    return detail::scatter_rows(sk, A.cols(), threads, sk.scale, [&](std::int64_t i, auto&& emit) {
        for (SparseRows::InnerIterator it(A, i); it; ++it) emit(it.col(), it.value());
    });
}

inline Eigen::MatrixXd apply(const SparseSketch& sk, const TallMatrix& A, int threads = 1) {
    if (A.is_sparse()) return apply(sk, A.sparse(), threads);
    return apply(sk, A.dense(), threads);
}

template <class Derived>
Eigen::MatrixXd apply(const DenseSketch& sk, const Eigen::MatrixBase<Derived>& A, int /*threads*/ = 1) {
    if (sk.cols() != A.rows()) throw DimensionError("sketch and input dimensions differ");
    return sk.scale * (sk.unscaled * A);
}

inline Eigen::MatrixXd apply(const DenseSketch& sk, const TallMatrix& A, int threads = 1) {
    if (A.is_sparse()) {
        if (sk.cols() != A.rows()) throw DimensionError("sketch and input dimensions differ");
        return sk.scale * (sk.unscaled * A.sparse());
    }
    return apply(sk, A.dense(), threads);
}

// AnySketch is a std::variant, so unqualified calls would also find
// std::apply through ADL; call these as sose::apply.
template <class S, class Operand>
    requires std::same_as<S, AnySketch>
Eigen::MatrixXd apply(const S& sk, const Operand& A, int threads = 1) {
    return std::visit([&](const auto& s) { return sose::apply(s, A, threads); }, sk);
}

/// S * A with the unscaled sketch entries (no 1/sqrt(pm) factor).
template <class Derived>
Eigen::MatrixXd apply_unscaled(const SparseSketch& sk, const Eigen::MatrixBase<Derived>& A, int threads = 1) {
    detail::check_apply_dims(sk, A.rows());
    const auto d = static_cast<std::int64_t>(A.cols());
    return detail::scatter_rows(sk, d, threads, 1.0, [&](std::int64_t i, auto&& emit) {
        for (std::int64_t c = 0; c < d; ++c) {
            const double a = A(i, c);
            if (a != 0.0) emit(c, a);
        }
    });
}

template <class Derived>
Eigen::MatrixXd apply_unscaled(const DenseSketch& sk, const Eigen::MatrixBase<Derived>& A, int /*threads*/ = 1) {
    if (sk.cols() != A.rows()) throw DimensionError("sketch and input dimensions differ");
    return sk.unscaled * A;
}

template <class S, class Derived>
    requires std::same_as<S, AnySketch>
Eigen::MatrixXd apply_unscaled(const S& sk, const Eigen::MatrixBase<Derived>& A, int threads = 1) {
    return std::visit([&](const auto& s) { return sose::apply_unscaled(s, A, threads); }, sk);
}

/// Pi * x; cost O(s * nnz(x)).
inline Eigen::VectorXd apply_to_vector(const SparseSketch& sk, const Eigen::VectorXd& x) {
    detail::check_apply_dims(sk, x.size());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(sk.rows());
    for (std::int64_t j = 0; j < sk.cols(); ++j) {
        const double a = x[j];
        if (a == 0.0) continue;
        for (auto k = sk.col_ptr[j]; k < sk.col_ptr[j + 1]; ++k) y[sk.row_idx[k]] += sk.values[k] * a;
    }
    y *= sk.scale;
    return y;
}

inline constexpr std::int64_t kDefaultMaterializeCap = std::int64_t{1} << 26;

/// Dense m x n copy of Pi (testing oracle).
inline Eigen::MatrixXd materialize_dense(const SparseSketch& sk, std::int64_t max_entries = kDefaultMaterializeCap) {
    if (sk.rows() * sk.cols() > max_entries)
        throw ParameterError("materializing a " + std::to_string(sk.rows()) + " x " + std::to_string(sk.cols()) +
                             " sketch exceeds the memory cap of " + std::to_string(max_entries) + " entries");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(sk.rows(), sk.cols());
    for (std::int64_t j = 0; j < sk.cols(); ++j)
        for (auto k = sk.col_ptr[j]; k < sk.col_ptr[j + 1]; ++k) out(sk.row_idx[k], j) = sk.scale * sk.values[k];
    return out;
}

/// Inverse of materialize_dense for a known spec and scale.
inline SparseSketch sparsify(const Eigen::MatrixXd& dense, const SketchSpec& spec, double scale) {
    if (dense.rows() != spec.m || dense.cols() != spec.n) throw DimensionError("dense matrix does not match spec");
    SparseSketch out;
    out.spec = spec;
    out.scale = scale;
    out.col_ptr.assign(static_cast<std::size_t>(spec.n) + 1, 0);
    for (std::int64_t j = 0; j < spec.n; ++j) {
        for (std::int64_t i = 0; i < spec.m; ++i) {
            if (dense(i, j) == 0.0) continue;
            out.row_idx.push_back(static_cast<std::int32_t>(i));
            out.values.push_back(dense(i, j) / scale);
        }
        out.col_ptr[static_cast<std::size_t>(j) + 1] = static_cast<std::int64_t>(out.values.size());
    }
    return out;
}

}  // namespace sose
