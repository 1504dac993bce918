#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "sose/apply.hpp"
#include "sose/error.hpp"
#include "sose/kwise.hpp"
#include "sose/oblivious.hpp"

namespace sose {

/// (beta1, beta2)-approximate leverage scores: ell_i / beta1 <= z_i and
/// sum_i z_i <= beta2 * d, with every z_i in [0, 1].
struct LeverageScores {
    Eigen::VectorXd z;
    double beta1 = 1.0;
    double beta2 = 1.0;

    std::int64_t size() const noexcept { return z.size(); }
};

/// FNV-1a over the raw bytes of (z, beta1, beta2).
inline std::uint64_t digest(const LeverageScores& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](double v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof v);
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    };
    for (Eigen::Index i = 0; i < s.z.size(); ++i) feed(s.z[i]);
    feed(s.beta1);
    feed(s.beta2);
    return h;
}

struct OrthonormalBasis {
    Eigen::MatrixXd q;  // n x d, orthonormal columns spanning range(A)
    Eigen::MatrixXd r;  // d x d upper triangular, A = q r
};

namespace detail {

inline std::ptrdiff_t numerical_rank(const Eigen::MatrixXd& r, std::int64_t n) {
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
    if (sv.size() == 0) return 0;
    const double tol = static_cast<double>(std::max<std::int64_t>(n, r.cols())) *
                       std::numeric_limits<double>::epsilon() * sv[0];
    return static_cast<std::ptrdiff_t>((sv.array() > tol).count());
}

}  // namespace detail

/// Thin QR of a full-column-rank A. Singular values at or below
/// max(n, d) * machine-epsilon * s_max count as zero.
inline OrthonormalBasis orthonormal_basis(const Eigen::MatrixXd& A) {
    const auto n = A.rows();
    const auto d = A.cols();
    if (d > n) throw RankError("matrix is wider than tall", n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    OrthonormalBasis out;
    out.r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    const auto rank = detail::numerical_rank(out.r, n);
    if (rank < d)
        throw RankError("matrix is rank deficient: numerical rank " + std::to_string(rank) + " < " +
                            std::to_string(d) + " columns",
                        rank);
    out.q = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
    return out;
}

/// Exact scores: squared row norms of an orthonormal basis of range(A).
inline LeverageScores exact_leverage(const Eigen::MatrixXd& A) {
    const OrthonormalBasis basis = orthonormal_basis(A);
    LeverageScores out;
    out.z = basis.q.rowwise().squaredNorm().cwiseMin(1.0);
    return out;
}

inline LeverageScores exact_leverage(const TallMatrix& A) { return exact_leverage(A.to_dense()); }

struct ApproxLeverageOptions {
    std::uint64_t seed = 0;
    /// Distortion assumed for the preconditioning sketch.
    double sketch_eps = 0.5;
    /// Failure probability budget for the row-norm estimates.
    double estimate_delta = 0.01;
    /// Multiplier turning unbiased estimates into one-sided ones.
    double safety = 2.0;
    int threads = 1;
};

struct ApproxLeverageInfo {
    std::int64_t sketch_rows = 0;
    std::int64_t test_vectors = 0;
    int attempts = 0;
};

/// Number of Gaussian test vectors for a given gamma: ceil(2 / gamma).
inline std::int64_t leverage_test_vectors(double gamma) {
    return static_cast<std::int64_t>(std::ceil(2.0 / gamma));
}

/// Declared beta1 for k test vectors on n rows.
///
/// With k Gaussian test vectors, P(chi2_k / k < t) <= (e t)^{k/2}; choosing
/// t = (delta0 / n)^{2/k} / e makes every row estimate at least t times its
/// target with probability 1 - delta0. The preconditioner costs a further
/// (1 + eps0)^2 and the safety multiplier buys back a factor `safety`.
inline double declared_beta1(std::int64_t n, std::int64_t k, const ApproxLeverageOptions& opt) {
    const double t = std::pow(opt.estimate_delta / static_cast<double>(n), 2.0 / static_cast<double>(k)) /
                     std::numbers::e;
    return std::max(1.0, (1.0 + opt.sketch_eps) * (1.0 + opt.sketch_eps) / (opt.safety * t));
}

/// Coarse scores with beta1 = O(n^gamma), beta2 = O(1).
///
/// 1. Sketch A with an OSNAP of m0 = O(d log d) rows and take R from a QR
///    factorization of the sketch (retrying with a fresh seed up to three
///    times if R is numerically singular).
/// 2. Estimate ||e_i^T A R^{-1}||^2 as ||e_i^T A R^{-1} G||^2 / k for a
///    d x k Gaussian G, k = ceil(2 / gamma).
/// 3. Inflate by `safety`, clamp to [0, 1]. beta2 is the measured
///    sum(z) / d.
template <class Matrix>
LeverageScores approx_leverage(const Matrix& A, double gamma, const ApproxLeverageOptions& opt = {},
                               ApproxLeverageInfo* info = nullptr) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in (0, 1)");
    const std::int64_t n = A.rows();
    const std::int64_t d = A.cols();
    if (d < 1 || d > n) throw RankError("need 1 <= d <= n for leverage scores", 0);

    const std::int64_t s = std::min<std::int64_t>(8, std::max<std::int64_t>(1, d));
    const auto target = static_cast<std::int64_t>(std::ceil(6.0 * static_cast<double>(d) * std::log(2.0 * static_cast<double>(d))));
    const std::int64_t m0 = round_up_to_multiple(std::max<std::int64_t>(target, 2 * d), s);
    const std::int64_t k = leverage_test_vectors(gamma);

    Eigen::MatrixXd r;
    int attempt = 0;
    for (;; ++attempt) {
        Eigen::MatrixXd sketched;
        if (m0 >= n) {
            if constexpr (std::is_same_v<Matrix, TallMatrix>)
                sketched = A.to_dense();
            else
                sketched = A;
        } else {
            const SketchSpec spec = SketchSpec::osnap(m0, n, s, 16, mix_seed(opt.seed, 1000 + static_cast<std::uint64_t>(attempt)));
            sketched = apply(build_osnap(spec, family_for(spec), opt.threads), A, opt.threads);
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(sketched);
        r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
        const auto rank = detail::numerical_rank(r, n);
        if (rank == d) break;
        if (attempt + 1 >= 3 || m0 >= n)
            throw RankError("sketched matrix is rank deficient: numerical rank " + std::to_string(rank) + " < " +
                                std::to_string(d),
                            rank);
    }

    // W = R^{-1} G, then row norms of A W.
    const KWiseFamily gauss = KWiseFamily::fully_independent(mix_seed(opt.seed, 2000));
    Eigen::MatrixXd g(d, k);
    for (std::int64_t c = 0; c < k; ++c)
        for (std::int64_t i = 0; i < d; ++i) {
            const auto t = static_cast<std::uint64_t>(c * d + i);
            g(i, c) = std::sqrt(-2.0 * std::log(gauss.uniform01_at(2 * t))) *
                      std::cos(2.0 * std::numbers::pi * gauss.uniform01_at(2 * t + 1));
        }
    const Eigen::MatrixXd w = r.triangularView<Eigen::Upper>().solve(g);
    Eigen::MatrixXd aw;
    if constexpr (std::is_same_v<Matrix, TallMatrix>) {
        aw = A.is_sparse() ? Eigen::MatrixXd(A.sparse() * w) : Eigen::MatrixXd(A.dense() * w);
    } else {
        aw = A * w;
    }

    LeverageScores out;
    out.z = (opt.safety / static_cast<double>(k) * aw.rowwise().squaredNorm()).cwiseMin(1.0);
    out.beta1 = declared_beta1(n, k, opt);
    out.beta2 = std::max(1.0, out.z.sum() / static_cast<double>(d));
    if (info) *info = {m0, k, attempt + 1};
    return out;
}

struct ScoreValidation {
    bool pass = false;
    bool lower_bound_ok = false;
    bool sum_bound_ok = false;
    /// min_i (z_i - ell_i / beta1); negative when the lower bound fails.
    double worst_lower_margin = 0.0;
    /// sum(z) / (beta2 d); at most 1 when the sum bound holds.
    double sum_ratio = 0.0;
    /// Smallest beta1 the scores would satisfy: max_i ell_i / z_i.
    double measured_beta1 = 0.0;
    double measured_beta2 = 0.0;
    std::vector<std::int64_t> violating;
};

/// Checks the two defining inequalities against exact scores.
inline ScoreValidation validate_scores(const Eigen::MatrixXd& A, const LeverageScores& scores) {
    if (scores.size() != A.rows()) throw DimensionError("score vector length differs from row count");
    const LeverageScores exact = exact_leverage(A);
    const auto d = static_cast<double>(A.cols());
    ScoreValidation v;
    v.worst_lower_margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < scores.z.size(); ++i) {
        const double need = exact.z[i] / scores.beta1;
        const double margin = scores.z[i] - need;
        v.worst_lower_margin = std::min(v.worst_lower_margin, margin);
        // Relative slack absorbs rounding in the exact scores themselves.
        if (margin < -1e-12 * std::max(1.0, need)) v.violating.push_back(i);
        // Rows with numerically zero leverage impose no constraint.
        if (exact.z[i] > 1e-12)
            v.measured_beta1 = std::max(v.measured_beta1, scores.z[i] > 0.0 ? exact.z[i] / scores.z[i]
                                                                          : std::numeric_limits<double>::infinity());
    }
    v.measured_beta2 = scores.z.sum() / d;
    v.sum_ratio = scores.z.sum() / (scores.beta2 * d);
    v.lower_bound_ok = v.violating.empty();
    v.sum_bound_ok = v.sum_ratio <= 1.0 + 1e-12;
    v.pass = v.lower_bound_ok && v.sum_bound_ok &&
             (scores.z.array() >= 0.0).all() && (scores.z.array() <= 1.0).all();
    return v;
}

}  // namespace sose
