#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sose/apply.hpp"
#include "sose/error.hpp"
#include "sose/kwise.hpp"
#include "sose/less.hpp"
#include "sose/oblivious.hpp"
#include "sose/parallel.hpp"
#include "sose/sketch.hpp"

namespace sose {

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct DistortionReport {
    double s_min = 0.0;
    double s_max = 0.0;
    /// ||X^T X - I|| (operator norm) for X = Pi U.
    double opnorm_err = 0.0;
    double eps_target = 0.0;
    bool pass = false;

    /// Largest deviation of a singular value from 1.
    double distortion() const noexcept { return std::max(1.0 - s_min, s_max - 1.0); }

    /// opnorm_err must dominate the squared-singular-value deviations.
    bool consistent() const noexcept {
        return opnorm_err >= std::max(std::abs(s_max * s_max - 1.0), std::abs(s_min * s_min - 1.0)) - 1e-12;
    }
};

/// Monte-Carlo estimate of a normalized trace moment, tr = Tr / d.
struct MomentProbe {
    int q = 1;
    std::int64_t trials = 0;
    double estimate = 0.0;
    double std_error = 0.0;
};

using SketchBuilder = std::function<AnySketch(std::uint64_t seed)>;
using SubspaceSampler = std::function<Eigen::MatrixXd(std::uint64_t seed)>;

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/// Pairwise (cascade) summation; result does not depend on thread count.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanAndError {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanAndError mean_and_error(const std::vector<double>& samples) {
    MeanAndError out;
    if (samples.empty()) return out;
    const auto n = static_cast<double>(samples.size());
    out.mean = pairwise_sum(samples) / n;
    if (samples.size() > 1) {
        std::vector<double> sq(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) sq[i] = (samples[i] - out.mean) * (samples[i] - out.mean);
        out.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    }
    return out;
}

/// Linear-interpolation quantile (type 7) of unsorted data.
inline double quantile(std::vector<double> data, double level) {
    if (data.empty()) return 0.0;
    std::sort(data.begin(), data.end());
    const double pos = level * static_cast<double>(data.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, data.size() - 1);
    return data[lo] + (pos - static_cast<double>(lo)) * (data[hi] - data[lo]);
}

/// Operator norm of a symmetric matrix.
inline double symmetric_opnorm(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
}

/// (1/d) Tr(A^{2q}) for symmetric A, through its eigenvalues.
inline double normalized_trace_power(const Eigen::MatrixXd& a, int q) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) sum += std::pow(ev[i], 2 * q);
    if (!std::isfinite(sum))
        throw NumericError("trace moment of order 2q = " + std::to_string(2 * q) +
                           " overflowed; use a smaller q");
    return sum / static_cast<double>(a.rows());
}

inline double orthonormality_error(const Eigen::MatrixXd& u) {
    return symmetric_opnorm(u.transpose() * u - Eigen::MatrixXd::Identity(u.cols(), u.cols()));
}

inline void require_orthonormal(const Eigen::MatrixXd& u) {
    const double err = orthonormality_error(u);
    if (!(err <= 1e-10))
        throw ParameterError("U is not orthonormal: ||U^T U - I|| = " + std::to_string(err));
}

// ---------------------------------------------------------------------------
// Subspace samplers
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd gaussian_matrix(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
    const KWiseFamily f = KWiseFamily::fully_independent(seed);
    Eigen::MatrixXd g(rows, cols);
    for (std::int64_t j = 0; j < cols; ++j)
        for (std::int64_t i = 0; i < rows; ++i) {
            const auto t = static_cast<std::uint64_t>(j * rows + i);
            g(i, j) = std::sqrt(-2.0 * std::log(f.uniform01_at(2 * t))) *
                      std::cos(2.0 * std::numbers::pi * f.uniform01_at(2 * t + 1));
        }
    return g;
}

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& a) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    // Fix signs so the basis is a deterministic function of a.
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        if (qr.matrixQR()(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

/// Haar-distributed orthonormal n x d basis (orthonormalized Gaussian).
inline Eigen::MatrixXd haar_subspace(std::int64_t n, std::int64_t d, std::uint64_t seed) {
    return orthonormalize(gaussian_matrix(n, d, seed));
}

/// Span of the coordinate vectors e_offset, ..., e_{offset+d-1}.
inline Eigen::MatrixXd coordinate_subspace(std::int64_t n, std::int64_t d, std::int64_t offset = 0) {
    if (offset < 0 || offset + d > n) throw ParameterError("coordinate subspace does not fit");
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, d);
    for (std::int64_t k = 0; k < d; ++k) u(offset + k, k) = 1.0;
    return u;
}

/// e_0 plus a random (d-1)-dimensional complement orthogonal to it.
inline Eigen::MatrixXd spiked_subspace(std::int64_t n, std::int64_t d, std::uint64_t seed) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, d);
    u(0, 0) = 1.0;
    if (d > 1) {
        Eigen::MatrixXd g = gaussian_matrix(n, d - 1, seed);
        g.row(0).setZero();
        u.rightCols(d - 1) = orthonormalize(g);
    }
    return u;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// Fresh oblivious sketch per seed, all other parameters from `spec`.
inline SketchBuilder oblivious_builder(SketchSpec spec) {
    return [spec](std::uint64_t seed) mutable {
        spec.seed = seed;
        return build_oblivious(spec);
    };
}

inline SketchBuilder less_ic_builder(LessIcSpec spec) {
    return [spec](std::uint64_t seed) mutable -> AnySketch {
        spec.seed = seed;
        const KWiseFamily f =
            spec.degree_k == 0 ? KWiseFamily::fully_independent(seed) : KWiseFamily::create(seed, spec.degree_k);
        return build_less_ic(spec, f);
    };
}

inline SketchBuilder less_ie_builder(LeverageScores scores, double p, std::int64_t m, int degree_k = 0) {
    return [scores = std::move(scores), p, m, degree_k](std::uint64_t seed) -> AnySketch {
        const KWiseFamily f =
            degree_k == 0 ? KWiseFamily::fully_independent(seed) : KWiseFamily::create(seed, degree_k);
        return build_less_ie(scores, p, m, f);
    };
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

/// Distortion report for an already-formed product X = Pi U.
inline DistortionReport distortion_of_product(const Eigen::MatrixXd& x, double eps_target) {
    DistortionReport r;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(x).singularValues();
    r.s_max = sv.size() ? sv.maxCoeff() : 0.0;
    r.s_min = sv.size() ? sv.minCoeff() : 0.0;
    r.opnorm_err = symmetric_opnorm(x.transpose() * x - Eigen::MatrixXd::Identity(x.cols(), x.cols()));
    r.eps_target = eps_target;
    r.pass = (1.0 - eps_target <= r.s_min) && (r.s_max <= 1.0 + eps_target);
    return r;
}

/// Extreme singular values of Pi U for certified-orthonormal U.
template <class Sketch>
DistortionReport distortion(const Sketch& sketch, const Eigen::MatrixXd& u, double eps_target, int threads = 1) {
    require_orthonormal(u);
    return distortion_of_product(sose::apply(sketch, u, threads), eps_target);
}

struct TrialReport {
    std::int64_t trials = 0;
    std::int64_t failures = 0;
    double failure_fraction = 0.0;
    double eps = 0.0;
    double mean_distortion = 0.0;
    double q50 = 0.0;
    double q90 = 0.0;
    double q95 = 0.0;
    double q99 = 0.0;
    double max_distortion = 0.0;
};

/// Builds a fresh sketch and subspace per trial (trial i uses
/// mix_seed(seed, i)) and counts violations of the eps band.
inline TrialReport embedding_trial(const SketchBuilder& builder, const SubspaceSampler& sampler, std::int64_t trials,
                                   double eps, std::uint64_t seed, int threads = 1) {
    if (trials < 1) throw ParameterError("trials must be at least 1");
    std::vector<double> dist(static_cast<std::size_t>(trials));
    std::vector<char> fail(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t i) {
        const std::uint64_t ts = mix_seed(seed, i);
        const Eigen::MatrixXd u = sampler(mix_seed(ts, 2));
        const AnySketch sk = builder(mix_seed(ts, 1));
        const DistortionReport r = distortion_of_product(sose::apply(sk, u), eps);
        dist[i] = r.distortion();
        fail[i] = r.pass ? 0 : 1;
    });
    TrialReport rep;
    rep.trials = trials;
    rep.eps = eps;
    for (char f : fail) rep.failures += f;
    rep.failure_fraction = static_cast<double>(rep.failures) / static_cast<double>(trials);
    rep.mean_distortion = mean_and_error(dist).mean;
    rep.q50 = quantile(dist, 0.50);
    rep.q90 = quantile(dist, 0.90);
    rep.q95 = quantile(dist, 0.95);
    rep.q99 = quantile(dist, 0.99);
    rep.max_distortion = *std::max_element(dist.begin(), dist.end());
    return rep;
}

namespace detail {

inline void check_moment_order(int q) {
    if (q < 1 || q > 32) throw ParameterError("moment order q must lie in [1, 32]");
}

template <class Sample>
MomentProbe run_probe(int q, std::int64_t trials, int threads, Sample&& sample) {
    check_moment_order(q);
    if (trials < 1) throw ParameterError("trials must be at least 1");
    std::vector<double> v(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t i) { v[i] = sample(i); });
    const MeanAndError me = mean_and_error(v);
    return {q, trials, me.mean, me.std_error};
}

}  // namespace detail

/// E tr((X^T X - I)^{2q}) with X = Pi U over fresh sketches.
inline MomentProbe trace_moment(const SketchBuilder& builder, const Eigen::MatrixXd& u, int q, std::int64_t trials,
                                std::uint64_t seed, int threads = 1) {
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(u.cols(), u.cols());
    return detail::run_probe(q, trials, threads, [&](std::size_t i) {
        const Eigen::MatrixXd x = sose::apply(builder(mix_seed(seed, i)), u);
        return normalized_trace_power(x.transpose() * x - id, q);
    });
}

/// E tr(Gamma^{2q}) for Gamma = (S1 U)^T (S2 U) + (S2 U)^T (S1 U) with S1, S2
/// independent unscaled copies.
inline MomentProbe decoupled_gamma_moment(const SketchBuilder& builder, const Eigen::MatrixXd& u, int q,
                                          std::int64_t trials, std::uint64_t seed, int threads = 1) {
    return detail::run_probe(q, trials, threads, [&](std::size_t i) {
        const std::uint64_t ts = mix_seed(seed, i);
        const Eigen::MatrixXd a = apply_unscaled(builder(mix_seed(ts, 1)), u);
        const Eigen::MatrixXd b = apply_unscaled(builder(mix_seed(ts, 2)), u);
        const Eigen::MatrixXd ab = a.transpose() * b;
        return normalized_trace_power(ab + ab.transpose(), q);
    });
}

/// Closed-form E tr(Gamma^2) = 2 p^2 m (d + 1) for uncorrelated variance-p entries.
inline double second_moment_gamma(double p, std::int64_t m, std::int64_t d) {
    return 2.0 * p * p * static_cast<double>(m) * static_cast<double>(d + 1);
}

struct DiagonalSplit {
    Eigen::MatrixXd diag;     // sum_j (sum_i S_ij^2 - pm) u_j u_j^T
    Eigen::MatrixXd offdiag;  // (SU)^T (SU) - pm I - diag
    Eigen::MatrixXd gram;     // (SU)^T (SU)
    double pm = 0.0;
    double diag_norm = 0.0;
    double offdiag_norm = 0.0;
};

/// Splits the unscaled embedding error into column-energy and cross terms.
inline DiagonalSplit diagonal_offdiagonal_split(const SparseSketch& sk, const Eigen::MatrixXd& u) {
    if (u.rows() != sk.cols()) throw DimensionError("U has the wrong number of rows");
    DiagonalSplit out;
    out.pm = sk.spec.pm();
    Eigen::VectorXd excess(sk.cols());
    for (std::int64_t j = 0; j < sk.cols(); ++j) excess[j] = sk.column_energy(j) - out.pm;
    out.diag = u.transpose() * excess.asDiagonal() * u;
    const Eigen::MatrixXd su = apply_unscaled(sk, u);
    out.gram = su.transpose() * su;
    out.offdiag = out.gram - out.pm * Eigen::MatrixXd::Identity(u.cols(), u.cols()) - out.diag;
    out.diag_norm = symmetric_opnorm(out.diag);
    out.offdiag_norm = symmetric_opnorm(out.offdiag);
    return out;
}

struct GaussianBand {
    double lower = 0.0;
    double upper = 0.0;
    /// Guaranteed probability that all singular values fall in the band.
    double probability = 0.0;
    double tail = 0.0;  // 2 exp(-t^2 / 2)
};

/// Band [1 - sqrt(d/m) - t/sqrt(m), 1 + sqrt(d/m) + t/sqrt(m)] for the
/// singular values of G / sqrt(m), G an m x d standard Gaussian matrix.
inline GaussianBand gaussian_reference(std::int64_t m, std::int64_t d, double t) {
    if (m <= d) throw ParameterError("gaussian_reference needs m > d");
    if (t < 0) throw ParameterError("t must be non-negative");
    const double r = std::sqrt(static_cast<double>(d) / static_cast<double>(m));
    const double w = t / std::sqrt(static_cast<double>(m));
    GaussianBand b;
    b.lower = 1.0 - r - w;
    b.upper = 1.0 + r + w;
    b.tail = 2.0 * std::exp(-t * t / 2.0);
    b.probability = std::max(0.0, 1.0 - b.tail);
    return b;
}

}  // namespace sose
