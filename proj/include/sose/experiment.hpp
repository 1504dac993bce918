#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sose/calibration.hpp"
#include "sose/diagnostics.hpp"
#include "sose/error.hpp"
#include "sose/kwise.hpp"
#include "sose/less.hpp"
#include "sose/leverage.hpp"
#include "sose/oblivious.hpp"
#include "sose/pipeline.hpp"
#include "sose/sketch.hpp"

namespace sose {

enum class SubspaceKind { haar, coordinate, spiked };

inline std::string_view to_string(SubspaceKind k) {
    switch (k) {
        case SubspaceKind::haar: return "haar";
        case SubspaceKind::coordinate: return "coordinate";
        case SubspaceKind::spiked: return "spiked";
    }
    return "?";
}

inline SubspaceKind parse_subspace_kind(std::string_view s) {
    if (s == "haar") return SubspaceKind::haar;
    if (s == "coordinate") return SubspaceKind::coordinate;
    if (s == "spiked") return SubspaceKind::spiked;
    throw ParameterError("unknown subspace kind '" + std::string(s) + "' (expected haar, coordinate or spiked)");
}

inline SubspaceSampler subspace_sampler(SubspaceKind kind, std::int64_t n, std::int64_t d) {
    switch (kind) {
        case SubspaceKind::haar: return [n, d](std::uint64_t seed) { return haar_subspace(n, d, seed); };
        case SubspaceKind::coordinate: return [n, d](std::uint64_t) { return coordinate_subspace(n, d); };
        case SubspaceKind::spiked: return [n, d](std::uint64_t seed) { return spiked_subspace(n, d, seed); };
    }
    throw ParameterError("unknown subspace kind");
}

/// Failure rates on a Haar-random and on a coordinate subspace.
struct WorstCaseReport {
    TrialReport haar;
    TrialReport coordinate;

    double worst_failure() const { return std::max(haar.failure_fraction, coordinate.failure_fraction); }
    double worst_q95() const { return std::max(haar.q95, coordinate.q95); }
};

inline WorstCaseReport worst_case_trials(const SketchBuilder& builder, std::int64_t n, std::int64_t d, double eps,
                                         std::int64_t trials, std::uint64_t seed, int threads = 1) {
    WorstCaseReport r;
    r.haar = embedding_trial(builder, subspace_sampler(SubspaceKind::haar, n, d), trials, eps, mix_seed(seed, 1),
                             threads);
    r.coordinate = embedding_trial(builder, subspace_sampler(SubspaceKind::coordinate, n, d), trials, eps,
                                   mix_seed(seed, 2), threads);
    return r;
}

// ---------------------------------------------------------------------------
// Minimal sparsity search
// ---------------------------------------------------------------------------

struct SparsityPoint {
    double eps = 0.0;
    std::int64_t m = 0;
    /// Smallest passing s (OSNAP) or p*m (OSE-IE).
    std::int64_t s = 0;
    bool found = false;
    WorstCaseReport trials;
    int evaluations = 0;
};

struct SparsitySearch {
    SketchKind kind = SketchKind::osnap;
    std::int64_t d = 16;
    std::int64_t n = 4096;
    double delta = 0.05;
    /// m = ceil(c_m (d + ln(1/delta)) / eps^2), the default oblivious rule.
    double c_m = kDefaultCalibration.c_m;
    std::int64_t trials = 200;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Spec used by the sparsity search for a given (m, s).
inline SketchSpec search_spec(const SparsitySearch& cfg, std::int64_t m, std::int64_t s, double eps) {
    if (cfg.kind == SketchKind::osnap) {
        const std::int64_t mm = round_up_to_multiple(m, s);
        return SketchSpec::osnap(mm, cfg.n, s, default_degree_k(static_cast<double>(cfg.d), eps, cfg.delta,
                                                                static_cast<double>(s)),
                                 0);
    }
    if (cfg.kind == SketchKind::ose_ie)
        return {m, cfg.n, static_cast<double>(s) / static_cast<double>(m), SketchKind::ose_ie, 0, 0};
    throw ParameterError("sparsity search supports osnap and ose-ie");
}

inline std::int64_t search_rows(const SparsitySearch& cfg, double eps) {
    return static_cast<std::int64_t>(
        std::ceil(cfg.c_m * (static_cast<double>(cfg.d) + std::log(1.0 / cfg.delta)) / (eps * eps)));
}

/// Smallest s with worst-case failure fraction <= delta on Haar and
/// coordinate subspaces at the default row count for eps. Doubles s until a pass, then
/// bisects between the last failure and the first pass; assumes the
/// failure rate is monotone in s.
inline SparsityPoint minimal_sparsity(const SparsitySearch& cfg, double eps) {
    SparsityPoint pt;
    pt.eps = eps;
    pt.m = search_rows(cfg, eps);
    const std::uint64_t seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(std::llround(1e6 * eps)));
    auto run = [&](std::int64_t s) {
        ++pt.evaluations;
        return worst_case_trials(oblivious_builder(search_spec(cfg, pt.m, s, eps)), cfg.n, cfg.d, eps, cfg.trials,
                                 seed, cfg.threads);
    };
    std::int64_t lo = 0;  // largest known failing s
    std::int64_t hi = 0;  // smallest known passing s
    WorstCaseReport best;
    for (std::int64_t s = 1;; s *= 2) {
        const std::int64_t cand = std::min(s, pt.m);
        WorstCaseReport r = run(cand);
        if (r.worst_failure() <= cfg.delta) {
            hi = cand;
            best = r;
            break;
        }
        lo = cand;
        if (cand == pt.m) break;
    }
    if (hi == 0) {
        pt.s = pt.m;
        return pt;
    }
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        WorstCaseReport r = run(mid);
        if (r.worst_failure() <= cfg.delta) {
            hi = mid;
            best = r;
        } else {
            lo = mid;
        }
    }
    pt.s = hi;
    pt.found = true;
    pt.trials = best;
    pt.m = search_spec(cfg, pt.m, hi, eps).m;
    return pt;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ParameterError("slope needs at least two points");
    const auto k = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a(k, 2);
    Eigen::VectorXd b(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        a(i, 0) = std::log(x[i]);
        a(i, 1) = 1.0;
        b[i] = std::log(y[i]);
    }
    return a.colPivHouseholderQr().solve(b)[0];
}

struct TrendFit {
    /// Exponent of 1/eps in s ~ (1/eps)^slope.
    double slope = 0.0;
    /// s ~ a/eps + b L/eps^2 with L = ln(d/(eps delta)).
    double a = 0.0;
    double b = 0.0;
};

inline TrendFit fit_sparsity_trend(const std::vector<SparsityPoint>& pts, double d, double delta) {
    std::vector<double> inv_eps, s;
    for (const auto& p : pts) {
        inv_eps.push_back(1.0 / p.eps);
        s.push_back(static_cast<double>(p.s));
    }
    TrendFit fit;
    fit.slope = loglog_slope(inv_eps, s);
    const auto k = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd a(k, 2);
    Eigen::VectorXd b(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double e = pts[static_cast<std::size_t>(i)].eps;
        a(i, 0) = 1.0 / e;
        a(i, 1) = std::log(d / (e * delta)) / (e * e);
        b[i] = s[static_cast<std::size_t>(i)];
    }
    const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
    fit.a = coef[0];
    fit.b = coef[1];
    return fit;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

struct CalibrationTarget {
    std::int64_t d = 16;
    std::int64_t n = 4096;
    double eps = 0.5;
    double delta = 0.05;
    std::int64_t trials = 200;
    /// A candidate passes when its worst failure fraction is <= margin * delta.
    double margin = 0.5;
    double gamma = 0.1;
    /// Subspace dimensions the LESS constants must serve simultaneously.
    std::vector<std::int64_t> less_dims{16, 32};
    std::uint64_t seed = 0;
    int threads = 1;
};

struct CalibrationStep {
    std::string constant;
    double value = 0.0;
    std::int64_t m = 0;
    double pm = 0.0;
    double failure = 0.0;
    double q95 = 0.0;
    bool pass = false;
};

struct CalibrationResult {
    Calibration constants;
    CalibrationTarget target;
    std::vector<CalibrationStep> steps;
};

namespace detail {

inline std::vector<double> powers_of_two(int lo, int hi) {
    std::vector<double> v;
    for (int e = lo; e <= hi; ++e) v.push_back(std::ldexp(1.0, e));
    return v;
}

}  // namespace detail

/// Worst-case failure of the full pipeline (leverage scores computed from U)
/// with the given constants. Returns nullopt when the pipeline falls back to
/// a dense sketch, which says nothing about the sparse constants.
inline std::optional<WorstCaseReport> pipeline_trials(const CalibrationTarget& t, std::int64_t d,
                                                      const Calibration& cal, SketchKind kind, std::int64_t trials,
                                                      std::uint64_t seed, std::int64_t* m_out = nullptr,
                                                      double* pm_out = nullptr) {
    PipelineConfig cfg;
    cfg.eps = t.eps;
    cfg.delta = t.delta;
    cfg.gamma = t.gamma;
    cfg.kind = kind;
    cfg.calibration = cal;
    cfg.threads = 1;
    {
        // Parameters depend on the scores only through the LESS layout, so a
        // single probe decides the fallback.
        LeverageScores uniform;
        uniform.z = Eigen::VectorXd::Constant(t.n, static_cast<double>(d) / static_cast<double>(t.n));
        const LessIcSpec probe = less_default_parameters(d, t.eps, t.delta, uniform, 0, cal);
        if (m_out) *m_out = probe.m;
        if (pm_out) *pm_out = probe.pm();
        if (probe.p >= 1.0) return std::nullopt;
    }
    WorstCaseReport r;
    for (SubspaceKind sk : {SubspaceKind::haar, SubspaceKind::coordinate}) {
        const SubspaceSampler sampler = subspace_sampler(sk, t.n, d);
        const std::uint64_t base = mix_seed(seed, sk == SubspaceKind::haar ? 1 : 2);
        std::vector<double> dist(static_cast<std::size_t>(trials));
        std::vector<char> fail(static_cast<std::size_t>(trials));
        parallel_for(static_cast<std::size_t>(trials), t.threads, [&](std::size_t i) {
            const std::uint64_t ts = mix_seed(base, i);
            const Eigen::MatrixXd u = sampler(mix_seed(ts, 2));
            PipelineConfig c = cfg;
            c.seed = mix_seed(ts, 1);
            const PipelineResult res = fast_subspace_embed(TallMatrix::from_dense(u), c);
            // U is orthonormal, so the embedded matrix is Pi U itself.
            const DistortionReport dr = distortion_of_product(res.embedded, t.eps);
            dist[i] = dr.distortion();
            fail[i] = dr.pass ? 0 : 1;
        });
        TrialReport tr;
        tr.trials = trials;
        tr.eps = t.eps;
        for (char f : fail) tr.failures += f;
        tr.failure_fraction = static_cast<double>(tr.failures) / static_cast<double>(trials);
        tr.mean_distortion = mean_and_error(dist).mean;
        tr.q50 = quantile(dist, 0.5);
        tr.q90 = quantile(dist, 0.9);
        tr.q95 = quantile(dist, 0.95);
        tr.q99 = quantile(dist, 0.99);
        tr.max_distortion = *std::max_element(dist.begin(), dist.end());
        (sk == SubspaceKind::haar ? r.haar : r.coordinate) = tr;
    }
    return r;
}

/// Picks each constant as the smallest power of two meeting the target
/// failure rate, in the order C_m, C_s, C_e, C_mL, C_L:
///   C_m  - dense limit (s = m) of the oblivious rule
///   C_s  - OSNAP with C_m fixed
///   C_e  - OSE-IE with C_m, C_s fixed
///   C_mL, C_L - the LESS-IC pipeline at every d in less_dims, smallest
///               C_mL admitting a sparse (p < 1) passing C_L
/// `progress` is called after every evaluated candidate.
inline CalibrationResult calibrate(const CalibrationTarget& t,
                                   const std::function<void(const CalibrationStep&)>& progress = {}) {
    CalibrationResult res;
    res.target = t;
    Calibration& cal = res.constants;
    const double limit = t.margin * t.delta;
    auto record = [&](CalibrationStep st) {
        res.steps.push_back(st);
        if (progress) progress(st);
        return st.pass;
    };
    auto oblivious_step = [&](const std::string& name, double value, const SketchSpec& spec, std::uint64_t seed) {
        const WorstCaseReport r = worst_case_trials(oblivious_builder(spec), t.n, t.d, t.eps, t.trials, seed, t.threads);
        return record({name, value, spec.m, spec.pm(), r.worst_failure(), r.worst_q95(), r.worst_failure() <= limit});
    };

    bool found = false;
    for (double c : detail::powers_of_two(-2, 6)) {
        Calibration trial = cal;
        trial.c_m = c;
        SketchSpec spec = default_parameters(t.d, t.n, t.eps, t.delta, SketchKind::rademacher_dense, 0, trial);
        spec.degree_k = 0;
        if ((found = oblivious_step("c_m", c, spec, mix_seed(t.seed, 1)))) {
            cal.c_m = c;
            break;
        }
    }
    if (!found) throw NumericError("calibration of C_m failed up to 64");

    found = false;
    for (double c : detail::powers_of_two(-10, 2)) {
        Calibration trial = cal;
        trial.c_s = c;
        const SketchSpec spec = default_parameters(t.d, t.n, t.eps, t.delta, SketchKind::osnap, 0, trial);
        if ((found = oblivious_step("c_s", c, spec, mix_seed(t.seed, 2)))) {
            cal.c_s = c;
            break;
        }
    }
    if (!found) throw NumericError("calibration of C_s failed up to 4");

    found = false;
    for (double c : detail::powers_of_two(-8, 4)) {
        Calibration trial = cal;
        trial.c_e = c;
        const SketchSpec spec = default_parameters(t.d, t.n, t.eps, t.delta, SketchKind::ose_ie, 0, trial);
        if ((found = oblivious_step("c_e", c, spec, mix_seed(t.seed, 3)))) {
            cal.c_e = c;
            break;
        }
    }
    if (!found) throw NumericError("calibration of C_e failed up to 16");

    found = false;
    for (double cm : detail::powers_of_two(-5, 3)) {
        for (double cl : detail::powers_of_two(-10, 0)) {
            Calibration trial = cal;
            trial.c_m_less = cm;
            trial.c_l = cl;
            std::int64_t m = 0;
            double pm = 0.0;
            double worst = 0.0, q95 = 0.0;
            bool dense = false;
            for (std::int64_t d : t.less_dims) {
                const auto r = pipeline_trials(t, d, trial, SketchKind::less_ic, t.trials,
                                               mix_seed(t.seed, 4 + static_cast<std::uint64_t>(d)), &m, &pm);
                if (!r) {
                    dense = true;
                    break;
                }
                worst = std::max(worst, r->worst_failure());
                q95 = std::max(q95, r->worst_q95());
                if (worst > limit) break;
            }
            if (dense) break;  // larger C_L only gets denser
            const bool pass = worst <= limit;
            record({"c_l@c_m_less=" + std::to_string(cm), cl, m, pm, worst, q95, pass});
            if (pass) {
                cal.c_m_less = cm;
                cal.c_l = cl;
                found = true;
                break;
            }
        }
        if (found) break;
    }
    if (!found) throw NumericError("calibration of the LESS constants failed");
    return res;
}

// ---------------------------------------------------------------------------
// Configured experiments (the verify command)
// ---------------------------------------------------------------------------

enum class ExperimentKind { embedding, trace_moment, decoupled_moment, diagonal_split };

inline std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::embedding: return "embedding";
        case ExperimentKind::trace_moment: return "trace_moment";
        case ExperimentKind::decoupled_moment: return "decoupled_moment";
        case ExperimentKind::diagonal_split: return "diagonal_split";
    }
    return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
    if (s == "embedding") return ExperimentKind::embedding;
    if (s == "trace_moment") return ExperimentKind::trace_moment;
    if (s == "decoupled_moment") return ExperimentKind::decoupled_moment;
    if (s == "diagonal_split") return ExperimentKind::diagonal_split;
    throw ParameterError("unknown experiment '" + std::string(s) +
                         "' (expected embedding, trace_moment, decoupled_moment or diagonal_split)");
}

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::embedding;
    SketchKind kind = SketchKind::osnap;
    std::int64_t n = 4096;
    std::int64_t d = 16;
    /// Explicit (m, s or p*m, K); when m is absent the default rule is used.
    std::optional<std::int64_t> m;
    std::optional<double> sparsity;
    std::optional<int> degree_k;
    double eps = 0.5;
    double delta = 0.05;
    SubspaceKind subspace = SubspaceKind::haar;
    std::int64_t trials = 200;
    int q = 1;
    std::uint64_t seed = 0;
    int threads = 1;
    /// Pass threshold for the embedding failure fraction (defaults to delta).
    std::optional<double> max_failure;
    /// Expected moment value; decoupled_moment defaults to 2 p^2 m (d + 1).
    std::optional<double> expected;
    /// Width of the acceptance band in standard errors.
    double tolerance_se = 3.0;
    Calibration calibration = kDefaultCalibration;
};

struct ExperimentResult {
    ExperimentConfig config;
    SketchSpec spec;
    std::optional<TrialReport> trial;
    std::optional<MomentProbe> moment;
    std::optional<double> expected;
    bool pass = true;
    std::vector<std::string> warnings;
};

/// Sketch spec for an experiment. LESS kinds use uniform scores z_j = d/n.
inline SketchSpec experiment_spec(const ExperimentConfig& c, std::vector<std::string>* warnings) {
    if (c.kind == SketchKind::less_ic || c.kind == SketchKind::less_ie) {
        if (!c.m || !c.sparsity) throw ParameterError("LESS experiments need explicit m and sparsity (p*m)");
        SketchSpec s{*c.m, c.n, *c.sparsity / static_cast<double>(*c.m), c.kind, c.degree_k.value_or(0), c.seed};
        if (!(s.p > 0.0 && s.p < 1.0)) throw ParameterError("LESS experiments need 0 < p*m < m");
        return s;
    }
    if (!c.m) {
        SketchSpec s = default_parameters(c.d, c.n, c.eps, c.delta, c.kind, c.seed, c.calibration, warnings);
        if (c.degree_k) s.degree_k = *c.degree_k;
        return s;
    }
    PipelineConfig pc;
    pc.eps = c.eps;
    pc.delta = c.delta;
    pc.kind = c.kind;
    pc.m = c.m;
    pc.sparsity = c.sparsity;
    pc.degree_k = c.degree_k;
    pc.seed = c.seed;
    pc.calibration = c.calibration;
    if (is_dense_kind(c.kind)) {
        SketchSpec s{*c.m, c.n, 1.0, c.kind, c.degree_k.value_or(0), c.seed};
        s.validate();
        return s;
    }
    return pipeline_oblivious_spec(c.n, c.d, pc, warnings);
}

inline SketchBuilder experiment_builder(const SketchSpec& spec, std::int64_t d) {
    if (spec.kind == SketchKind::less_ic || spec.kind == SketchKind::less_ie) {
        LeverageScores uniform;
        uniform.z = Eigen::VectorXd::Constant(spec.n, static_cast<double>(d) / static_cast<double>(spec.n));
        if (spec.kind == SketchKind::less_ie) return less_ie_builder(uniform, spec.p, spec.m, spec.degree_k);
        LessIcSpec ls;
        ls.m = spec.m;
        ls.p = spec.p;
        ls.scores = uniform;
        ls.degree_k = spec.degree_k;
        return less_ic_builder(ls);
    }
    return oblivious_builder(spec);
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    if (c.d < 1 || c.d > c.n) throw ParameterError("need 1 <= d <= n");
    if (c.trials < 1) throw ParameterError("trials must be at least 1");
    ExperimentResult res;
    res.config = c;
    res.spec = experiment_spec(c, &res.warnings);
    const SketchBuilder builder = experiment_builder(res.spec, c.d);
    const SubspaceSampler sampler = subspace_sampler(c.subspace, c.n, c.d);

    switch (c.experiment) {
        case ExperimentKind::embedding: {
            res.trial = embedding_trial(builder, sampler, c.trials, c.eps, c.seed, c.threads);
            res.pass = res.trial->failure_fraction <= c.max_failure.value_or(c.delta);
            break;
        }
        case ExperimentKind::trace_moment:
        case ExperimentKind::decoupled_moment: {
            const Eigen::MatrixXd u = sampler(mix_seed(c.seed, 0x5b));
            if (c.experiment == ExperimentKind::trace_moment) {
                res.moment = trace_moment(builder, u, c.q, c.trials, c.seed, c.threads);
                res.expected = c.expected;
            } else {
                res.moment = decoupled_gamma_moment(builder, u, c.q, c.trials, c.seed, c.threads);
                res.expected = c.expected ? c.expected
                                          : (c.q == 1 ? std::optional<double>(second_moment_gamma(
                                                            res.spec.p, res.spec.m, c.d))
                                                      : std::nullopt);
            }
            if (res.expected)
                res.pass = std::abs(res.moment->estimate - *res.expected) <= c.tolerance_se * res.moment->std_error;
            break;
        }
        case ExperimentKind::diagonal_split: {
            // E tr((1/pm) diag)^2 against (1 - p)/(pm) for independent entries.
            const Eigen::MatrixXd u = sampler(mix_seed(c.seed, 0x5b));
            std::vector<double> v(static_cast<std::size_t>(c.trials));
            parallel_for(v.size(), c.threads, [&](std::size_t i) {
                const AnySketch sk = builder(mix_seed(c.seed, i));
                const auto* sparse = std::get_if<SparseSketch>(&sk);
                if (!sparse) throw ParameterError("diagonal split needs a sparse sketch kind");
                const DiagonalSplit split = diagonal_offdiagonal_split(*sparse, u);
                v[i] = normalized_trace_power(split.diag / split.pm, 1);
            });
            const MeanAndError me = mean_and_error(v);
            res.moment = MomentProbe{1, c.trials, me.mean, me.std_error};
            res.expected = c.expected;
            if (!res.expected && c.kind == SketchKind::ose_ie && c.subspace == SubspaceKind::coordinate)
                res.expected = (1.0 - res.spec.p) / res.spec.pm();
            if (!res.expected && (c.kind == SketchKind::osnap || c.kind == SketchKind::less_ic)) res.expected = 0.0;
            if (res.expected)
                res.pass = std::abs(res.moment->estimate - *res.expected) <=
                           c.tolerance_se * res.moment->std_error + 1e-10;
            break;
        }
    }
    return res;
}

}  // namespace sose
