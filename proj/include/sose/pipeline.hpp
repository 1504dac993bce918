#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sose/apply.hpp"
#include "sose/calibration.hpp"
#include "sose/diagnostics.hpp"
#include "sose/error.hpp"
#include "sose/kwise.hpp"
#include "sose/less.hpp"
#include "sose/leverage.hpp"
#include "sose/oblivious.hpp"
#include "sose/sketch.hpp"

namespace sose {

struct PipelineConfig {
    double eps = 0.5;
    double delta = 0.05;
    double gamma = 0.1;
    std::uint64_t seed = 0;
    SketchKind kind = SketchKind::less_ic;
    /// Overrides for the default rows, sparsity (s for OSNAP, p*m otherwise)
    /// and independence degree.
    std::optional<std::int64_t> m;
    std::optional<double> sparsity;
    std::optional<int> degree_k;
    /// Check the distortion of the result against an exact orthonormal basis.
    bool validate = false;
    int threads = 1;
    Calibration calibration = kDefaultCalibration;

    void check() const {
        if (!(eps > 0 && eps < 1)) throw ParameterError("eps must lie in (0, 1)");
        if (!(delta > 0 && delta < 1)) throw ParameterError("delta must lie in (0, 1)");
        if (!(gamma > 0 && gamma < 1)) throw ParameterError("gamma must lie in (0, 1)");
        if (kind == SketchKind::rademacher_dense)
            throw ParameterError("the pipeline supports osnap, ose-ie, less-ic, less-ie and gaussian-dense");
        if (m && *m < 1) throw ParameterError("override m must be positive");
        if (sparsity && !(*sparsity > 0)) throw ParameterError("override sparsity must be positive");
        if (m && sparsity && *sparsity > static_cast<double>(*m))
            throw ParameterError("override sparsity exceeds m");
        if (degree_k && *degree_k < 0) throw ParameterError("override degree_k must be non-negative");
    }
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineReport {
    SketchKind kind = SketchKind::less_ic;
    std::int64_t n = 0;
    std::int64_t d = 0;
    std::int64_t input_nnz = 0;
    std::int64_t m = 0;
    double p = 0.0;
    double pm = 0.0;
    int degree_k = 0;
    double beta1 = 1.0;
    double beta2 = 1.0;
    std::int64_t sketch_nnz = 0;
    /// n + 4 beta1 beta2 p m d; only meaningful for leverage-adapted kinds.
    std::optional<double> nnz_bound;
    bool nnz_within_bound = true;
    bool dense_fallback = false;
    /// n^gamma d^2 / eps compared against nnz(A); above 1 the sketching term
    /// dominates the input-sparsity term.
    double regime_ratio = 0.0;
    bool sketch_dominated = false;
    std::vector<StageTiming> stages;
    double total_seconds = 0.0;
    std::vector<std::string> warnings;
    std::optional<DistortionReport> validation;

    double stage_seconds() const {
        double s = 0.0;
        for (const auto& st : stages) s += st.seconds;
        return s;
    }
};

struct PipelineResult {
    Eigen::MatrixXd embedded;  // m x d
    AnySketch sketch;
    std::optional<LeverageScores> scores;
    PipelineReport report;
};

namespace detail {

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& out) : out_(out), last_(std::chrono::steady_clock::now()) {}
    void mark(std::string stage) {
        const auto now = std::chrono::steady_clock::now();
        out_.push_back({std::move(stage), std::chrono::duration<double>(now - last_).count()});
        last_ = now;
    }

private:
    std::vector<StageTiming>& out_;
    std::chrono::steady_clock::time_point last_;
};

inline bool is_less_kind(SketchKind k) { return k == SketchKind::less_ic || k == SketchKind::less_ie; }

}  // namespace detail

/// Oblivious spec for the pipeline: defaults plus overrides.
inline SketchSpec pipeline_oblivious_spec(std::int64_t n, std::int64_t d, const PipelineConfig& cfg,
                                          std::vector<std::string>* warnings) {
    SketchSpec spec = default_parameters(d, n, cfg.eps, cfg.delta, cfg.kind, cfg.seed, cfg.calibration, warnings);
    if (cfg.m || cfg.sparsity) {
        const std::int64_t m = cfg.m.value_or(spec.m);
        if (cfg.kind == SketchKind::osnap) {
            const auto s = cfg.sparsity ? static_cast<std::int64_t>(std::llround(*cfg.sparsity)) : spec.sparsity();
            if (cfg.sparsity && std::abs(*cfg.sparsity - static_cast<double>(s)) > 1e-12)
                throw ParameterError("OSNAP sparsity override must be an integer");
            spec = SketchSpec::osnap(m, n, std::min(s, m), spec.degree_k, cfg.seed);
        } else if (is_dense_kind(cfg.kind)) {
            spec.m = m;
        } else {
            spec.m = m;
            spec.p = std::min(1.0, cfg.sparsity.value_or(spec.pm()) / static_cast<double>(m));
        }
    }
    if (cfg.degree_k) spec.degree_k = *cfg.degree_k;
    spec.validate();
    return spec;
}

/// Embeds the column space of A: approximate leverage scores, default
/// parameters, sketch construction and application. Oblivious kinds skip the
/// leverage stage.
inline PipelineResult fast_subspace_embed(const TallMatrix& A, const PipelineConfig& cfg) {
    cfg.check();
    const std::int64_t n = A.rows();
    const std::int64_t d = A.cols();
    if (d < 1 || d > n) throw RankError("need 1 <= d <= n", 0);
    if (!A.all_finite()) throw ParameterError("input matrix has non-finite entries");

    PipelineResult out;
    PipelineReport& rep = out.report;
    rep.kind = cfg.kind;
    rep.n = n;
    rep.d = d;
    rep.input_nnz = A.nnz();
    rep.regime_ratio = std::pow(static_cast<double>(n), cfg.gamma) * static_cast<double>(d) *
                       static_cast<double>(d) / cfg.eps / static_cast<double>(std::max<std::int64_t>(1, rep.input_nnz));
    rep.sketch_dominated = rep.regime_ratio > 1.0;

    const auto start = std::chrono::steady_clock::now();
    detail::StageClock clock(rep.stages);

    if (detail::is_less_kind(cfg.kind)) {
        ApproxLeverageOptions opt;
        opt.seed = mix_seed(cfg.seed, 0x1e7);
        opt.threads = cfg.threads;
        out.scores = approx_leverage(A, cfg.gamma, opt);
        rep.beta1 = out.scores->beta1;
        rep.beta2 = out.scores->beta2;
        clock.mark("leverage");

        LessIcSpec spec = less_default_parameters(d, cfg.eps, cfg.delta, *out.scores, cfg.seed, cfg.calibration,
                                                  &rep.warnings);
        if (cfg.m) spec.m = *cfg.m;
        if (cfg.m || cfg.sparsity) {
            const double pm = std::min(cfg.sparsity.value_or(spec.pm()), static_cast<double>(spec.m));
            spec.p = pm / static_cast<double>(spec.m);
        }
        if (cfg.degree_k) spec.degree_k = *cfg.degree_k;
        clock.mark("parameters");

        if (spec.p >= 1.0) {
            rep.dense_fallback = true;
            rep.warnings.push_back("leverage-adapted sketch would be dense; using a dense OSNAP (s = m)");
            const SketchSpec dense = SketchSpec::osnap(spec.m, n, spec.m, spec.degree_k, cfg.seed);
            out.sketch = build_osnap(dense, family_for(dense), cfg.threads);
        } else {
            const KWiseFamily family = spec.degree_k == 0 ? KWiseFamily::fully_independent(cfg.seed)
                                                          : KWiseFamily::create(cfg.seed, spec.degree_k);
            if (cfg.kind == SketchKind::less_ic)
                out.sketch = build_less_ic(spec, family, cfg.threads);
            else
                out.sketch = build_less_ie(*out.scores, spec.p, spec.m, family, cfg.threads);
            rep.nnz_bound = less_nnz_bound(n, rep.beta1, rep.beta2, spec.pm(), d);
        }
        clock.mark("build");
    } else {
        const SketchSpec spec = pipeline_oblivious_spec(n, d, cfg, &rep.warnings);
        clock.mark("parameters");
        out.sketch = build_oblivious(spec, cfg.threads);
        clock.mark("build");
    }

    const SketchSpec& spec = spec_of(out.sketch);
    rep.m = spec.m;
    rep.p = spec.p;
    rep.pm = spec.pm();
    rep.degree_k = spec.degree_k;
    if (const auto* sparse = std::get_if<SparseSketch>(&out.sketch)) {
        rep.sketch_nnz = sparse->nnz();
        rep.warnings.insert(rep.warnings.end(), sparse->warnings.begin(), sparse->warnings.end());
    } else {
        rep.sketch_nnz = spec.m * spec.n;
    }
    if (rep.nnz_bound) rep.nnz_within_bound = static_cast<double>(rep.sketch_nnz) <= *rep.nnz_bound;

    out.embedded = sose::apply(out.sketch, A, cfg.threads);
    clock.mark("apply");

    if (cfg.validate) {
        const OrthonormalBasis basis = orthonormal_basis(A.to_dense());
        rep.validation = distortion_of_product(sose::apply(out.sketch, basis.q, cfg.threads), cfg.eps);
        clock.mark("validate");
    }
    rep.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace sose
