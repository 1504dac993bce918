// Command-line front end: sketch, apply, leverage, verify, bench, pipeline.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sose/sose.hpp"

namespace {

using sose::ParameterError;

constexpr int kExitVerificationFailed = 4;

struct Common {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Master random seed")->capture_default_str();
    cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores; results do not depend on it)")
        ->capture_default_str();
    cmd->add_option("--out", c.out, "Output file ('-' or empty for stdout)");
}

/// Writes text output to --out or stdout.
template <class Writer>
void emit(const std::string& path, Writer&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    auto out = sose::open_output(path);
    write(out);
    if (!out) throw sose::IoError("failed writing '" + path + "'");
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// sketch
// ---------------------------------------------------------------------------

struct SketchArgs {
    Common common;
    std::string kind;
    std::optional<std::int64_t> m, n, d;
    std::optional<double> p, s;
    std::optional<int> degree_k;
    double eps = 0.5;
    double delta = 0.05;
    std::string scores;
};

sose::AnySketch build_from_args(const SketchArgs& a, std::vector<std::string>& warnings) {
    const sose::SketchKind kind = sose::parse_sketch_kind(a.kind);
    if (a.p && a.s) throw ParameterError("give at most one of --p and --s");
    const bool less = kind == sose::SketchKind::less_ic || kind == sose::SketchKind::less_ie;

    if (less) {
        if (a.scores.empty()) throw ParameterError("LESS kinds need --scores");
        const sose::LeverageScores scores = sose::read_scores_file(a.scores);
        if (a.n && *a.n != scores.size()) throw ParameterError("--n disagrees with the score file length");
        sose::LessIcSpec spec;
        if (a.m) {
            if (!a.p && !a.s) throw ParameterError("explicit --m needs --p or --s (= p*m)");
            spec.m = *a.m;
            spec.p = a.p ? *a.p : *a.s / static_cast<double>(*a.m);
            spec.scores = scores;
            const std::int64_t d = a.d.value_or(spec.m);
            spec.degree_k = sose::default_degree_k(static_cast<double>(d), a.eps, a.delta, spec.pm());
        } else {
            if (!a.d) throw ParameterError("default LESS parameters need --d");
            spec = sose::less_default_parameters(*a.d, a.eps, a.delta, scores, a.common.seed,
                                                 sose::kDefaultCalibration, &warnings);
        }
        spec.seed = a.common.seed;
        if (a.degree_k) spec.degree_k = *a.degree_k;
        const sose::KWiseFamily family = spec.degree_k == 0 ? sose::KWiseFamily::fully_independent(spec.seed)
                                                            : sose::KWiseFamily::create(spec.seed, spec.degree_k);
        if (kind == sose::SketchKind::less_ic) return sose::build_less_ic(spec, family, a.common.threads);
        if (!(spec.p > 0.0 && spec.p <= 1.0)) throw ParameterError("p must lie in (0, 1]");
        return sose::build_less_ie(spec.scores, spec.p, spec.m, family, a.common.threads);
    }

    if (!a.n) throw ParameterError("--n is required");
    sose::SketchSpec spec;
    if (a.m) {
        spec.kind = kind;
        spec.m = *a.m;
        spec.n = *a.n;
        spec.seed = a.common.seed;
        if (sose::is_dense_kind(kind)) {
            spec.p = a.p.value_or(1.0);
            spec.degree_k = 0;
        } else {
            if (!a.p && !a.s) throw ParameterError("explicit --m needs --p or --s (= p*m)");
            spec.p = a.p ? *a.p : *a.s / static_cast<double>(*a.m);
            const std::int64_t d = a.d.value_or(spec.m);
            spec.degree_k = kind == sose::SketchKind::ose_ie
                                ? 0
                                : sose::default_degree_k(static_cast<double>(d), a.eps, a.delta, spec.pm());
        }
    } else {
        if (!a.d) throw ParameterError("give --m with --p/--s, or --d (with --eps, --delta) for defaults");
        spec = sose::default_parameters(*a.d, *a.n, a.eps, a.delta, kind, a.common.seed, sose::kDefaultCalibration,
                                        &warnings);
    }
    if (a.degree_k) spec.degree_k = *a.degree_k;
    return sose::build_oblivious(spec, a.common.threads);
}

int run_sketch(const SketchArgs& a) {
    std::vector<std::string> warnings;
    const sose::AnySketch sk = build_from_args(a, warnings);
    if (a.common.out.empty()) throw ParameterError("sketch needs --out");
    sose::write_sketch_file(a.common.out, sk);
    nlohmann::json info{{"spec", sose::to_json(sose::spec_of(sk))}, {"scale", sose::scale_of(sk)}};
    if (const auto* sp = std::get_if<sose::SparseSketch>(&sk)) {
        info["nnz"] = sp->nnz();
        warnings.insert(warnings.end(), sp->warnings.begin(), sp->warnings.end());
    }
    info["warnings"] = warnings;
    info["file"] = a.common.out;
    print_json(info);
    return 0;
}

// ---------------------------------------------------------------------------
// apply
// ---------------------------------------------------------------------------

struct ApplyArgs {
    Common common;
    std::string sketch;
    std::string matrix;
};

int run_apply(const ApplyArgs& a) {
    const sose::AnySketch sk = sose::read_sketch_file(a.sketch);
    const sose::TallMatrix A = sose::read_matrix_market_file(a.matrix);
    const Eigen::MatrixXd result = sose::apply(sk, A, a.common.threads);
    emit(a.common.out, [&](std::ostream& os) { sose::write_matrix_market(os, result); });
    return 0;
}

// ---------------------------------------------------------------------------
// leverage
// ---------------------------------------------------------------------------

struct LeverageArgs {
    Common common;
    std::string matrix;
    bool exact = false;
    double gamma = 0.1;
    bool validate = false;
    std::string report;
};

int run_leverage(const LeverageArgs& a) {
    const sose::TallMatrix A = sose::read_matrix_market_file(a.matrix);
    sose::LeverageScores scores;
    nlohmann::json info;
    if (a.exact) {
        scores = sose::exact_leverage(A);
        info["method"] = "exact";
    } else {
        sose::ApproxLeverageOptions opt;
        opt.seed = a.common.seed;
        opt.threads = a.common.threads;
        sose::ApproxLeverageInfo li;
        scores = sose::approx_leverage(A, a.gamma, opt, &li);
        info["method"] = "approximate";
        info["gamma"] = a.gamma;
        info["sketch_rows"] = li.sketch_rows;
        info["test_vectors"] = li.test_vectors;
        info["attempts"] = li.attempts;
    }
    info["beta1"] = scores.beta1;
    info["beta2"] = scores.beta2;
    info["sum"] = scores.z.sum();
    emit(a.common.out, [&](std::ostream& os) { os << sose::scores_to_json(scores).dump(2) << '\n'; });
    int code = 0;
    if (a.validate) {
        const sose::ScoreValidation v = sose::validate_scores(A.to_dense(), scores);
        info["validation"] = sose::to_json(v);
        if (!v.pass) code = kExitVerificationFailed;
    }
    if (!a.report.empty())
        sose::write_json_file(a.report, info);
    else if (!a.common.out.empty() && a.common.out != "-")
        print_json(info);
    return code;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
    Common common;
    std::string config;
    bool seed_given = false;
};

int run_verify(const VerifyArgs& a, const CLI::App& cmd) {
    const nlohmann::json j = sose::read_json_file(a.config);
    sose::ExperimentConfig cfg = sose::experiment_config_from_json(j);
    if (cmd.count("--seed")) cfg.seed = a.common.seed;
    if (cmd.count("--threads")) cfg.threads = a.common.threads;
    const sose::ExperimentResult res = sose::run_experiment(cfg);
    const nlohmann::json report = sose::to_json(res);
    emit(a.common.out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
    return res.pass ? 0 : kExitVerificationFailed;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
    Common common;
    std::string sweep;
    std::string kind = "osnap";
    std::int64_t d = 16;
    std::int64_t n = 4096;
    double delta = 0.05;
    double eps = 0.5;
    std::vector<double> eps_list{0.5, 0.25, 0.125};
    std::vector<std::int64_t> m_list;
    std::vector<std::int64_t> s_list;
    std::optional<std::int64_t> m, s;
    std::optional<double> c_m;
    std::int64_t trials = 200;
};

std::vector<std::int64_t> default_m_list(const BenchArgs& a, double c_m) {
    const auto base = static_cast<std::int64_t>(std::ceil(c_m * static_cast<double>(a.d) / (a.eps * a.eps)));
    return {base, 2 * base, 4 * base};
}

int run_bench(const BenchArgs& a) {
    const double c_m = a.c_m.value_or(sose::kDefaultCalibration.c_m);
    if (a.sweep == "calibrate") {
        sose::CalibrationTarget t;
        t.d = a.d;
        t.n = a.n;
        t.eps = a.eps;
        t.delta = a.delta;
        t.trials = a.trials;
        t.seed = a.common.seed;
        t.threads = a.common.threads;
        const sose::CalibrationResult r = sose::calibrate(t, [](const sose::CalibrationStep& s) {
            std::cerr << s.constant << " = " << s.value << ": m = " << s.m << ", pm = " << s.pm
                      << ", worst failure = " << s.failure << (s.pass ? " (pass)" : "") << '\n';
        });
        emit(a.common.out, [&](std::ostream& os) { os << sose::to_json(r).dump(2) << '\n'; });
        return 0;
    }

    const sose::SketchKind kind = sose::parse_sketch_kind(a.kind);
    std::ostringstream csv;
    if (a.sweep == "eps") {
        sose::SparsitySearch cfg;
        cfg.kind = kind;
        cfg.d = a.d;
        cfg.n = a.n;
        cfg.delta = a.delta;
        cfg.c_m = c_m;
        cfg.trials = a.trials;
        cfg.seed = a.common.seed;
        cfg.threads = a.common.threads;
        csv << "eps,m,s,found,evaluations,haar_failure,coordinate_failure,haar_q95,coordinate_q95\n";
        std::vector<sose::SparsityPoint> pts;
        for (double eps : a.eps_list) {
            const sose::SparsityPoint pt = sose::minimal_sparsity(cfg, eps);
            csv << eps << ',' << pt.m << ',' << pt.s << ',' << (pt.found ? 1 : 0) << ',' << pt.evaluations << ','
                << pt.trials.haar.failure_fraction << ',' << pt.trials.coordinate.failure_fraction << ','
                << pt.trials.haar.q95 << ',' << pt.trials.coordinate.q95 << '\n';
            std::cerr << "eps = " << eps << ": s = " << pt.s << " at m = " << pt.m << '\n';
            pts.push_back(pt);
        }
        if (pts.size() >= 2) {
            const sose::TrendFit fit = sose::fit_sparsity_trend(pts, static_cast<double>(a.d), a.delta);
            std::cerr << "log-log exponent of 1/eps: " << fit.slope << "; fit s = " << fit.a << "/eps + " << fit.b
                      << " L/eps^2\n";
        }
    } else if (a.sweep == "m" || a.sweep == "s") {
        std::vector<std::pair<std::int64_t, std::int64_t>> grid;
        if (a.sweep == "m") {
            if (!a.s) throw ParameterError("--sweep m needs --s");
            for (auto m : a.m_list.empty() ? default_m_list(a, c_m) : a.m_list) grid.emplace_back(m, *a.s);
        } else {
            if (!a.m) throw ParameterError("--sweep s needs --m");
            if (a.s_list.empty()) throw ParameterError("--sweep s needs --s-list");
            for (auto s : a.s_list) grid.emplace_back(*a.m, s);
        }
        csv << "m,s,p,haar_failure,coordinate_failure,haar_q95,coordinate_q95\n";
        for (auto [m, s] : grid) {
            sose::SparsitySearch cfg;
            cfg.kind = kind;
            cfg.d = a.d;
            cfg.n = a.n;
            cfg.delta = a.delta;
            const sose::SketchSpec spec = sose::search_spec(cfg, m, s, a.eps);
            const sose::WorstCaseReport r = sose::worst_case_trials(sose::oblivious_builder(spec), a.n, a.d, a.eps,
                                                                    a.trials, a.common.seed, a.common.threads);
            csv << spec.m << ',' << s << ',' << spec.p << ',' << r.haar.failure_fraction << ','
                << r.coordinate.failure_fraction << ',' << r.haar.q95 << ',' << r.coordinate.q95 << '\n';
        }
    } else {
        throw ParameterError("unknown sweep '" + a.sweep + "' (expected eps, m, s or calibrate)");
    }
    emit(a.common.out, [&](std::ostream& os) { os << csv.str(); });
    return 0;
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

struct PipelineArgs {
    Common common;
    std::string matrix;
    double eps = 0.5;
    double delta = 0.05;
    double gamma = 0.1;
    std::string kind = "less-ic";
    bool validate = false;
    std::optional<std::int64_t> m;
    std::optional<double> s;
    std::optional<int> degree_k;
    std::string report;
};

int run_pipeline(const PipelineArgs& a) {
    const sose::TallMatrix A = sose::read_matrix_market_file(a.matrix);
    sose::PipelineConfig cfg;
    cfg.eps = a.eps;
    cfg.delta = a.delta;
    cfg.gamma = a.gamma;
    cfg.seed = a.common.seed;
    cfg.kind = sose::parse_sketch_kind(a.kind);
    cfg.m = a.m;
    cfg.sparsity = a.s;
    cfg.degree_k = a.degree_k;
    cfg.validate = a.validate;
    cfg.threads = a.common.threads;
    const sose::PipelineResult res = sose::fast_subspace_embed(A, cfg);
    emit(a.common.out, [&](std::ostream& os) { sose::write_matrix_market(os, res.embedded); });
    const nlohmann::json report = sose::to_json(res.report);
    if (!a.report.empty())
        sose::write_json_file(a.report, report);
    else if (!a.common.out.empty() && a.common.out != "-")
        print_json(report);
    const bool ok = res.report.nnz_within_bound && (!res.report.validation || res.report.validation->pass);
    return ok ? 0 : kExitVerificationFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse oblivious and leverage-adapted subspace embeddings"};
    app.require_subcommand(1);

    SketchArgs sk;
    auto* c_sketch = app.add_subcommand("sketch", "Build a sketch and write it to a sketch file");
    add_common(c_sketch, sk.common);
    c_sketch->add_option("--kind", sk.kind, "osnap, ose-ie, less-ic, less-ie, gaussian-dense, rademacher-dense")
        ->required();
    c_sketch->add_option("--m", sk.m, "Rows");
    c_sketch->add_option("--n", sk.n, "Columns (ambient dimension)");
    c_sketch->add_option("--p", sk.p, "Per-entry variance p");
    c_sketch->add_option("--s", sk.s, "Sparsity s = p*m");
    c_sketch->add_option("--degree-k", sk.degree_k, "Independence degree K (0 = fully independent)");
    c_sketch->add_option("--d", sk.d, "Subspace dimension (for default parameters and K)");
    c_sketch->add_option("--eps", sk.eps, "Target distortion")->capture_default_str();
    c_sketch->add_option("--delta", sk.delta, "Failure probability")->capture_default_str();
    c_sketch->add_option("--scores", sk.scores, "Leverage score JSON (LESS kinds)");

    ApplyArgs ap;
    auto* c_apply = app.add_subcommand("apply", "Apply a sketch file to a Matrix Market matrix");
    add_common(c_apply, ap.common);
    c_apply->add_option("sketch", ap.sketch, "Sketch file")->required();
    c_apply->add_option("matrix", ap.matrix, "Matrix Market input")->required();

    LeverageArgs lv;
    auto* c_lev = app.add_subcommand("leverage", "Exact or approximate leverage scores");
    add_common(c_lev, lv.common);
    c_lev->add_option("matrix", lv.matrix, "Matrix Market input")->required();
    auto* exact_flag = c_lev->add_flag("--exact", lv.exact, "Exact scores from a QR factorization");
    c_lev->add_option("--gamma", lv.gamma, "Trade-off: beta1 = O(n^gamma) with O(1/gamma) test vectors")
        ->capture_default_str()
        ->excludes(exact_flag);
    c_lev->add_flag("--validate", lv.validate, "Check the scores against exact ones");
    c_lev->add_option("--report", lv.report, "JSON run report");

    VerifyArgs vf;
    auto* c_verify = app.add_subcommand("verify", "Run an experiment described by a JSON config");
    add_common(c_verify, vf.common);
    c_verify->add_option("--config", vf.config, "Experiment config (JSON)")->required();

    BenchArgs bn;
    auto* c_bench = app.add_subcommand("bench", "Parameter sweeps (CSV) and calibration (JSON)");
    add_common(c_bench, bn.common);
    c_bench->add_option("--sweep", bn.sweep, "eps, m, s or calibrate")->required();
    c_bench->add_option("--kind", bn.kind, "osnap or ose-ie")->capture_default_str();
    c_bench->add_option("--d", bn.d)->capture_default_str();
    c_bench->add_option("--n", bn.n)->capture_default_str();
    c_bench->add_option("--eps", bn.eps, "Distortion for m/s sweeps and calibration")->capture_default_str();
    c_bench->add_option("--delta", bn.delta, "Failure probability")->capture_default_str();
    c_bench->add_option("--eps-list", bn.eps_list, "Distortions for the eps sweep")->delimiter(',');
    c_bench->add_option("--m-list", bn.m_list, "Rows for the m sweep")->delimiter(',');
    c_bench->add_option("--s-list", bn.s_list, "Sparsities for the s sweep")->delimiter(',');
    c_bench->add_option("--m", bn.m, "Fixed rows (s sweep)");
    c_bench->add_option("--s", bn.s, "Fixed sparsity (m sweep)");
    c_bench->add_option("--c-m", bn.c_m, "m = C_m (d + ln(1/delta)) / eps^2 for the eps sweep");
    c_bench->add_option("--trials", bn.trials)->capture_default_str();

    PipelineArgs pl;
    auto* c_pipe = app.add_subcommand("pipeline", "Fast subspace embedding of a Matrix Market matrix");
    add_common(c_pipe, pl.common);
    c_pipe->add_option("matrix", pl.matrix, "Matrix Market input")->required();
    c_pipe->add_option("--eps", pl.eps, "Target distortion")->capture_default_str();
    c_pipe->add_option("--delta", pl.delta, "Failure probability")->capture_default_str();
    c_pipe->add_option("--gamma", pl.gamma, "Leverage trade-off exponent")->capture_default_str();
    c_pipe->add_option("--kind", pl.kind, "less-ic, less-ie, osnap, ose-ie or gaussian-dense")->capture_default_str();
    c_pipe->add_flag("--validate", pl.validate, "Measure distortion against an exact orthonormal basis");
    c_pipe->add_option("--m", pl.m, "Override rows");
    c_pipe->add_option("--s", pl.s, "Override sparsity (s for osnap, p*m otherwise)");
    c_pipe->add_option("--degree-k", pl.degree_k, "Override independence degree");
    c_pipe->add_option("--report", pl.report, "JSON run report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_sketch) return run_sketch(sk);
        if (*c_apply) return run_apply(ap);
        if (*c_lev) return run_leverage(lv);
        if (*c_verify) return run_verify(vf, *c_verify);
        if (*c_bench) return run_bench(bn);
        if (*c_pipe) return run_pipeline(pl);
    } catch (const sose::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
