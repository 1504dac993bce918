#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "sose/calibration.hpp"
#include "sose/diagnostics.hpp"
#include "sose/error.hpp"
#include "sose/experiment.hpp"
#include "sose/leverage.hpp"
#include "sose/pipeline.hpp"
#include "sose/sketch.hpp"

namespace sose {

inline constexpr int kExperimentSchemaVersion = 1;

inline nlohmann::json to_json(const SketchSpec& s) {
    return {{"kind", std::string(to_string(s.kind))},
            {"m", s.m},
            {"n", s.n},
            {"p", s.p},
            {"pm", s.pm()},
            {"degree_k", s.degree_k},
            {"seed", s.seed}};
}

inline nlohmann::json to_json(const DistortionReport& r) {
    return {{"s_min", r.s_min},         {"s_max", r.s_max},       {"opnorm_err", r.opnorm_err},
            {"distortion", r.distortion()}, {"eps_target", r.eps_target}, {"pass", r.pass}};
}

inline nlohmann::json to_json(const TrialReport& r) {
    return {{"trials", r.trials},
            {"failures", r.failures},
            {"failure_fraction", r.failure_fraction},
            {"eps", r.eps},
            {"mean_distortion", r.mean_distortion},
            {"quantiles", {{"q50", r.q50}, {"q90", r.q90}, {"q95", r.q95}, {"q99", r.q99}, {"max", r.max_distortion}}}};
}

inline nlohmann::json to_json(const MomentProbe& p) {
    return {{"q", p.q}, {"trials", p.trials}, {"estimate", p.estimate}, {"std_error", p.std_error}};
}

inline nlohmann::json to_json(const ScoreValidation& v) {
    nlohmann::json j{{"pass", v.pass},
                     {"lower_bound_ok", v.lower_bound_ok},
                     {"sum_bound_ok", v.sum_bound_ok},
                     {"worst_lower_margin", v.worst_lower_margin},
                     {"sum_ratio", v.sum_ratio},
                     {"measured_beta1", v.measured_beta1},
                     {"measured_beta2", v.measured_beta2}};
    const std::size_t shown = std::min<std::size_t>(v.violating.size(), 100);
    j["violating"] = std::vector<std::int64_t>(v.violating.begin(), v.violating.begin() + static_cast<std::ptrdiff_t>(shown));
    j["violating_count"] = v.violating.size();
    return j;
}

inline nlohmann::json to_json(const PipelineReport& r) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : r.stages) stages.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    nlohmann::json j{{"kind", std::string(to_string(r.kind))},
                     {"n", r.n},
                     {"d", r.d},
                     {"input_nnz", r.input_nnz},
                     {"m", r.m},
                     {"p", r.p},
                     {"pm", r.pm},
                     {"degree_k", r.degree_k},
                     {"beta1", r.beta1},
                     {"beta2", r.beta2},
                     {"sketch_nnz", r.sketch_nnz},
                     {"nnz_within_bound", r.nnz_within_bound},
                     {"dense_fallback", r.dense_fallback},
                     {"regime_ratio", r.regime_ratio},
                     {"sketch_dominated", r.sketch_dominated},
                     {"stages", stages},
                     {"total_seconds", r.total_seconds},
                     {"warnings", r.warnings}};
    j["nnz_bound"] = r.nnz_bound ? nlohmann::json(*r.nnz_bound) : nlohmann::json(nullptr);
    if (r.validation) j["validation"] = to_json(*r.validation);
    return j;
}

inline nlohmann::json to_json(const Calibration& c) {
    return {{"c_m", c.c_m}, {"c_s", c.c_s}, {"c_e", c.c_e}, {"c_m_less", c.c_m_less}, {"c_l", c.c_l}};
}

inline Calibration calibration_from_json(const nlohmann::json& j) {
    try {
        Calibration c;
        c.c_m = j.at("c_m").get<double>();
        c.c_s = j.at("c_s").get<double>();
        c.c_e = j.at("c_e").get<double>();
        c.c_m_less = j.at("c_m_less").get<double>();
        c.c_l = j.at("c_l").get<double>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad calibration constants: ") + e.what(), 0);
    }
}

inline nlohmann::json to_json(const CalibrationResult& r) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : r.steps)
        steps.push_back({{"constant", s.constant},
                         {"value", s.value},
                         {"m", s.m},
                         {"pm", s.pm},
                         {"worst_failure", s.failure},
                         {"worst_q95", s.q95},
                         {"pass", s.pass}});
    const auto& t = r.target;
    return {{"constants", to_json(r.constants)},
            {"target",
             {{"d", t.d},
              {"n", t.n},
              {"eps", t.eps},
              {"delta", t.delta},
              {"trials", t.trials},
              {"margin", t.margin},
              {"gamma", t.gamma},
              {"less_dims", t.less_dims},
              {"seed", t.seed}}},
            {"steps", steps}};
}

inline nlohmann::json to_json(const SparsityPoint& p) {
    return {{"eps", p.eps},
            {"m", p.m},
            {"s", p.s},
            {"found", p.found},
            {"evaluations", p.evaluations},
            {"haar", to_json(p.trials.haar)},
            {"coordinate", to_json(p.trials.coordinate)}};
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j{{"schema_version", kExperimentSchemaVersion},
                     {"experiment", std::string(to_string(c.experiment))},
                     {"kind", std::string(to_string(c.kind))},
                     {"n", c.n},
                     {"d", c.d},
                     {"eps", c.eps},
                     {"delta", c.delta},
                     {"subspace", std::string(to_string(c.subspace))},
                     {"trials", c.trials},
                     {"q", c.q},
                     {"seed", c.seed},
                     {"tolerance_se", c.tolerance_se}};
    if (c.m) j["m"] = *c.m;
    if (c.sparsity) j["sparsity"] = *c.sparsity;
    if (c.degree_k) j["degree_k"] = *c.degree_k;
    if (c.max_failure) j["max_failure"] = *c.max_failure;
    if (c.expected) j["expected"] = *c.expected;
    return j;
}

/// Reads a verify-command experiment config. Unknown keys are rejected so
/// typos do not silently fall back to defaults.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"schema_version", "experiment", "kind",     "n",           "d",
                                             "m",              "sparsity",   "degree_k", "eps",         "delta",
                                             "subspace",       "trials",     "q",        "seed",        "threads",
                                             "max_failure",    "expected",   "tolerance_se", "calibration"};
    if (!j.is_object()) throw ParseError("experiment config must be a JSON object", 0);
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ParseError("unknown experiment config key '" + key + "'", 0);
    ExperimentConfig c;
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kExperimentSchemaVersion)
            throw ParseError("unsupported experiment schema_version " + std::to_string(version), 0);
        c.experiment = parse_experiment_kind(j.at("experiment").get<std::string>());
        if (j.contains("kind")) c.kind = parse_sketch_kind(j["kind"].get<std::string>());
        if (j.contains("n")) c.n = j["n"].get<std::int64_t>();
        if (j.contains("d")) c.d = j["d"].get<std::int64_t>();
        if (j.contains("m")) c.m = j["m"].get<std::int64_t>();
        if (j.contains("sparsity")) c.sparsity = j["sparsity"].get<double>();
        if (j.contains("degree_k")) c.degree_k = j["degree_k"].get<int>();
        if (j.contains("eps")) c.eps = j["eps"].get<double>();
        if (j.contains("delta")) c.delta = j["delta"].get<double>();
        if (j.contains("subspace")) c.subspace = parse_subspace_kind(j["subspace"].get<std::string>());
        if (j.contains("trials")) c.trials = j["trials"].get<std::int64_t>();
        if (j.contains("q")) c.q = j["q"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
        if (j.contains("max_failure")) c.max_failure = j["max_failure"].get<double>();
        if (j.contains("expected")) c.expected = j["expected"].get<double>();
        if (j.contains("tolerance_se")) c.tolerance_se = j["tolerance_se"].get<double>();
        if (j.contains("calibration")) c.calibration = calibration_from_json(j["calibration"]);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad experiment config: ") + e.what(), 0);
    }
    return c;
}

inline nlohmann::json to_json(const ExperimentResult& r) {
    nlohmann::json j{{"config", to_json(r.config)}, {"spec", to_json(r.spec)}, {"pass", r.pass},
                     {"warnings", r.warnings}};
    if (r.trial) j["embedding"] = to_json(*r.trial);
    if (r.moment) j["moment"] = to_json(*r.moment);
    if (r.expected) j["expected"] = *r.expected;
    return j;
}

}  // namespace sose
