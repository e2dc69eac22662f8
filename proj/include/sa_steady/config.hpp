#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sa_steady/engine.hpp"
#include "sa_steady/error.hpp"
#include "sa_steady/experiments.hpp"
#include "sa_steady/json_util.hpp"
#include "sa_steady/models.hpp"
#include "sa_steady/noise.hpp"

namespace sa_steady {

inline const std::vector<std::string>& study_names() {
    static const std::vector<std::string> names = {"simulate", "wasserstein", "tail", "gibbs", "markov", "audit", "exch-pair"};
    return names;
}

/// Fully resolved run description. Every default is filled in, so the echo
/// written next to the results re-runs the identical study.
struct RunConfig {
    std::string study;
    std::string model_name;
    json model_params = json::object();
    json noise = nullptr;  ///< normalized noise block, null for exch-pair
    std::vector<double> alphas;
    long long n_replicas = 100000;
    std::optional<long long> n_steps;  ///< empty means the regime default
    long long burn_in = -1;            ///< negative means n_steps / 2
    std::uint64_t seed = 0;
    std::string output_dir = "sa_steady_out";
    int n_proj = kDefaultProjections;
    int n_boot = kBootstrapResamples;
    std::string reference = "auto";
    bool sharper_second_moment = false;
    std::vector<double> a_grid;  ///< tail levels, tail and markov studies
    std::optional<Vec> zeta;
    std::optional<double> dw_override;
    double gibbs_time_units = 10.0;
    std::optional<double> gibbs_r;
    std::optional<double> gibbs_c_h;
    bool check_iid_equivalence = true;
};

namespace detail {

inline double positive_real(const json& j, const std::string& where) {
    const double v = real_from_json(j, where);
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(where + ": must be finite and > 0");
    return v;
}

inline long long count_value(const json& j, const std::string& where, long long min) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) throw InvalidArgument(where + ": must be an integer");
    const long long v = j.get<long long>();
    if (v < min) throw InvalidArgument(where + ": must be >= " + std::to_string(min));
    return v;
}

inline std::vector<double> real_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw InvalidArgument(where + ": must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(real_from_json(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline json real_list_json(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

/// Canonical noise block: validates keys and fills defaults.
inline json normalize_noise(const json& n) {
    if (!n.is_object()) throw InvalidArgument("noise: must be an object");
    if (!n.contains("kind")) throw InvalidArgument("noise.kind: required");
    const std::string kind = n.at("kind").get<std::string>();
    if (kind == "gaussian") {
        check_keys(n, {"kind", "cov"}, "noise");
        return {{"kind", kind}, {"cov", n.contains("cov") ? n.at("cov") : json(1.0)}};
    }
    if (kind == "signed-pareto") {
        check_keys(n, {"kind", "x_m", "beta"}, "noise");
        return {{"kind", kind},
                {"x_m", n.contains("x_m") ? positive_real(n.at("x_m"), "noise.x_m") : std::sqrt(1.0 / 1.2)},
                {"beta", n.contains("beta") ? positive_real(n.at("beta"), "noise.beta") : 12.0}};
    }
    if (kind == "rademacher") {
        check_keys(n, {"kind", "scale"}, "noise");
        return {{"kind", kind}, {"scale", n.contains("scale") ? real_from_json(n.at("scale"), "noise.scale") : 1.0}};
    }
    if (kind == "discrete") {
        check_keys(n, {"kind", "atoms", "probs"}, "noise");
        if (!n.contains("atoms")) throw InvalidArgument("noise.atoms: required");
        if (!n.contains("probs")) throw InvalidArgument("noise.probs: required");
        return {{"kind", kind}, {"atoms", n.at("atoms")}, {"probs", n.at("probs")}};
    }
    if (kind == "markov") {
        check_keys(n, {"kind", "transition", "emission"}, "noise");
        if (!n.contains("transition")) throw InvalidArgument("noise.transition: required");
        if (!n.contains("emission")) throw InvalidArgument("noise.emission: required");
        return {{"kind", kind}, {"transition", n.at("transition")}, {"emission", n.at("emission")}};
    }
    throw InvalidArgument("noise.kind: unknown kind '" + kind + "'");
}

}  // namespace detail

/// Builds the noise law of a normalized noise block for a model of dimension d.
inline NoiseSpec build_noise(const json& n, int d) {
    const std::string kind = n.at("kind").get<std::string>();
    if (kind == "gaussian") {
        const json& c = n.at("cov");
        if (c.is_number() || c.is_string()) return IidNoise::gaussian(real_from_json(c, "noise.cov") * Mat::Identity(d, d));
        const Mat m = mat_from_json(c, "noise.cov");
        if (m.rows() == 1 && m.cols() == 1 && d > 1) return IidNoise::gaussian(m(0, 0) * Mat::Identity(d, d));
        return IidNoise::gaussian(m);
    }
    if (kind == "signed-pareto") return IidNoise::signed_pareto(n.at("x_m").get<double>(), n.at("beta").get<double>(), d);
    if (kind == "rademacher") return IidNoise::rademacher(real_from_json(n.at("scale"), "noise.scale"), d);
    if (kind == "discrete") {
        Mat atoms = mat_from_json(n.at("atoms"), "noise.atoms");
        if (atoms.rows() == 1 && d == 1) atoms.transposeInPlace();
        return IidNoise::discrete(atoms, vec_from_json(n.at("probs"), "noise.probs"));
    }
    Mat emission = mat_from_json(n.at("emission"), "noise.emission");
    const Mat p = mat_from_json(n.at("transition"), "noise.transition");
    if (emission.rows() == 1 && d == 1 && p.rows() > 1) emission.transposeInPlace();
    return make_markov_noise(p, emission);
}

/// Parses and validates a config object. `study_hint` fills a missing "study".
inline RunConfig parse_config(const json& j, const std::string& study_hint = "") {
    if (!j.is_object()) throw InvalidArgument("config: must be a JSON object");
    check_keys(j,
               {"schema_version", "study", "model", "noise", "alphas", "n_replicas", "n_steps", "burn_in", "seed",
                "output_dir", "metrics", "tail", "gibbs", "markov", "sharper_second_moment"},
               "config");
    if (j.contains("schema_version") && j.at("schema_version") != 1) {
        throw InvalidArgument("schema_version: unsupported version " + j.at("schema_version").dump());
    }
    RunConfig c;
    c.study = j.contains("study") ? j.at("study").get<std::string>() : study_hint;
    if (c.study.empty()) throw InvalidArgument("study: required");
    if (std::find(study_names().begin(), study_names().end(), c.study) == study_names().end()) {
        throw InvalidArgument("study: unknown study '" + c.study + "'");
    }
    if (!study_hint.empty() && c.study != study_hint) {
        throw InvalidArgument("study: config names '" + c.study + "' but the subcommand runs '" + study_hint + "'");
    }
    const bool exch = c.study == "exch-pair";

    if (!exch) {
        if (!j.contains("model")) throw InvalidArgument("model: required");
        const json& m = j.at("model");
        if (!m.is_object()) throw InvalidArgument("model: must be an object");
        check_keys(m, {"name", "params"}, "model");
        if (!m.contains("name")) throw InvalidArgument("model.name: required");
        c.model_name = m.at("name").get<std::string>();
        c.model_params = m.contains("params") ? m.at("params") : json::object();
        if (!c.model_params.is_object()) throw InvalidArgument("model.params: must be an object");
        if (!j.contains("noise")) throw InvalidArgument("noise: required");
        c.noise = detail::normalize_noise(j.at("noise"));
    } else if (j.contains("model") || j.contains("noise")) {
        throw InvalidArgument("model: the exch-pair study has a fixed model and noise");
    }

    if (j.contains("alphas")) {
        c.alphas = detail::real_list(j.at("alphas"), "alphas");
        if (c.alphas.empty()) throw InvalidArgument("alphas: must not be empty");
    } else if (c.study == "gibbs") {
        c.alphas = {0.04, 0.02, 0.01};
    } else if (exch) {
        c.alphas = {0.5, 0.25, 0.1, 0.05};
    } else {
        throw InvalidArgument("alphas: required");
    }
    for (std::size_t i = 0; i < c.alphas.size(); ++i) {
        if (!(c.alphas[i] > 0.0 && c.alphas[i] < 1.0)) {
            throw InvalidArgument("alphas[" + std::to_string(i) + "]: stepsize must lie in (0, 1)");
        }
    }

    if (j.contains("n_replicas")) c.n_replicas = detail::count_value(j.at("n_replicas"), "n_replicas", 1);
    if (j.contains("n_steps")) {
        const json& s = j.at("n_steps");
        if (!(s.is_string() && s.get<std::string>() == "auto")) c.n_steps = detail::count_value(s, "n_steps", 1);
    }
    if (j.contains("burn_in")) {
        const json& b = j.at("burn_in");
        if (!(b.is_string() && b.get<std::string>() == "auto")) c.burn_in = detail::count_value(b, "burn_in", 0);
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
            throw InvalidArgument("seed: must be a nonnegative integer");
        }
        if (j.at("seed").is_number_integer() && j.at("seed").get<long long>() < 0) {
            throw InvalidArgument("seed: must be a nonnegative integer");
        }
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (c.output_dir.empty()) throw InvalidArgument("output_dir: must not be empty");
    if (j.contains("sharper_second_moment")) c.sharper_second_moment = j.at("sharper_second_moment").get<bool>();

    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        check_keys(m, {"n_proj", "n_boot", "reference"}, "metrics");
        if (m.contains("n_proj")) c.n_proj = static_cast<int>(detail::count_value(m.at("n_proj"), "metrics.n_proj", 16));
        if (m.contains("n_boot")) c.n_boot = static_cast<int>(detail::count_value(m.at("n_boot"), "metrics.n_boot", 0));
        if (c.n_boot > 10000) throw InvalidArgument("metrics.n_boot: must be <= 10000");
        if (m.contains("reference")) c.reference = m.at("reference").get<std::string>();
        if (c.reference != "auto" && c.reference != "quantile" && c.reference != "sample") {
            throw InvalidArgument("metrics.reference: must be auto, quantile or sample");
        }
    }

    const bool markov_study = c.study == "markov";
    c.a_grid = markov_study ? default_a_grid(4.0, 8) : default_a_grid();
    auto parse_levels = [&](const json& t, const std::string& where) {
        if (t.contains("a_grid")) {
            if (t.contains("a_max") || t.contains("a_points")) {
                throw InvalidArgument(where + ".a_grid: give either a_grid or a_max/a_points");
            }
            c.a_grid = detail::real_list(t.at("a_grid"), where + ".a_grid");
            for (double a : c.a_grid)
                if (!(a > 0.0)) throw InvalidArgument(where + ".a_grid: levels must be > 0");
        } else if (t.contains("a_max") || t.contains("a_points")) {
            const double mx = t.contains("a_max") ? detail::positive_real(t.at("a_max"), where + ".a_max") : 4.0;
            const int pts = t.contains("a_points") ? static_cast<int>(detail::count_value(t.at("a_points"), where + ".a_points", 1))
                                                    : (markov_study ? 8 : 50);
            c.a_grid = default_a_grid(mx, pts);
        }
        if (t.contains("zeta")) c.zeta = vec_from_json(t.at("zeta"), where + ".zeta");
    };
    if (j.contains("tail")) {
        const json& t = j.at("tail");
        check_keys(t, {"a_grid", "a_max", "a_points", "zeta", "dw_override"}, "tail");
        parse_levels(t, "tail");
        if (t.contains("dw_override") && !t.at("dw_override").is_null()) {
            const double v = real_from_json(t.at("dw_override"), "tail.dw_override");
            if (!(v >= 0.0)) throw InvalidArgument("tail.dw_override: must be >= 0");
            c.dw_override = v;
        }
    }
    if (j.contains("markov")) {
        const json& t = j.at("markov");
        check_keys(t, {"a_grid", "a_max", "a_points", "zeta", "check_iid_equivalence"}, "markov");
        parse_levels(t, "markov");
        if (t.contains("check_iid_equivalence")) c.check_iid_equivalence = t.at("check_iid_equivalence").get<bool>();
    }
    if (j.contains("gibbs")) {
        const json& g = j.at("gibbs");
        check_keys(g, {"time_units", "R", "C_h"}, "gibbs");
        if (g.contains("time_units")) c.gibbs_time_units = detail::positive_real(g.at("time_units"), "gibbs.time_units");
        if (g.contains("R") && !g.at("R").is_null()) c.gibbs_r = detail::positive_real(g.at("R"), "gibbs.R");
        if (g.contains("C_h") && !g.at("C_h").is_null()) c.gibbs_c_h = detail::positive_real(g.at("C_h"), "gibbs.C_h");
    }
    return c;
}

inline RunConfig load_config(const std::string& path, const std::string& study_hint = "") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config(j, study_hint);
}

/// The resolved config; parse_config(to_json(c)) == c.
inline json to_json(const RunConfig& c) {
    json j = {{"schema_version", 1},
              {"study", c.study},
              {"alphas", detail::real_list_json(c.alphas)},
              {"n_replicas", c.n_replicas},
              {"n_steps", c.n_steps ? json(*c.n_steps) : json("auto")},
              {"burn_in", c.burn_in >= 0 ? json(c.burn_in) : json("auto")},
              {"seed", c.seed},
              {"output_dir", c.output_dir},
              {"metrics", {{"n_proj", c.n_proj}, {"n_boot", c.n_boot}, {"reference", c.reference}}},
              {"sharper_second_moment", c.sharper_second_moment}};
    if (c.study != "exch-pair") {
        j["model"] = {{"name", c.model_name}, {"params", c.model_params}};
        j["noise"] = c.noise;
    }
    json levels = {{"a_grid", detail::real_list_json(c.a_grid)}};
    if (c.zeta) levels["zeta"] = vec_to_json(*c.zeta);
    if (c.study == "tail") {
        j["tail"] = levels;
        j["tail"]["dw_override"] = c.dw_override ? json(*c.dw_override) : json(nullptr);
    }
    if (c.study == "markov") {
        j["markov"] = levels;
        j["markov"]["check_iid_equivalence"] = c.check_iid_equivalence;
    }
    if (c.study == "gibbs") {
        j["gibbs"] = {{"time_units", c.gibbs_time_units},
                      {"R", c.gibbs_r ? json(*c.gibbs_r) : json(nullptr)},
                      {"C_h", c.gibbs_c_h ? json(*c.gibbs_c_h) : json(nullptr)}};
    }
    return j;
}

inline SimOptions sim_options(const RunConfig& c, int threads = 0) {
    SimOptions o;
    o.n_replicas = c.n_replicas;
    o.n_steps = c.n_steps;
    o.burn_in = c.burn_in;
    o.seed = c.seed;
    o.threads = threads;
    o.n_proj = c.n_proj;
    o.n_boot = c.n_boot;
    return o;
}

/// Runs every alpha of a plain simulation and summarizes the samples.
inline StudyResult study_simulate(const ModelSpec& model, const NoiseSpec& noise, std::vector<double> alphas,
                                  const SimOptions& sim, std::vector<SteadySample>* samples = nullptr,
                                  double gibbs_time_units = 10.0) {
    alphas = detail::sorted_alphas(std::move(alphas), 1);
    StudyResult r;
    r.study = "simulate";
    r.table.columns = {"alpha", "n", "n_steps", "scaling_exponent", "mean_sq_norm", "mean_sq_norm_se", "diverged",
                       "stationarity_z", "stationarity_ok"};
    for (double a : alphas) {
        const bool gibbs = model.kind == ModelKind::GibbsConvex1d;
        const double e = gibbs ? 1.0 / *model.gibbs_order_h : 0.5;
        const long long steps = gibbs ? default_gibbs_steps(model.ell, a, gibbs_time_units) : default_gaussian_steps(a);
        const SimPlan plan = detail::make_plan(model, noise, a, sim, e, steps);
        SteadySample s = run(plan, sim.threads);
        r.table.add({cell(a), cell(static_cast<long long>(s.rows.rows())), cell(plan.n_steps), cell(e),
                     cell(s.diag.terminal_m2), cell(s.diag.terminal_m2_se), cell(s.diag.diverged),
                     cell(s.diag.stationarity_z), cell(s.diag.stationarity_ok)});
        plot_point(r.plot, "mean_sq_norm", a, s.diag.terminal_m2);
        if (samples) samples->push_back(std::move(s));
    }
    return r;
}

/// Dispatches the configured study.
inline StudyResult run_study(const RunConfig& c, std::vector<SteadySample>* samples = nullptr, int threads = 0) {
    const SimOptions sim = sim_options(c, threads);
    if (c.study == "exch-pair") return study_exch_pair(c.alphas);
    const ModelSpec model = builtin_model(c.model_name, c.model_params);
    const NoiseSpec noise = build_noise(c.noise, model.dim);
    auto need_iid = [&]() -> const IidNoise& {
        if (const auto* n = std::get_if<IidNoise>(&noise)) return *n;
        throw InvalidArgument("noise.kind: the " + c.study + " study needs i.i.d. noise");
    };
    UOptions u;
    u.sharper_second_moment = c.sharper_second_moment;
    if (c.study == "simulate") return study_simulate(model, noise, c.alphas, sim, samples, c.gibbs_time_units);
    if (c.study == "wasserstein") {
        RateOptions o;
        o.sim = sim;
        o.reference = c.reference;
        o.u = u;
        return study_wasserstein_rate(model, need_iid(), c.alphas, o);
    }
    if (c.study == "tail") {
        TailOptions o;
        o.sim = sim;
        o.a_grid = c.a_grid;
        o.zeta = c.zeta;
        o.dw_override = c.dw_override;
        o.u = u;
        return study_tail_envelope(model, need_iid(), c.alphas, o);
    }
    if (c.study == "gibbs") {
        GibbsOptions o;
        o.sim = sim;
        o.time_units = c.gibbs_time_units;
        o.r = c.gibbs_r;
        o.c_h = c.gibbs_c_h;
        return study_gibbs_scaling(model, need_iid(), c.alphas, o);
    }
    if (c.study == "markov") {
        const auto* chain = std::get_if<MarkovNoise>(&noise);
        if (!chain) throw InvalidArgument("noise.kind: the markov study needs markov noise");
        MarkovOptions o;
        o.sim = sim;
        o.a_grid = c.a_grid;
        o.zeta = c.zeta;
        o.check_iid_equivalence = c.check_iid_equivalence;
        return study_markov(model, *chain, c.alphas, o);
    }
    return study_moment_audit(model, noise, c.alphas, sim);
}

}  // namespace sa_steady
