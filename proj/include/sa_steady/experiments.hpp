#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sa_steady/engine.hpp"
#include "sa_steady/error.hpp"
#include "sa_steady/format.hpp"
#include "sa_steady/json_util.hpp"
#include "sa_steady/metrics.hpp"
#include "sa_steady/quadrature.hpp"
#include "sa_steady/theory.hpp"

namespace sa_steady {

/// One recorded instance of "empirical <= bound".
///
/// The empirical side gets `slack_se` standard errors of Monte Carlo slack:
/// margin = bound - (empirical - slack_se * std_err) and pass iff margin >= 0.
/// Exact quantities and order comparisons use slack_se = 0.
struct BoundCertificate {
    std::string name;
    double empirical = 0.0;
    double std_err = 0.0;
    double slack_se = 3.0;
    double bound = 0.0;
    double margin = 0.0;
    bool pass = false;
    json context = json::object();
};

inline BoundCertificate certify(std::string name, double empirical, double std_err, double bound, json context,
                                double slack_se = 3.0) {
    BoundCertificate c;
    c.name = std::move(name);
    c.empirical = empirical;
    c.std_err = std_err;
    c.slack_se = slack_se;
    c.bound = bound;
    c.context = std::move(context);
    const double lhs = empirical - slack_se * std_err;
    if (std::isnan(lhs) || std::isnan(bound)) {
        c.margin = kNaN;
        c.pass = false;
    } else if (bound == INFINITY) {
        c.margin = INFINITY;
        c.pass = true;
    } else {
        c.margin = bound - lhs;
        c.pass = c.margin >= 0.0;
    }
    return c;
}

inline json to_json(const BoundCertificate& c) {
    return {{"name", c.name},
            {"empirical", real_to_json(c.empirical)},
            {"std_err", real_to_json(c.std_err)},
            {"slack_se", c.slack_se},
            {"bound", real_to_json(c.bound)},
            {"margin", real_to_json(c.margin)},
            {"pass", c.pass},
            {"context", c.context}};
}

/// Least-squares fit of log(value) on log(alpha).
struct RateFit {
    std::vector<double> alphas;
    std::vector<double> values;
    double slope = kNaN;
    double intercept = kNaN;
    double r2 = kNaN;
};

inline RateFit fit_rate(const std::vector<double>& alphas, const std::vector<double>& values) {
    if (alphas.size() != values.size()) throw InvalidArgument("fit_rate: size mismatch");
    if (alphas.size() < 2) throw InvalidArgument("fit_rate: at least 2 points required");
    for (std::size_t i = 1; i < alphas.size(); ++i)
        if (!(alphas[i] < alphas[i - 1])) throw InvalidArgument("fit_rate: alphas must be strictly decreasing");
    RateFit f;
    f.alphas = alphas;
    f.values = values;
    const double n = static_cast<double>(alphas.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(values[i] > 0.0)) throw InvalidArgument("fit_rate: values must be > 0");
        const double x = std::log(alphas[i]);
        const double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    const double vx = sxx - sx * sx / n;
    const double vy = syy - sy * sy / n;
    const double cxy = sxy - sx * sy / n;
    f.slope = cxy / vx;
    f.intercept = (sy - f.slope * sx) / n;
    f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
    return f;
}

inline json to_json(const RateFit& f) {
    json a = json::array(), v = json::array();
    for (double x : f.alphas) a.push_back(x);
    for (double x : f.values) v.push_back(x);
    return {{"alphas", a}, {"values", v}, {"slope", real_to_json(f.slope)},
            {"intercept", real_to_json(f.intercept)}, {"r2", real_to_json(f.r2)}};
}

/// Rectangular table of preformatted cells.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) {
        if (row.size() != columns.size()) throw Error("table: row has " + std::to_string(row.size()) + " cells, expected " +
                                                      std::to_string(columns.size()));
        rows.push_back(std::move(row));
    }
};

inline std::string cell(double v) { return format_real(v); }
inline std::string cell(long long v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "true" : "false"; }
inline std::string cell(const std::string& v) { return v; }
inline std::string cell(const char* v) { return v; }

inline Table plot_table() { return Table{{"curve", "x", "y"}, {}}; }

inline void plot_point(Table& t, const std::string& curve, double x, double y) { t.add({curve, cell(x), cell(y)}); }

struct StudyResult {
    std::string study;
    Table table;
    Table plot = plot_table();
    std::vector<BoundCertificate> certificates;
    std::optional<RateFit> fit;
    json summary = json::object();

    bool all_pass() const {
        return std::all_of(certificates.begin(), certificates.end(), [](const auto& c) { return c.pass; });
    }
};

/// Simulation knobs shared by every study.
struct SimOptions {
    long long n_replicas = 100000;
    std::optional<long long> n_steps;  ///< fixed length; otherwise the regime's default policy
    long long burn_in = -1;
    std::uint64_t seed = 0;
    int threads = 0;
    int n_proj = kDefaultProjections;
    int n_boot = kBootstrapResamples;
};

namespace detail {

inline json model_context(const ModelSpec& m) { return {{"name", m.name}, {"params", m.params}}; }

inline json noise_context(const IidNoise& n) {
    json j = {{"kind", to_string(n.kind)}, {"dim", n.dim}};
    switch (n.kind) {
        case IidKind::Gaussian: j["cov"] = mat_to_json(n.cov); break;
        case IidKind::SignedPareto: j["x_m"] = n.x_m; j["beta"] = n.beta; break;
        case IidKind::Rademacher: j["scale"] = n.scale; break;
        case IidKind::Discrete: j["atoms"] = mat_to_json(n.atoms); j["probs"] = vec_to_json(n.probs); break;
    }
    return j;
}

inline json noise_context(const MarkovNoise& n) {
    return {{"kind", "markov"}, {"transition", mat_to_json(n.transition)}, {"emission", mat_to_json(n.emission)}};
}

inline json noise_context(const NoiseSpec& n) {
    return std::visit([](const auto& x) { return noise_context(x); }, n);
}

inline json run_context(const std::string& study, const SimPlan& p) {
    return {{"study", study},
            {"alpha", p.alpha},
            {"model", model_context(p.model)},
            {"noise", noise_context(p.noise)},
            {"seed", p.seed},
            {"stream", p.stream_id()},
            {"n_replicas", p.n_replicas},
            {"n_steps", p.n_steps},
            {"burn_in", p.effective_burn_in()},
            {"scaling_exponent", p.scaling_exponent}};
}

inline SimPlan make_plan(const ModelSpec& model, NoiseSpec noise, double alpha, const SimOptions& o, double exponent,
                         long long default_steps) {
    SimPlan p;
    p.model = model;
    p.noise = std::move(noise);
    p.alpha = alpha;
    p.n_replicas = o.n_replicas;
    p.n_steps = o.n_steps.value_or(default_steps);
    p.burn_in = o.burn_in;
    p.scaling_exponent = exponent;
    p.seed = o.seed;
    return p;
}

/// Alphas sorted strictly decreasing; rejects duplicates and values outside (0, 1).
inline std::vector<double> sorted_alphas(std::vector<double> a, std::size_t min_points) {
    if (a.size() < min_points) {
        throw InvalidArgument("alphas: at least " + std::to_string(min_points) + " grid points required");
    }
    for (double x : a)
        if (!(x > 0.0 && x < 1.0)) throw InvalidArgument("alphas: every stepsize must lie in (0, 1)");
    std::sort(a.begin(), a.end(), std::greater<>());
    for (std::size_t i = 1; i < a.size(); ++i)
        if (!(a[i] < a[i - 1])) throw InvalidArgument("alphas: duplicate stepsize " + format_real(a[i]));
    return a;
}

inline void require_geometric(const std::vector<double>& a) {
    const double r = a[1] / a[0];
    for (std::size_t i = 2; i < a.size(); ++i) {
        if (std::abs(a[i] / a[i - 1] - r) > 1e-9 * r) throw InvalidArgument("alphas: grid must be geometric");
    }
}

inline double rate_scale(double alpha) { return std::sqrt(alpha) * std::log(1.0 / alpha); }

inline std::uint64_t boot_seed(const SimPlan& p) { return stream_key(p.seed, p.stream_id(), 0xb0075ULL); }

/// W1 between a scaled sample and N(0, sigma_y): exact quantiles in 1-d, a
/// fresh Gaussian sample of equal size otherwise.
inline W1Estimate w1_to_gaussian(const Mat& rows, const SpdMat& sigma_y, const SimPlan& plan, const SimOptions& o,
                                 bool use_quantile) {
    if (rows.cols() == 1 && use_quantile) {
        const double sd = std::sqrt(sigma_y.mat()(0, 0));
        return w1_to_quantile(column_values(rows), [sd](double u) { return sd * normal_quantile(u); }, boot_seed(plan),
                              o.n_boot);
    }
    Rng ref(stream_key(plan.seed, plan.stream_id(), 0x7ef5a3b1ULL));
    const Mat z = sample_gaussian(sigma_y, rows.rows(), ref);
    if (rows.cols() == 1) return w1_sorted_1d(column_values(rows), column_values(z), boot_seed(plan), o.n_boot);
    return w1_sliced(rows, z, o.n_proj, ref, o.n_boot);
}

inline std::vector<double> projection(const Mat& rows, const Vec& zeta) {
    std::vector<double> v(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) v[static_cast<std::size_t>(i)] = rows.row(i).dot(zeta);
    return v;
}

inline Vec resolve_zeta(const std::optional<Vec>& zeta, int d) {
    if (zeta) {
        if (zeta->size() != d) throw InvalidArgument("zeta: dimension mismatch");
        if (std::abs(zeta->norm() - 1.0) > 1e-12) throw InvalidArgument("zeta: must be a unit vector");
        return *zeta;
    }
    if (d != 1) throw InvalidArgument("zeta: a unit direction is required when d > 1");
    return Vec::Ones(1);
}

struct TailWorst {
    double a = kNaN;
    double err = 0.0;
    double se = 0.0;
    double bound = kNaN;
    double margin = INFINITY;
};

/// Worst level of |P(<Y,zeta> > a) - P(Z_zeta > a)| <= U' alpha^{1/4} log^{1/2}(1/alpha) / a.
inline TailWorst worst_tail(const Mat& rows, const Vec& zeta, const SpdMat& sigma_y, double u_tail, double alpha,
                            const std::vector<double>& a_grid) {
    const auto est = tail_probs(rows, zeta, a_grid);
    const double s = std::sqrt(zeta.dot(sigma_y.mat() * zeta));
    const double scale = std::pow(alpha, 0.25) * std::sqrt(std::log(1.0 / alpha));
    TailWorst w;
    for (const auto& t : est) {
        const double err = std::abs(t.p_hat - normal_sf(t.a / s));
        const double se = std::sqrt(t.p_hat * (1.0 - t.p_hat) / static_cast<double>(t.n));
        const double bound = u_tail * scale / t.a;
        const double margin = bound - (err - 3.0 * se);
        if (margin < w.margin || std::isnan(margin)) w = {t.a, err, se, bound, margin};
    }
    return w;
}

inline std::string alpha_tag(double a) { return "alpha=" + format_real(a); }

inline StudyResult failed_run(StudyResult r, const std::string& cert, const SimPlan& p, const std::string& err) {
    json ctx = run_context(r.study, p);
    ctx["error"] = err;
    r.certificates.push_back(certify(cert + " " + alpha_tag(p.alpha), kNaN, 0.0, kNaN, ctx, 0.0));
    return r;
}

}  // namespace detail

inline std::vector<double> default_a_grid(double max = 4.0, int points = 50) {
    if (!(max > 0.0) || points < 1) throw InvalidArgument("a_grid: need max > 0 and at least one point");
    std::vector<double> g;
    for (int i = 1; i <= points; ++i) g.push_back(max * i / points);
    return g;
}

// ---------------------------------------------------------------------------
// Wasserstein rate

struct RateOptions {
    SimOptions sim;
    std::string reference = "auto";  ///< auto | quantile | sample
    UOptions u;
};

/// Empirical W1 to N(0, Sigma_Y) on a geometric alpha grid, certified under
/// U sqrt(alpha) log(1/alpha), with a log-log slope fit.
inline StudyResult study_wasserstein_rate(const ModelSpec& model, const IidNoise& noise, std::vector<double> alphas,
                                          const RateOptions& opt = {}) {
    alphas = detail::sorted_alphas(std::move(alphas), 4);
    detail::require_geometric(alphas);
    if (opt.reference != "auto" && opt.reference != "quantile" && opt.reference != "sample") {
        throw InvalidArgument("reference: must be auto, quantile or sample");
    }
    const ConstantLedger ledger = build_iid_ledger(model, noise, opt.u);
    const SpdMat sigma_y(ledger.sigma_y);
    const bool quantile = opt.reference != "sample";

    StudyResult r;
    r.study = "wasserstein";
    r.table.columns = {"alpha", "n", "n_steps", "w1", "w1_se", "w1_method", "U", "bound", "pass", "ks_gauss",
                       "diverged", "stationarity_z"};
    r.summary = {{"constant_name", ledger.constant_name}, {"U", real_to_json(ledger.U)}, {"sigma_y", mat_to_json(ledger.sigma_y)}};
    const std::string cname = ledger.constant_name + " wasserstein";

    std::vector<double> fit_a, fit_w;
    long long largest_diverged = 0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double a = alphas[i];
        const SimPlan plan = detail::make_plan(model, noise, a, opt.sim, 0.5, default_gaussian_steps(a));
        SteadySample s;
        try {
            s = run(plan, opt.sim.threads);
        } catch (const DivergenceError& e) {
            r = detail::failed_run(std::move(r), cname, plan, e.what());
            continue;
        }
        const W1Estimate w = detail::w1_to_gaussian(s.rows, sigma_y, plan, opt.sim, quantile);
        const double bound = ledger.U * detail::rate_scale(a);
        json ctx = detail::run_context(r.study, plan);
        ctx["w1_method"] = w.method_name();
        auto c = certify(cname + " " + detail::alpha_tag(a), w.value, w.mc_std_err, bound, ctx);
        double ks = kNaN;
        if (model.dim == 1) {
            const double sd = std::sqrt(ledger.sigma_y(0, 0));
            ks = ks_distance(column_values(s.rows), [sd](double x) { return normal_cdf(x / sd); });
        }
        r.table.add({cell(a), cell(static_cast<long long>(s.rows.rows())), cell(plan.n_steps), cell(w.value),
                     cell(w.mc_std_err), w.method_name(), cell(ledger.U), cell(bound), cell(c.pass), cell(ks),
                     cell(s.diag.diverged), cell(s.diag.stationarity_z)});
        plot_point(r.plot, "w1", a, w.value);
        plot_point(r.plot, "bound", a, bound);
        r.certificates.push_back(std::move(c));
        if (i == 0) largest_diverged = s.diag.diverged;
        if (i == 0 && largest_diverged > 0) continue;  // pre-asymptotic contamination
        if (w.value > 0.0) {
            fit_a.push_back(a);
            fit_w.push_back(w.value);
        }
    }
    if (fit_a.size() >= 2) {
        r.fit = fit_rate(fit_a, fit_w);
        r.summary["fit"] = to_json(*r.fit);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Tail envelope

struct TailOptions {
    SimOptions sim;
    std::vector<double> a_grid = default_a_grid();
    std::optional<Vec> zeta;
    std::optional<double> dw_override;  ///< replaces min(empirical W1, U sqrt(alpha) log(1/alpha))
    UOptions u;
};

/// Empirical tail P(<Y, zeta> > a) against the non-uniform envelope around the
/// Gaussian tail, one block of rows per alpha.
inline StudyResult study_tail_envelope(const ModelSpec& model, const IidNoise& noise, std::vector<double> alphas,
                                       const TailOptions& opt = {}) {
    alphas = detail::sorted_alphas(std::move(alphas), 1);
    const Vec zeta = detail::resolve_zeta(opt.zeta, model.dim);
    if (opt.a_grid.empty()) throw InvalidArgument("a_grid: must not be empty");
    for (double a : opt.a_grid)
        if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("a_grid: levels must be finite and > 0");
    if (opt.dw_override && !(*opt.dw_override >= 0.0)) throw InvalidArgument("dw_override: must be >= 0");
    const ConstantLedger ledger = build_iid_ledger(model, noise, opt.u);
    const SpdMat sigma_y(ledger.sigma_y);
    const double s_dir = std::sqrt(zeta.dot(sigma_y.mat() * zeta));

    StudyResult r;
    r.study = "tail";
    r.table.columns = {"a", "p_hat", "gauss_tail", "env_lo", "env_hi", "pass", "alpha"};
    r.summary = {{"constant_name", ledger.constant_name}, {"U", real_to_json(ledger.U)},
                 {"U_tail", real_to_json(ledger.U_tail)}, {"zeta", vec_to_json(zeta)}, {"per_alpha", json::array()}};

    for (double a : alphas) {
        const SimPlan plan = detail::make_plan(model, noise, a, opt.sim, 0.5, default_gaussian_steps(a));
        SteadySample s;
        try {
            s = run(plan, opt.sim.threads);
        } catch (const DivergenceError& e) {
            r = detail::failed_run(std::move(r), "tail envelope", plan, e.what());
            continue;
        }
        const std::vector<double> proj = detail::projection(s.rows, zeta);
        const W1Estimate w =
            w1_to_quantile(proj, [s_dir](double u) { return s_dir * normal_quantile(u); }, detail::boot_seed(plan), opt.sim.n_boot);
        const double theory_dw = ledger.U * detail::rate_scale(a);
        const double dw = opt.dw_override.value_or(std::min(w.value, theory_dw));
        const double rho = optimized_rho(dw);
        const auto est = tail_probs(s.rows, zeta, opt.a_grid);

        double worst_excess = 0.0;
        double worst_a = kNaN;
        long long inside = 0;
        for (const auto& t : est) {
            const TailEnvelope env = tail_envelope(t.a, zeta, sigma_y, dw, rho);
            const bool ok = t.ci_hi >= env.lower && t.ci_lo <= env.upper;
            const double excess = std::max({0.0, env.lower - t.ci_hi, t.ci_lo - env.upper});
            if (excess > worst_excess) {
                worst_excess = excess;
                worst_a = t.a;
            }
            inside += ok ? 1 : 0;
            r.table.add({cell(t.a), cell(t.p_hat), cell(env.center), cell(env.lower), cell(env.upper), cell(ok), cell(a)});
            const std::string tag = detail::alpha_tag(a);
            plot_point(r.plot, "ecdf " + tag, t.a, 1.0 - t.p_hat);
            plot_point(r.plot, "gauss_cdf " + tag, t.a, 1.0 - env.center);
            plot_point(r.plot, "env_lo_cdf " + tag, t.a, 1.0 - env.upper);
            plot_point(r.plot, "env_hi_cdf " + tag, t.a, 1.0 - env.lower);
        }
        json ctx = detail::run_context(r.study, plan);
        ctx["dW"] = dw;
        ctx["rho"] = rho;
        ctx["levels"] = opt.a_grid.size();
        ctx["worst_a"] = real_to_json(worst_a);
        r.certificates.push_back(certify("tail envelope " + detail::alpha_tag(a), worst_excess, 0.0, 0.0, ctx, 0.0));

        const auto tw = detail::worst_tail(s.rows, zeta, sigma_y, ledger.U_tail, a, opt.a_grid);
        json ctx2 = detail::run_context(r.study, plan);
        ctx2["a"] = tw.a;
        r.certificates.push_back(certify(ledger.constant_name + "' tail " + detail::alpha_tag(a), tw.err, tw.se, tw.bound, ctx2));

        r.summary["per_alpha"].push_back({{"alpha", a},
                                          {"w1_empirical", w.value},
                                          {"w1_theory", real_to_json(theory_dw)},
                                          {"dW", dw},
                                          {"rho", rho},
                                          {"inside", inside},
                                          {"levels", opt.a_grid.size()}});
    }
    return r;
}

// ---------------------------------------------------------------------------
// Gibbs scaling

struct GibbsOptions {
    SimOptions sim;
    double time_units = 10.0;
    std::optional<double> r;    ///< moment constant R of the Gibbs bound, when known
    std::optional<double> c_h;  ///< Stein-regularity constant C_h, when known
    int histogram_bins = 80;
};

/// Runs each alpha once with exponent 1/h and compares it with the same
/// iterates rescaled by sqrt(alpha): adjacent-alpha two-sample KS under both
/// scalings, and W1 of the correctly scaled sample to the Gibbs law.
inline StudyResult study_gibbs_scaling(const ModelSpec& model, const IidNoise& noise, std::vector<double> alphas,
                                       const GibbsOptions& opt = {}) {
    if (model.kind != ModelKind::GibbsConvex1d) throw InvalidArgument("model: the Gibbs study needs a Gibbs model");
    const int ell = model.ell;
    if (ell < 2 || ell > 4) throw InvalidArgument("model.params.ell: the Gibbs study supports ell in {2, 3, 4}");
    if (noise.dim != 1) throw InvalidArgument("noise: the Gibbs study is one-dimensional");
    if (noise.kind != IidKind::Gaussian && noise.kind != IidKind::SignedPareto) {
        throw InvalidArgument("noise.kind: the Gibbs study supports gaussian and signed-pareto noise");
    }
    if (!(opt.time_units > 0.0)) throw InvalidArgument("gibbs.time_units: must be > 0");
    alphas = detail::sorted_alphas(std::move(alphas), 2);
    const int h = *model.gibbs_order_h;
    const double e_correct = 1.0 / h;
    const double variance = noise.cov(0, 0);
    const GibbsDensity gibbs(h, *model.gibbs_top_deriv, variance);
    std::optional<double> u5;
    if (opt.r && opt.c_h) u5 = gibbs_constant(model, *opt.r, *opt.c_h);

    StudyResult r;
    r.study = "gibbs";
    r.table.columns = {"alpha", "scaling", "exponent", "n", "n_steps", "ks_prev", "ks_prev_p", "w1_gibbs", "w1_gibbs_se",
                       "diverged"};
    r.summary = {{"h", h}, {"kappa", gibbs.kappa()}, {"normalizer", gibbs.normalizer()},
                 {"excess_kurtosis", gibbs.excess_kurtosis()}, {"U5", u5 ? json(*u5) : json(nullptr)}};

    struct Point {
        double alpha;
        std::vector<double> correct, baseline;
        W1Estimate w_correct, w_baseline;
        SimPlan plan;
        long long diverged;
    };
    std::vector<Point> pts;
    for (double a : alphas) {
        const SimPlan plan =
            detail::make_plan(model, noise, a, opt.sim, e_correct, default_gibbs_steps(ell, a, opt.time_units));
        SteadySample s;
        try {
            s = run(plan, opt.sim.threads);
        } catch (const DivergenceError& e) {
            r = detail::failed_run(std::move(r), "gibbs run", plan, e.what());
            continue;
        }
        Point p{a, column_values(s.rows), column_values(rescale(s, 0.5).rows), {}, {}, plan, s.diag.diverged};
        auto q = [&gibbs](double u) { return gibbs.quantile(u); };
        p.w_correct = w1_to_quantile(p.correct, q, detail::boot_seed(plan), opt.sim.n_boot);
        p.w_baseline = w1_to_quantile(p.baseline, q, detail::boot_seed(plan), 0);
        pts.push_back(std::move(p));
    }

    double range = 0.0;
    for (const auto& p : pts) {
        for (const auto* v : {&p.correct, &p.baseline}) {
            std::vector<double> abs(v->size());
            std::transform(v->begin(), v->end(), abs.begin(), [](double x) { return std::abs(x); });
            const std::size_t k = static_cast<std::size_t>(0.999 * static_cast<double>(abs.size()));
            if (k < abs.size()) {
                std::nth_element(abs.begin(), abs.begin() + static_cast<std::ptrdiff_t>(k), abs.end());
                range = std::max(range, abs[k]);
            }
        }
    }
    auto histogram = [&](const std::string& curve, const std::vector<double>& v) {
        const int bins = opt.histogram_bins;
        std::vector<long long> count(static_cast<std::size_t>(bins), 0);
        const double width = 2.0 * range / bins;
        for (double x : v) {
            const int b = static_cast<int>(std::floor((x + range) / width));
            if (b >= 0 && b < bins) ++count[static_cast<std::size_t>(b)];
        }
        for (int b = 0; b < bins; ++b) {
            plot_point(r.plot, curve, -range + (b + 0.5) * width,
                       static_cast<double>(count[static_cast<std::size_t>(b)]) / (static_cast<double>(v.size()) * width));
        }
    };

    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point& p = pts[i];
        KsTwoSample kc{kNaN, kNaN}, kb{kNaN, kNaN};
        if (i > 0) {
            kc = ks_two_sample(pts[i - 1].correct, p.correct);
            kb = ks_two_sample(pts[i - 1].baseline, p.baseline);
            const std::string pair = "alpha=" + format_real(pts[i - 1].alpha) + "->" + format_real(p.alpha);
            json ctx = detail::run_context(r.study, p.plan);
            ctx["previous_alpha"] = pts[i - 1].alpha;
            r.certificates.push_back(certify("ks stabilization " + pair, kc.d, 0.0, kb.d, ctx, 0.0));
            r.certificates.push_back(
                certify("w1 gibbs decrease " + pair, p.w_correct.value, 0.0, pts[i - 1].w_correct.value, ctx, 0.0));
        }
        if (u5) {
            r.certificates.push_back(certify("U5 gibbs " + detail::alpha_tag(p.alpha), p.w_correct.value,
                                             p.w_correct.mc_std_err, *u5 * std::pow(p.alpha, e_correct),
                                             detail::run_context(r.study, p.plan)));
        }
        const auto n = static_cast<long long>(p.correct.size());
        r.table.add({cell(p.alpha), "correct", cell(e_correct), cell(n), cell(p.plan.n_steps), cell(kc.d),
                     cell(kc.p_value), cell(p.w_correct.value), cell(p.w_correct.mc_std_err), cell(p.diverged)});
        r.table.add({cell(p.alpha), "baseline", cell(0.5), cell(n), cell(p.plan.n_steps), cell(kb.d), cell(kb.p_value),
                     cell(p.w_baseline.value), cell(kNaN), cell(p.diverged)});
        if (range > 0.0) {
            histogram("correct " + detail::alpha_tag(p.alpha), p.correct);
            histogram("baseline " + detail::alpha_tag(p.alpha), p.baseline);
        }
    }
    if (range > 0.0) {
        for (int b = 0; b <= 200; ++b) {
            const double y = -range + 2.0 * range * b / 200.0;
            plot_point(r.plot, "gibbs", y, gibbs.pdf(y));
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Markov noise

struct MarkovOptions {
    SimOptions sim;
    std::vector<double> a_grid = default_a_grid(4.0, 8);
    std::optional<Vec> zeta;
    bool check_iid_equivalence = true;
};

/// Coupled (X, Z) recursion under finite-state Markov noise, certified under
/// U4(alpha) sqrt(alpha) log(1/alpha) and the U4' tail bound.
inline StudyResult study_markov(const ModelSpec& model, const MarkovNoise& chain, std::vector<double> alphas,
                                const MarkovOptions& opt = {}) {
    if (model.kind == ModelKind::GibbsConvex1d) throw InvalidArgument("model: Markov noise is not covered for Gibbs models");
    if (chain.dim != model.dim) throw InvalidArgument("noise: dimension does not match model");
    alphas = detail::sorted_alphas(std::move(alphas), 1);
    const Vec zeta = detail::resolve_zeta(opt.zeta, model.dim);
    const bool zero_noise = chain.sup_xi == 0.0;
    const std::optional<IidNoise> iid = opt.check_iid_equivalence ? iid_equivalent(chain) : std::nullopt;

    StudyResult r;
    r.study = "markov";
    r.table.columns = {"alpha", "n", "n_steps", "var_emp", "var_se", "var_target", "w1", "w1_se", "U4", "w1_bound",
                       "tail_a", "tail_err", "tail_bound", "ks_iid_p", "diverged"};
    r.summary = {{"long_run_cov", mat_to_json(chain.long_run_cov)}, {"zero_noise", zero_noise},
                 {"iid_as_chain", iid.has_value()}};

    for (double a : alphas) {
        const SimPlan plan = detail::make_plan(model, chain, a, opt.sim, 0.5, default_gaussian_steps(a));
        SteadySample s;
        try {
            s = run(plan, opt.sim.threads);
        } catch (const DivergenceError& e) {
            r = detail::failed_run(std::move(r), "U4 wasserstein", plan, e.what());
            continue;
        }
        const MomentSummary ms = moment_summary(s.rows);
        const double var_emp = ms.covariance.trace();
        // trace of the sample covariance has standard error about sqrt(Var|Y - mean|^2 / n)
        double var_se = 0.0;
        {
            double s1 = 0.0, s2 = 0.0;
            for (Eigen::Index i = 0; i < s.rows.rows(); ++i) {
                const double q = (s.rows.row(i).transpose() - ms.mean).squaredNorm();
                s1 += q;
                s2 += q * q;
            }
            const double n = static_cast<double>(s.rows.rows());
            var_se = n > 1 ? std::sqrt(std::max(0.0, s2 / n - (s1 / n) * (s1 / n)) / n) : 0.0;
        }
        const json ctx = detail::run_context(r.study, plan);
        double var_target = 0.0, w1 = 0.0, w1_se = 0.0, u4 = kNaN, w1_bound = kNaN;
        detail::TailWorst tw;
        if (zero_noise) {
            w1 = s.rows.cwiseAbs().maxCoeff();
            r.certificates.push_back(certify("U4 wasserstein " + detail::alpha_tag(a), w1, 0.0, 0.0, ctx, 0.0));
            r.certificates.push_back(certify("U4' tail " + detail::alpha_tag(a), w1, 0.0, 0.0, ctx, 0.0));
            u4 = 0.0;
            w1_bound = 0.0;
        } else {
            const ConstantLedger ledger = build_markov_ledger(model, chain, a);
            const SpdMat sigma_y(ledger.sigma_y);
            var_target = sigma_y.mat().trace();
            const W1Estimate w = detail::w1_to_gaussian(s.rows, sigma_y, plan, opt.sim, true);
            w1 = w.value;
            w1_se = w.mc_std_err;
            u4 = ledger.U;
            w1_bound = ledger.U * detail::rate_scale(a);
            json c1 = ctx;
            c1["w1_method"] = w.method_name();
            r.certificates.push_back(certify("U4 wasserstein " + detail::alpha_tag(a), w1, w1_se, w1_bound, c1));
            tw = detail::worst_tail(s.rows, zeta, sigma_y, ledger.U_tail, a, opt.a_grid);
            json c2 = ctx;
            c2["a"] = tw.a;
            r.certificates.push_back(certify("U4' tail " + detail::alpha_tag(a), tw.err, tw.se, tw.bound, c2));
        }
        double ks_p = kNaN;
        if (iid) {
            SimPlan ip = plan;
            ip.noise = *iid;
            ip.stream = plan.stream_id() ^ 0x11d0u;
            const SteadySample si = run(ip, opt.sim.threads);
            const Vec dir = zeta;
            const KsTwoSample ks = ks_two_sample(detail::projection(s.rows, dir), detail::projection(si.rows, dir));
            ks_p = ks.p_value;
            json c3 = ctx;
            c3["ks"] = ks.d;
            c3["iid_stream"] = ip.stream_id();
            r.certificates.push_back(certify("iid equivalence ks p-value " + detail::alpha_tag(a), 0.01, 0.0, ks_p, c3, 0.0));
        }
        r.table.add({cell(a), cell(static_cast<long long>(s.rows.rows())), cell(plan.n_steps), cell(var_emp), cell(var_se),
                     cell(var_target), cell(w1), cell(w1_se), cell(u4), cell(w1_bound), cell(tw.a), cell(tw.err),
                     cell(tw.bound), cell(ks_p), cell(s.diag.diverged)});
        plot_point(r.plot, "var_emp", a, var_emp);
        plot_point(r.plot, "var_target", a, var_target);
        plot_point(r.plot, "w1", a, w1);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Moment audit

/// Empirical moments of Y against the moment constants: E|Y|^3 <= A for i.i.d.
/// noise (plus E|Y|^2 <= m2/sigma for SGD); second, third and fourth moment
/// bounds under Markov noise.
inline StudyResult study_moment_audit(const ModelSpec& model, const NoiseSpec& noise, std::vector<double> alphas,
                                      const SimOptions& sim = {}) {
    if (model.kind == ModelKind::GibbsConvex1d) throw InvalidArgument("model: no moment constants for Gibbs models");
    alphas = detail::sorted_alphas(std::move(alphas), 1);
    StudyResult r;
    r.study = "audit";
    r.table.columns = {"alpha", "n", "m2", "m2_se", "m3", "m3_se", "m4", "m4_se", "bound_m2", "bound_m3", "bound_m4", "which"};
    const auto* iid = std::get_if<IidNoise>(&noise);
    std::optional<MomentConstants> fixed;
    if (iid) fixed = moment_constant(model, iid->moments);

    for (double a : alphas) {
        const SimPlan plan = detail::make_plan(model, noise, a, sim, 0.5, default_gaussian_steps(a));
        SteadySample s;
        try {
            s = run(plan, sim.threads);
        } catch (const DivergenceError& e) {
            r = detail::failed_run(std::move(r), "moment audit", plan, e.what());
            continue;
        }
        const MomentConstants mc = fixed ? *fixed : markov_moment_constant(model, std::get<MarkovNoise>(noise), a);
        const MomentSummary ms = moment_summary(s.rows);
        const json ctx = detail::run_context(r.study, plan);
        const std::string which = to_string(mc.which);
        const std::string tag = " " + detail::alpha_tag(a);
        r.certificates.push_back(certify("E|Y|^3 <= " + which + tag, ms.m[3], ms.se[3], mc.value_m3, ctx));
        if (!std::isnan(mc.value_m2)) {
            const std::string label = fixed ? "m2/sigma" : which + " second moment";
            r.certificates.push_back(certify("E|Y|^2 <= " + label + tag, ms.m[2], ms.se[2], mc.value_m2, ctx));
        }
        if (!std::isnan(mc.value_m4)) {
            r.certificates.push_back(certify("E|Y|^4 <= " + which + " fourth moment" + tag, ms.m[4], ms.se[4], mc.value_m4, ctx));
        }
        r.table.add({cell(a), cell(ms.n), cell(ms.m[2]), cell(ms.se[2]), cell(ms.m[3]), cell(ms.se[3]), cell(ms.m[4]),
                     cell(ms.se[4]), cell(mc.value_m2), cell(mc.value_m3), cell(mc.value_m4), which});
        plot_point(r.plot, "m3", a, ms.m[3]);
        plot_point(r.plot, "bound_m3", a, mc.value_m3);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Exchangeable pair, f = x^2/2 with standard Gaussian noise

/// Exact W1 between N(0, 1/(2 - alpha)) and N(0, 1/2) against the
/// exchangeable-pair bound. Pure arithmetic.
inline StudyResult study_exch_pair(std::vector<double> alphas) {
    alphas = detail::sorted_alphas(std::move(alphas), 1);
    const double m3 = 2.0 * std::sqrt(2.0 / std::numbers::pi);
    const double m4 = 3.0;
    StudyResult r;
    r.study = "exch-pair";
    r.table.columns = {"alpha", "w1_exact", "bound", "ratio", "pass"};
    r.summary = {{"E|w|^3", m3}, {"E|w|^4", m4}};
    for (double a : alphas) {
        const double w = exch_pair_exact_w1(a);
        const double b = exch_pair_bound_1d(a, m3, m4);
        const json ctx = {{"study", r.study}, {"alpha", a}, {"model", {{"name", "quadratic-sgd"}, {"params", json::object()}}},
                          {"noise", {{"kind", "gaussian"}, {"cov", 1.0}}}};
        auto c = certify("exch-pair " + detail::alpha_tag(a), w, 0.0, b, ctx, 0.0);
        r.table.add({cell(a), cell(w), cell(b), cell(w > 0.0 ? b / w : INFINITY), cell(c.pass)});
        plot_point(r.plot, "w1_exact", a, w);
        plot_point(r.plot, "bound", a, b);
        r.certificates.push_back(std::move(c));
    }
    return r;
}

inline json to_json(const StudyResult& r) {
    json certs = json::array();
    for (const auto& c : r.certificates) certs.push_back(to_json(c));
    return {{"schema_version", 1}, {"study", r.study}, {"all_pass", r.all_pass()}, {"summary", r.summary},
            {"certificates", certs}};
}

}  // namespace sa_steady
