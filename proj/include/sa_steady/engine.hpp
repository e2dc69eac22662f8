#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "sa_steady/error.hpp"
#include "sa_steady/format.hpp"
#include "sa_steady/json_util.hpp"
#include "sa_steady/matlib.hpp"
#include "sa_steady/models.hpp"
#include "sa_steady/noise.hpp"
#include "sa_steady/rng.hpp"

namespace sa_steady {

using NoiseSpec = std::variant<IidNoise, MarkovNoise>;

inline int noise_dim(const NoiseSpec& n) {
    return std::visit([](const auto& x) { return x.dim; }, n);
}

inline json to_json(const NoiseSpec& n) {
    return std::visit([](const auto& x) { return to_json(x); }, n);
}

/// Divergence radius for |X_k|.
inline constexpr double kDivergenceRadius = 1e8;
/// Largest tolerated fraction of divergent replicas.
inline constexpr double kDivergenceBudget = 0.01;

/// One simulation job: n_replicas independent trajectories of length n_steps.
struct SimPlan {
    ModelSpec model;
    NoiseSpec noise;
    double alpha = 0.1;
    long long n_replicas = 1000;
    long long n_steps = 100;
    long long burn_in = -1;          ///< negative means n_steps / 2
    double scaling_exponent = 0.5;   ///< terminal Y = (X - x*) alpha^{-e}
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> stream;  ///< defaults to a key of alpha, making grids order independent
    std::optional<Vec> init_offset;       ///< start at x* + offset instead of x*

    long long effective_burn_in() const { return burn_in < 0 ? n_steps / 2 : burn_in; }
    std::uint64_t stream_id() const { return stream.value_or(real_stream(alpha) ^ real_stream(scaling_exponent)); }
};

struct SampleDiagnostics {
    std::vector<double> max_norm;  ///< per replica, max |X_k| along the trajectory
    long long diverged = 0;
    std::vector<long long> diverged_ids;
    double burnin_m2 = 0.0;  ///< mean |Y|^2 at the burn-in boundary
    double burnin_m2_se = 0.0;
    double terminal_m2 = 0.0;
    double terminal_m2_se = 0.0;
    double stationarity_z = 0.0;
    bool stationarity_ok = true;
};

/// Terminal centered-scaled iterates of every non-divergent replica.
struct SteadySample {
    SimPlan plan;
    Mat rows;
    SampleDiagnostics diag;
};

/// Worker count: SA_STEADY_THREADS if set, else hardware parallelism.
inline int worker_threads() {
    if (const char* env = std::getenv("SA_STEADY_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : static_cast<int>(h);
}

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per worker.
template <class Fn>
void parallel_chunks(long long n, int threads, Fn&& fn) {
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<long long>(n, 1LL << 20))));
    if (threads == 1 || n < 2) {
        fn(0LL, n);
        return;
    }
    std::vector<std::thread> pool;
    const long long chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const long long b = t * chunk;
        const long long e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

/// Default trajectory length in the Gaussian regime, about ten mixing times.
inline long long default_gaussian_steps(double alpha) { return static_cast<long long>(std::ceil(10.0 / alpha)); }

/// Default trajectory length in the Gibbs regime for objective degree 2 ell.
///
/// The relaxation time of the scaled chain is of order alpha^{-(2 - 2/h)} steps,
/// so the length is the larger of 1000 ell ceil(0.01/alpha) and
/// `time_units` alpha^{-(2 - 2/h)}.
inline long long default_gibbs_steps(int ell, double alpha, double time_units = 10.0) {
    const double h = 2.0 * ell;
    const long long base = 1000LL * ell * static_cast<long long>(std::ceil(0.01 / alpha - 1e-12));
    const long long mix = static_cast<long long>(std::ceil(time_units * std::pow(alpha, -(2.0 - 2.0 / h))));
    return std::max(base, mix);
}

namespace detail {

struct ReplicaOut {
    bool diverged = false;
    double max_norm = 0.0;
    double burnin_sq = 0.0;
};

template <class Drift, class NoiseStep>
ReplicaOut simulate_replica(const SimPlan& plan, const Drift& drift, NoiseStep& noise, Rng& rng, double* x, double* f,
                            double* xi, double* y_out) {
    const ModelSpec& m = plan.model;
    const int d = m.dim;
    const double a = plan.alpha;
    const double scale = std::pow(a, -plan.scaling_exponent);
    const long long burn = plan.effective_burn_in();
    const double radius2 = kDivergenceRadius * kDivergenceRadius;
    for (int i = 0; i < d; ++i) x[i] = m.fixed_point(i) + (plan.init_offset ? (*plan.init_offset)(i) : 0.0);
    noise.start(rng);
    ReplicaOut out;
    double max2 = 0.0;
    for (int i = 0; i < d; ++i) max2 += x[i] * x[i];
    for (long long k = 0; k < plan.n_steps; ++k) {
        noise.draw(rng, xi);
        drift(x, f);
        double n2 = 0.0;
        for (int i = 0; i < d; ++i) {
            x[i] += a * (f[i] + xi[i]);
            n2 += x[i] * x[i];
        }
        if (!(n2 <= radius2)) {
            out.diverged = true;
            out.max_norm = std::isfinite(n2) ? std::sqrt(n2) : INFINITY;
            return out;
        }
        max2 = std::max(max2, n2);
        if (k + 1 == burn) {
            double s = 0.0;
            for (int i = 0; i < d; ++i) {
                const double yi = (x[i] - m.fixed_point(i)) * scale;
                s += yi * yi;
            }
            out.burnin_sq = s;
        }
    }
    out.max_norm = std::sqrt(max2);
    for (int i = 0; i < d; ++i) y_out[i] = (x[i] - m.fixed_point(i)) * scale;
    return out;
}

struct IidStep {
    IidSampler sampler;
    void start(Rng&) {}
    void draw(Rng& rng, double* xi) { sampler(rng, xi); }
};

struct MarkovStep {
    const MarkovNoise* chain;
    int state = 0;
    void start(Rng& rng) { state = chain->draw_stationary(rng); }
    void draw(Rng& rng, double* xi) {
        for (int i = 0; i < chain->dim; ++i) xi[i] = chain->emission(state, i);
        state = chain->step(state, rng);
    }
};

inline void validate_plan(const SimPlan& p) {
    if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw InvalidArgument("alphas: stepsize must lie in (0, 1)");
    if (p.n_replicas < 1) throw InvalidArgument("n_replicas: must be >= 1");
    if (p.n_steps < 1) throw InvalidArgument("n_steps: must be >= 1");
    if (p.effective_burn_in() >= p.n_steps) throw InvalidArgument("burn_in: must be < n_steps");
    if (noise_dim(p.noise) != p.model.dim) {
        throw InvalidArgument("noise: dimension " + std::to_string(noise_dim(p.noise)) + " does not match model dimension " +
                              std::to_string(p.model.dim));
    }
    if (p.init_offset && p.init_offset->size() != p.model.dim) {
        throw InvalidArgument("init_offset: dimension mismatch");
    }
    if (!std::isfinite(p.scaling_exponent)) throw InvalidArgument("scaling_exponent: must be finite");
}

}  // namespace detail

/// Simulates every replica of `plan` and returns the terminal scaled iterates.
///
/// Replica r draws from the stream stream_key(seed, stream_id, r); the output is
/// bit-identical for any thread count. Throws DivergenceError when more than 1%
/// of replicas leave the ball of radius 1e8.
inline SteadySample run(const SimPlan& plan, int threads = 0) {
    detail::validate_plan(plan);
    if (threads <= 0) threads = worker_threads();
    const long long n = plan.n_replicas;
    const int d = plan.model.dim;
    Mat all(n, d);
    std::vector<detail::ReplicaOut> outs(static_cast<std::size_t>(n));
    const std::uint64_t stream = plan.stream_id();

    visit_drift(plan.model, [&](const auto& drift) {
        parallel_chunks(n, threads, [&](long long b, long long e) {
            std::vector<double> x(d), f(d), xi(d), y(d);
            for (long long r = b; r < e; ++r) {
                Rng rng(stream_key(plan.seed, stream, static_cast<std::uint64_t>(r)));
                detail::ReplicaOut o;
                if (const auto* iid = std::get_if<IidNoise>(&plan.noise)) {
                    detail::IidStep step{IidSampler(*iid)};
                    o = detail::simulate_replica(plan, drift, step, rng, x.data(), f.data(), xi.data(), y.data());
                } else {
                    detail::MarkovStep step{&std::get<MarkovNoise>(plan.noise)};
                    o = detail::simulate_replica(plan, drift, step, rng, x.data(), f.data(), xi.data(), y.data());
                }
                outs[static_cast<std::size_t>(r)] = o;
                if (!o.diverged)
                    for (int i = 0; i < d; ++i) all(r, i) = y[i];
            }
        });
    });

    SteadySample s;
    s.plan = plan;
    s.diag.max_norm.resize(static_cast<std::size_t>(n));
    for (long long r = 0; r < n; ++r) {
        s.diag.max_norm[static_cast<std::size_t>(r)] = outs[static_cast<std::size_t>(r)].max_norm;
        if (outs[static_cast<std::size_t>(r)].diverged) {
            ++s.diag.diverged;
            s.diag.diverged_ids.push_back(r);
        }
    }
    if (static_cast<double>(s.diag.diverged) > kDivergenceBudget * static_cast<double>(n)) {
        throw DivergenceError("run: " + std::to_string(s.diag.diverged) + " of " + std::to_string(n) +
                              " replicas diverged at alpha = " + format_real(plan.alpha));
    }
    if (s.diag.diverged == 0) {
        s.rows = std::move(all);
    } else {
        s.rows.resize(n - s.diag.diverged, d);
        long long k = 0;
        for (long long r = 0; r < n; ++r)
            if (!outs[static_cast<std::size_t>(r)].diverged) s.rows.row(k++) = all.row(r);
    }

    // Stationarity heuristic: mean |Y|^2 at the burn-in boundary vs at the end.
    const long long kept = s.rows.rows();
    if (kept >= 2) {
        double sb = 0.0, sb2 = 0.0, st = 0.0, st2 = 0.0;
        long long k = 0;
        for (long long r = 0; r < n; ++r) {
            if (outs[static_cast<std::size_t>(r)].diverged) continue;
            const double b = outs[static_cast<std::size_t>(r)].burnin_sq;
            const double t = s.rows.row(k++).squaredNorm();
            sb += b;
            sb2 += b * b;
            st += t;
            st2 += t * t;
        }
        const double nk = static_cast<double>(kept);
        s.diag.burnin_m2 = sb / nk;
        s.diag.terminal_m2 = st / nk;
        s.diag.burnin_m2_se = std::sqrt(std::max(0.0, sb2 / nk - s.diag.burnin_m2 * s.diag.burnin_m2) / (nk - 1.0));
        s.diag.terminal_m2_se = std::sqrt(std::max(0.0, st2 / nk - s.diag.terminal_m2 * s.diag.terminal_m2) / (nk - 1.0));
        const double se = std::hypot(s.diag.burnin_m2_se, s.diag.terminal_m2_se);
        const double diff = std::abs(s.diag.burnin_m2 - s.diag.terminal_m2);
        s.diag.stationarity_z = se > 0.0 ? diff / se : (diff > 0.0 ? INFINITY : 0.0);
        s.diag.stationarity_ok = s.diag.stationarity_z < 3.0;
    }
    return s;
}

/// Same iterates under a different scaling exponent.
inline SteadySample rescale(const SteadySample& s, double new_exponent) {
    SteadySample out = s;
    out.rows *= std::pow(s.plan.alpha, s.plan.scaling_exponent - new_exponent);
    out.plan.scaling_exponent = new_exponent;
    return out;
}

struct GridResult {
    std::optional<SteadySample> sample;
    std::string error;  ///< empty on success

    bool ok() const { return sample.has_value(); }
};

/// Runs each plan; a failing plan yields an error marker instead of aborting the grid.
inline std::vector<GridResult> run_grid(const std::vector<SimPlan>& plans, int threads = 0) {
    std::vector<GridResult> out(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        try {
            out[i].sample = run(plans[i], threads);
        } catch (const Error& e) {
            out[i].error = e.what();
        }
    }
    return out;
}

inline json plan_to_json(const SimPlan& p) {
    json j = {{"model", to_json(p.model)},
              {"noise", to_json(p.noise)},
              {"alpha", p.alpha},
              {"n_replicas", p.n_replicas},
              {"n_steps", p.n_steps},
              {"burn_in", p.effective_burn_in()},
              {"scaling_exponent", p.scaling_exponent},
              {"seed", p.seed},
              {"stream", p.stream_id()}};
    j["init"] = p.init_offset ? json{{"offset", vec_to_json(*p.init_offset)}} : json("at_fixed_point");
    return j;
}

inline json sample_sidecar(const SteadySample& s) {
    const double max_norm = s.diag.max_norm.empty() ? 0.0 : *std::max_element(s.diag.max_norm.begin(), s.diag.max_norm.end());
    return {{"schema_version", 1},
            {"plan", plan_to_json(s.plan)},
            {"n_rows", s.rows.rows()},
            {"diagnostics",
             {{"diverged", s.diag.diverged},
              {"max_norm", real_to_json(max_norm)},
              {"burnin_m2", s.diag.burnin_m2},
              {"burnin_m2_se", s.diag.burnin_m2_se},
              {"terminal_m2", s.diag.terminal_m2},
              {"terminal_m2_se", s.diag.terminal_m2_se},
              {"stationarity_z", real_to_json(s.diag.stationarity_z)},
              {"stationarity_ok", s.diag.stationarity_ok}}}};
}

/// Writes one row per replica with columns y_1..y_d, plus a JSON sidecar.
inline void write_sample(const SteadySample& s, const std::string& csv_path, const std::string& sidecar_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error("cannot write " + csv_path);
    for (Eigen::Index i = 0; i < s.rows.cols(); ++i) out << (i ? "," : "") << "y_" << (i + 1);
    out << "\n";
    for (Eigen::Index r = 0; r < s.rows.rows(); ++r) {
        for (Eigen::Index i = 0; i < s.rows.cols(); ++i) out << (i ? "," : "") << format_real(s.rows(r, i));
        out << "\n";
    }
    std::ofstream side(sidecar_path, std::ios::binary);
    if (!side) throw Error("cannot write " + sidecar_path);
    side << sample_sidecar(s).dump(2) << "\n";
}

}  // namespace sa_steady
