#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "sa_steady/experiments.hpp"
#include "sa_steady/matlib.hpp"
#include "sa_steady/metrics.hpp"
#include "sa_steady/models.hpp"
#include "sa_steady/noise.hpp"
#include "sa_steady/theory.hpp"

namespace sa_steady {

struct SelftestCase {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline bool close(double a, double b, double rel, double abs = 0.0) {
    return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

inline std::string got(double a, double b) { return "got " + format_real(a) + ", expected " + format_real(b); }

}  // namespace detail

/// Closed-form checks of the analytic layers; no simulation.
inline std::vector<SelftestCase> run_selftest() {
    std::vector<SelftestCase> out;
    auto check = [&out](const std::string& name, const std::function<std::string()>& fn) {
        SelftestCase c{name, false, ""};
        try {
            c.detail = fn();
            c.pass = c.detail.empty();
        } catch (const std::exception& e) {
            c.detail = std::string("threw: ") + e.what();
        }
        out.push_back(std::move(c));
    };

    check("normal absolute moments", [] {
        verify_normal_moments();
        return std::string();
    });
    check("lyapunov 1-d", [] {
        Mat j(1, 1), s(1, 1);
        j << -2.0;
        s << 3.0;
        const double v = solve_lyapunov(j, SpdMat(s)).mat()(0, 0);
        return detail::close(v, 0.75, 1e-14) ? std::string() : detail::got(v, 0.75);
    });
    check("lyapunov rotation", [] {
        const ModelSpec m = builtin_model("rotation-linear", {{"omega", 3.0}, {"decay", 0.5}});
        const Mat sy = solve_lyapunov(m.jacobian_at_root, SpdMat::identity(2)).mat();
        const double err = (sy - Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
        return err < 1e-12 ? std::string() : "max deviation from I " + format_real(err);
    });
    check("hurwitz rejection", [] {
        Mat j(2, 2);
        j << 0.1, 1.0, -1.0, 0.1;
        return is_hurwitz(j).hurwitz ? std::string("accepted a matrix with eigenvalue real part 0.1") : std::string();
    });
    check("stein constants quadratic", [] {
        const ConstantLedger l = build_iid_ledger(builtin_model("quadratic-sgd"), IidNoise::gaussian(Mat::Identity(1, 1)));
        if (!detail::close(l.sigma_y(0, 0), 0.5, 1e-14)) return "Sigma_Y " + detail::got(l.sigma_y(0, 0), 0.5);
        if (!detail::close(l.stein.lambda, 2.0, 1e-12)) return "lambda " + detail::got(l.stein.lambda, 2.0);
        if (!detail::close(l.stein.g1, 1.0, 1e-12)) return "g1 " + detail::got(l.stein.g1, 1.0);
        return std::string();
    });
    check("exchangeable pair arithmetic", [] {
        const double w = exch_pair_exact_w1(0.25);
        const double want = std::sqrt(2.0 / std::numbers::pi) * (1.0 / std::sqrt(1.75) - 1.0 / std::sqrt(2.0));
        if (!detail::close(w, want, 1e-15)) return detail::got(w, want);
        const double b = exch_pair_bound_1d(0.25, 2.0 * std::sqrt(2.0 / std::numbers::pi), 3.0);
        return b > w ? std::string() : "bound below exact value";
    });
    check("gibbs normalizer", [] {
        const GibbsDensity g(4, 6.0, 1.0);
        const double want = 2.0 * std::tgamma(1.25) * std::pow(0.5, -0.25);
        if (!detail::close(g.normalizer(), want, 1e-10)) return detail::got(g.normalizer(), want);
        const double q = g.quantile(g.cdf(0.3));
        return detail::close(q, 0.3, 1e-10) ? std::string() : "quantile round trip " + detail::got(q, 0.3);
    });
    check("two-state long-run covariance", [] {
        Mat p(2, 2), e(2, 1);
        p << 0.7, 0.3, 0.45, 0.55;
        e << 1.0, -1.5;
        const MarkovNoise m = make_markov_noise(p, e);
        // Var_pi(xi) (1 + lambda) / (1 - lambda) with lambda = 1 - p - q
        const double want = 1.5 * 1.25 / 0.75;
        if (!detail::close(m.long_run_cov(0, 0), want, 1e-12)) return detail::got(m.long_run_cov(0, 0), want);
        return m.residual_V < 1e-12 && m.residual_W < 1e-12 ? std::string() : std::string("Poisson residual too large");
    });
    check("iid chain degenerates", [] {
        Vec pi(2);
        pi << 0.5, 0.5;
        Mat e(2, 1);
        e << 0.8, -0.8;
        const MarkovNoise m = make_markov_noise(iid_as_chain(pi), e);
        if ((m.poisson_V - e).cwiseAbs().maxCoeff() > 1e-12) return std::string("V differs from xi");
        for (const auto& w : m.poisson_W)
            if (w.cwiseAbs().maxCoeff() > 1e-12) return std::string("W is not zero");
        return detail::close(m.long_run_cov(0, 0), 0.64, 1e-12) ? std::string() : detail::got(m.long_run_cov(0, 0), 0.64);
    });
    check("tail envelope without transport term", [] {
        const SpdMat sy = SpdMat::scalar(0.5);
        const Vec z = Vec::Ones(1);
        const TailEnvelope e = tail_envelope(1.0, z, sy, 0.0, 0.5);
        const double x = 1.0 / std::sqrt(0.5);
        const double want = 0.5 * x * normal_pdf(0.5 * x);
        return detail::close(e.width, want, 1e-14) ? std::string() : detail::got(e.width, want);
    });
    check("sorted W1", [] {
        const W1Estimate w = w1_sorted_1d({0.0, 1.0, 5.0}, {1.0, 2.0, 6.0}, 1, 0);
        return detail::close(w.value, 1.0, 1e-15) ? std::string() : detail::got(w.value, 1.0);
    });
    check("certificates pass on exact comparisons", [] {
        const StudyResult r = study_exch_pair({0.5, 0.25, 0.1, 0.05});
        return r.all_pass() ? std::string() : std::string("an exchangeable-pair certificate failed");
    });
    return out;
}

}  // namespace sa_steady
