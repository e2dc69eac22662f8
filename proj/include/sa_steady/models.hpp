#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sa_steady/error.hpp"
#include "sa_steady/json_util.hpp"
#include "sa_steady/matlib.hpp"
#include "sa_steady/rng.hpp"

namespace sa_steady {

enum class ModelKind { SgdStronglyConvex, LinearSA, ContractiveSA, GibbsConvex1d };

/// Concrete drift formula behind a ModelSpec.
enum class DriftFamily { Quadratic, LogCosh, Affine, SoftContraction, PolyGibbs, TrigGibbs };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::SgdStronglyConvex: return "sgd-strongly-convex";
        case ModelKind::LinearSA: return "linear-sa";
        case ModelKind::ContractiveSA: return "contractive-sa";
        case ModelKind::GibbsConvex1d: return "gibbs-convex-1d";
    }
    return "?";
}

/// Drift F with its fixed point, Jacobian at the root and smoothness data.
struct ModelSpec {
    std::string name;
    ModelKind kind = ModelKind::SgdStronglyConvex;
    DriftFamily family = DriftFamily::Quadratic;
    int dim = 1;
    Vec fixed_point;
    Mat jacobian_at_root;
    double lipschitz_L = 0.0;    ///< Lipschitz constant of F (infinite for the Gibbs polynomials)
    double second_deriv_M = 0.0; ///< uniform bound on second derivatives of the components of F
    std::optional<double> strong_convexity_sigma;
    std::optional<double> contraction_gamma;
    std::optional<Vec> mu_weights;
    std::optional<int> gibbs_order_h;
    std::optional<double> gibbs_top_deriv;
    bool globally_lipschitz = true;

    // family parameters
    Vec curvature;       ///< Quadratic: Hessian diagonal
    double beta = 0.0;   ///< LogCosh: weight of the log-cosh term
    Mat b_matrix;        ///< Affine: F(x) = B (x - x*)
    Mat contraction_map; ///< SoftContraction: gamma D^{-1/2} Q
    Vec sqrt_mu;         ///< SoftContraction: D^{1/2} diagonal
    int ell = 0;         ///< Gibbs families: objective degree 2*ell

    json params;         ///< parameters as supplied to builtin_model, echoed into reports
};

struct DriftEval {
    Vec value;
    std::optional<Mat> jacobian;
};

namespace detail {

inline double ipow(double x, int p) {
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
}

/// Largest |d^2/du^2 tanh(u)| = |2 sech^2 u tanh u|, attained at tanh u = 1/sqrt(3).
inline constexpr double kTanhSecondDerivMax = 4.0 / (3.0 * 1.7320508075688772);

}  // namespace detail

// Inner-loop drift functors. Each writes F(x) into f for a raw state pointer.

struct QuadraticDrift {
    const double* xs;
    const double* h;
    int d;
    void operator()(const double* x, double* f) const noexcept {
        for (int i = 0; i < d; ++i) f[i] = -h[i] * (x[i] - xs[i]);
    }
};

struct LogCoshDrift {
    const double* xs;
    double beta;
    int d;
    void operator()(const double* x, double* f) const noexcept {
        for (int i = 0; i < d; ++i) {
            const double u = x[i] - xs[i];
            f[i] = -u - beta * std::tanh(u);
        }
    }
};

struct AffineDrift {
    const double* xs;
    const double* b;  // column-major d x d
    int d;
    void operator()(const double* x, double* f) const noexcept {
        for (int i = 0; i < d; ++i) f[i] = 0.0;
        for (int k = 0; k < d; ++k) {
            const double u = x[k] - xs[k];
            for (int i = 0; i < d; ++i) f[i] += b[k * d + i] * u;
        }
    }
};

struct SoftContractionDrift {
    const double* xs;
    const double* a;  // column-major gamma D^{-1/2} Q
    const double* sqrt_mu;
    int d;
    void operator()(const double* x, double* f) const noexcept {
        for (int i = 0; i < d; ++i) f[i] = xs[i] - x[i];
        for (int k = 0; k < d; ++k) {
            const double t = std::tanh(sqrt_mu[k] * (x[k] - xs[k]));
            for (int i = 0; i < d; ++i) f[i] += a[k * d + i] * t;
        }
    }
};

struct PolyGibbsDrift {
    int p;  // 2 ell - 1
    void operator()(const double* x, double* f) const noexcept { f[0] = -detail::ipow(x[0], p); }
};

struct TrigGibbsDrift {
    int p;
    void operator()(const double* x, double* f) const noexcept {
        const double s = std::sin(x[0]);
        f[0] = -(detail::ipow(x[0], p) + detail::ipow(s, p) * std::cos(x[0]));
    }
};

/// Calls `fn` with the concrete drift functor of `m`, so hot loops are inlined.
template <class Fn>
decltype(auto) visit_drift(const ModelSpec& m, Fn&& fn) {
    switch (m.family) {
        case DriftFamily::Quadratic:
            return fn(QuadraticDrift{m.fixed_point.data(), m.curvature.data(), m.dim});
        case DriftFamily::LogCosh:
            return fn(LogCoshDrift{m.fixed_point.data(), m.beta, m.dim});
        case DriftFamily::Affine:
            return fn(AffineDrift{m.fixed_point.data(), m.b_matrix.data(), m.dim});
        case DriftFamily::SoftContraction:
            return fn(SoftContractionDrift{m.fixed_point.data(), m.contraction_map.data(), m.sqrt_mu.data(), m.dim});
        case DriftFamily::PolyGibbs:
            return fn(PolyGibbsDrift{2 * m.ell - 1});
        case DriftFamily::TrigGibbs:
            return fn(TrigGibbsDrift{2 * m.ell - 1});
    }
    throw InvalidArgument("visit_drift: unknown drift family");
}

/// F(x) and, when requested, the analytic Jacobian DF(x).
inline DriftEval eval_drift(const ModelSpec& m, const Vec& x, bool with_jacobian = true) {
    if (x.size() != m.dim) {
        throw InvalidArgument("eval_drift: dimension mismatch (got " + std::to_string(x.size()) + ", model dim " +
                              std::to_string(m.dim) + ")");
    }
    DriftEval out;
    out.value.resize(m.dim);
    visit_drift(m, [&](const auto& f) { f(x.data(), out.value.data()); });
    if (!with_jacobian) return out;

    const int d = m.dim;
    Mat jac = Mat::Zero(d, d);
    const Vec u = x - m.fixed_point;
    switch (m.family) {
        case DriftFamily::Quadratic:
            jac = -m.curvature.asDiagonal().toDenseMatrix();
            break;
        case DriftFamily::LogCosh:
            for (int i = 0; i < d; ++i) {
                const double c = 1.0 / std::cosh(u(i));
                jac(i, i) = -1.0 - m.beta * c * c;
            }
            break;
        case DriftFamily::Affine:
            jac = m.b_matrix;
            break;
        case DriftFamily::SoftContraction:
            for (int k = 0; k < d; ++k) {
                const double c = 1.0 / std::cosh(m.sqrt_mu(k) * u(k));
                jac.col(k) = m.contraction_map.col(k) * (m.sqrt_mu(k) * c * c);
            }
            jac -= Mat::Identity(d, d);
            break;
        case DriftFamily::PolyGibbs: {
            const int p = 2 * m.ell - 1;
            jac(0, 0) = -p * detail::ipow(x(0), p - 1);
            break;
        }
        case DriftFamily::TrigGibbs: {
            const int p = 2 * m.ell - 1;
            const double s = std::sin(x(0));
            const double c = std::cos(x(0));
            jac(0, 0) = -(p * detail::ipow(x(0), p - 1) + p * detail::ipow(s, p - 1) * c * c - detail::ipow(s, p + 1));
            break;
        }
    }
    out.jacobian = std::move(jac);
    return out;
}

/// Central-difference Jacobian with step 1e-5 max(1, |x|).
inline Mat finite_difference_jacobian(const ModelSpec& m, const Vec& x) {
    const double h = 1e-5 * std::max(1.0, x.norm());
    Mat jac(m.dim, m.dim);
    for (int k = 0; k < m.dim; ++k) {
        Vec xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        jac.col(k) = (eval_drift(m, xp, false).value - eval_drift(m, xm, false).value) / (2.0 * h);
    }
    return jac;
}

namespace detail {

inline double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// (2 ell)-th derivative at 0 of sin^{2 ell}(x) / (2 ell), read off the Taylor
/// coefficient of x^{2 ell} in the truncated power series of sin^{2 ell}.
inline double trig_top_coefficient(int ell) {
    const int deg = 2 * ell;
    std::vector<double> sin_series(deg + 1, 0.0);
    for (int k = 1; k <= deg; k += 2) {
        sin_series[k] = ((k / 2) % 2 == 0 ? 1.0 : -1.0) / factorial(k);
    }
    std::vector<double> acc(deg + 1, 0.0);
    acc[0] = 1.0;
    for (int p = 0; p < deg; ++p) {
        std::vector<double> next(deg + 1, 0.0);
        for (int i = 0; i <= deg; ++i) {
            if (acc[i] == 0.0) continue;
            for (int j = 0; i + j <= deg; ++j) next[i + j] += acc[i] * sin_series[j];
        }
        acc = std::move(next);
    }
    return acc[deg] * factorial(deg) / deg;
}

/// Certified bound on |d^{2 ell + 1}/dx^{2 ell + 1} sin^{2 ell}(x) / (2 ell)| from the
/// power-reduction formula sin^{2l} = 2^{-2l}[C(2l,l) + 2 sum_k (-1)^{l-k} C(2l,k) cos(2(l-k)x)].
inline double trig_next_derivative_bound(int ell) {
    const int n = 2 * ell;
    double s = 0.0;
    for (int k = 0; k < ell; ++k) s += binomial(n, k) * std::pow(2.0 * (ell - k), n + 1);
    return std::pow(2.0, 1 - n) * s / n;
}

inline Mat rotation_in_plane(int d, double theta) {
    Mat q = Mat::Identity(d, d);
    if (d >= 2) {
        q(0, 0) = std::cos(theta);
        q(0, 1) = -std::sin(theta);
        q(1, 0) = std::sin(theta);
        q(1, 1) = std::cos(theta);
    }
    return q;
}

inline Vec fixed_point_param(const json& p, const char* key, int d, const std::string& where) {
    if (!p.contains(key)) return Vec::Zero(d);
    Vec v = vec_from_json(p.at(key), where + "." + key);
    if (v.size() != d) throw InvalidArgument(where + "." + key + ": dimension mismatch");
    return v;
}

inline int dim_param(const json& p, const std::string& where) {
    const int d = get_or<int>(p, "d", 1, where);
    if (d < 1 || d > kMaxDim) throw InvalidArgument(where + ".d: must lie in [1, " + std::to_string(kMaxDim) + "]");
    return d;
}

inline void finalize_model(ModelSpec& m) {
    const DriftEval at_root = eval_drift(m, m.fixed_point, true);
    const double scale = std::max(1.0, m.fixed_point.norm());
    if (!(at_root.value.norm() <= 1e-10 * scale)) {
        throw InvalidArgument(m.name + ": F(x*) != 0 (|F(x*)| = " + std::to_string(at_root.value.norm()) + ")");
    }
    m.jacobian_at_root = *at_root.jacobian;
}

}  // namespace detail

/// Names accepted by builtin_model.
inline const std::vector<std::string>& builtin_model_names() {
    static const std::vector<std::string> names = {"quadratic-sgd", "logcosh-sgd",  "rotation-linear", "user-matrix-linear",
                                                   "soft-contraction", "poly-gibbs", "trig-gibbs"};
    return names;
}

/// Builds one of the built-in models from a JSON parameter block.
///
/// quadratic-sgd      f = sum_i h_i (x_i - x*_i)^2 / 2          {d, curvature, x_star}
/// logcosh-sgd        f = |x - x*|^2/2 + beta sum log cosh(x_i - x*_i)  {d, beta, x_star}
/// rotation-linear    F = B (x - x*), B = [[-decay, omega], [-omega, -decay]]  {omega, decay, x_star}
/// user-matrix-linear F = B x + b                                  {B, b}
/// soft-contraction   tau(x) = x* + gamma D^{-1/2} Q tanh(D^{1/2}(x - x*))  {d, gamma, theta, mu, x_star}
/// poly-gibbs         f = x^{2 ell} / (2 ell)                      {ell}
/// trig-gibbs         f = (x^{2 ell} + sin^{2 ell} x) / (2 ell)    {ell}
inline ModelSpec builtin_model(const std::string& name, const json& params = json::object()) {
    const std::string where = "model.params";
    const json p = params.is_null() ? json::object() : params;
    ModelSpec m;
    m.name = name;
    m.params = p;

    if (name == "quadratic-sgd") {
        check_keys(p, {"d", "curvature", "x_star"}, where);
        const int d = detail::dim_param(p, where);
        m.kind = ModelKind::SgdStronglyConvex;
        m.family = DriftFamily::Quadratic;
        m.dim = d;
        m.curvature = p.contains("curvature") ? vec_from_json(p.at("curvature"), where + ".curvature") : Vec::Ones(d);
        if (m.curvature.size() != d) throw InvalidArgument(where + ".curvature: dimension mismatch");
        if (!(m.curvature.minCoeff() > 0.0)) throw InvalidArgument(where + ".curvature: entries must be > 0");
        m.fixed_point = detail::fixed_point_param(p, "x_star", d, where);
        m.strong_convexity_sigma = m.curvature.minCoeff();
        m.lipschitz_L = m.curvature.maxCoeff();
        m.second_deriv_M = 0.0;
    } else if (name == "logcosh-sgd") {
        check_keys(p, {"d", "beta", "x_star"}, where);
        const int d = detail::dim_param(p, where);
        const double beta = get_or<double>(p, "beta", 0.5, where);
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument(where + ".beta: must be >= 0");
        m.kind = ModelKind::SgdStronglyConvex;
        m.family = DriftFamily::LogCosh;
        m.dim = d;
        m.beta = beta;
        m.fixed_point = detail::fixed_point_param(p, "x_star", d, where);
        m.strong_convexity_sigma = 1.0;
        m.lipschitz_L = 1.0 + beta;
        m.second_deriv_M = beta * detail::kTanhSecondDerivMax;
    } else if (name == "rotation-linear") {
        check_keys(p, {"omega", "decay", "x_star"}, where);
        const double omega = get_or<double>(p, "omega", 1.0, where);
        const double decay = get_or<double>(p, "decay", 1.0, where);
        if (!std::isfinite(omega)) throw InvalidArgument(where + ".omega: must be finite");
        if (!(decay > 0.0) || !std::isfinite(decay)) throw InvalidArgument(where + ".decay: must be > 0");
        m.kind = ModelKind::LinearSA;
        m.family = DriftFamily::Affine;
        m.dim = 2;
        m.b_matrix.resize(2, 2);
        m.b_matrix << -decay, omega, -omega, -decay;
        m.fixed_point = detail::fixed_point_param(p, "x_star", 2, where);
        m.lipschitz_L = op_norm(m.b_matrix);
        m.second_deriv_M = 0.0;
    } else if (name == "user-matrix-linear") {
        check_keys(p, {"B", "b"}, where);
        if (!p.contains("B")) throw InvalidArgument(where + ".B: required");
        const Mat b = mat_from_json(p.at("B"), where + ".B");
        if (b.rows() != b.cols()) throw InvalidArgument(where + ".B: must be square");
        const int d = static_cast<int>(b.rows());
        if (d > kMaxDim) throw InvalidArgument(where + ".B: dimension exceeds " + std::to_string(kMaxDim));
        const Vec off = p.contains("b") ? vec_from_json(p.at("b"), where + ".b") : Vec::Zero(d);
        if (off.size() != d) throw InvalidArgument(where + ".b: dimension mismatch");
        m.kind = ModelKind::LinearSA;
        m.family = DriftFamily::Affine;
        m.dim = d;
        m.b_matrix = b;
        Eigen::FullPivLU<Mat> lu(b);
        if (!lu.isInvertible()) throw InvalidArgument(where + ".B: singular matrix has no unique fixed point");
        m.fixed_point = -lu.solve(off);
        m.lipschitz_L = op_norm(b);
        m.second_deriv_M = 0.0;
    } else if (name == "soft-contraction") {
        check_keys(p, {"d", "gamma", "theta", "mu", "x_star"}, where);
        const int d = p.contains("d") ? detail::dim_param(p, where)
                                      : (p.contains("mu") ? static_cast<int>(vec_from_json(p.at("mu"), where + ".mu").size()) : 2);
        const double gamma = get_or<double>(p, "gamma", 0.9, where);
        const double theta = get_or<double>(p, "theta", std::numbers::pi / 6.0, where);
        if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument(where + ".gamma: must lie in (0, 1)");
        Vec mu;
        if (p.contains("mu")) {
            mu = vec_from_json(p.at("mu"), where + ".mu");
        } else {
            mu = Vec::LinSpaced(d, 1.0, static_cast<double>(d));
        }
        if (mu.size() != d) throw InvalidArgument(where + ".mu: dimension mismatch");
        if (!(mu.minCoeff() > 0.0)) throw InvalidArgument(where + ".mu: weights must be > 0");
        m.kind = ModelKind::ContractiveSA;
        m.family = DriftFamily::SoftContraction;
        m.dim = d;
        m.contraction_gamma = gamma;
        m.mu_weights = mu;
        m.sqrt_mu = mu.cwiseSqrt();
        const Mat q = detail::rotation_in_plane(d, theta);
        m.contraction_map = gamma * m.sqrt_mu.cwiseInverse().asDiagonal() * q;
        m.fixed_point = detail::fixed_point_param(p, "x_star", d, where);
        m.lipschitz_L = (1.0 + gamma) * std::sqrt(mu.maxCoeff() / mu.minCoeff());
        double mmax = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) mmax = std::max(mmax, std::abs(m.contraction_map(i, j)) * mu(j));
        m.second_deriv_M = mmax * detail::kTanhSecondDerivMax;
    } else if (name == "poly-gibbs" || name == "trig-gibbs") {
        check_keys(p, {"ell"}, where);
        const int ell = get_or<int>(p, "ell", 2, where);
        if (ell < 2) throw InvalidArgument(where + ".ell: must be >= 2");
        if (ell > 8) throw InvalidArgument(where + ".ell: must be <= 8");
        m.kind = ModelKind::GibbsConvex1d;
        m.family = name == "poly-gibbs" ? DriftFamily::PolyGibbs : DriftFamily::TrigGibbs;
        m.dim = 1;
        m.ell = ell;
        m.fixed_point = Vec::Zero(1);
        m.gibbs_order_h = 2 * ell;
        const double poly_top = detail::factorial(2 * ell - 1);
        if (m.family == DriftFamily::PolyGibbs) {
            m.gibbs_top_deriv = poly_top;
            m.second_deriv_M = 0.0;
        } else {
            m.gibbs_top_deriv = poly_top + detail::trig_top_coefficient(ell);
            m.second_deriv_M = detail::trig_next_derivative_bound(ell);
        }
        m.lipschitz_L = std::numeric_limits<double>::infinity();
        m.globally_lipschitz = false;
    } else {
        throw InvalidArgument("model.name: unknown model '" + name + "'");
    }
    detail::finalize_model(m);
    return m;
}

/// Outcome of one numerical spot check.
struct AssumptionCheck {
    std::string name;
    bool pass = false;
    double worst = 0.0;  ///< worst observed ratio (or statistic) for the check
    Vec witness;         ///< point realizing the worst case, when applicable
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    const AssumptionCheck* find(const std::string& n) const {
        for (const auto& c : checks)
            if (c.name == n) return &c;
        return nullptr;
    }
};

/// Spot-checks the assumptions of the model's regime on 1000 sampled points in
/// the cube of radius 10 around x*. Never throws on a failed check.
inline AssumptionReport check_model_assumptions(const ModelSpec& m, std::uint64_t seed = 0x0a55u) {
    AssumptionReport rep;
    Rng rng(seed);
    constexpr int kPoints = 1000;
    constexpr double kRadius = 10.0;
    auto sample_point = [&] {
        Vec x(m.dim);
        for (int i = 0; i < m.dim; ++i) x(i) = m.fixed_point(i) + kRadius * (2.0 * rng.uniform_open() - 1.0);
        return x;
    };
    auto drift = [&](const Vec& x) { return eval_drift(m, x, false).value; };

    {
        AssumptionCheck c{"fixed_point", true, drift(m.fixed_point).norm(), m.fixed_point, ""};
        c.pass = c.worst <= 1e-10 * std::max(1.0, m.fixed_point.norm());
        rep.checks.push_back(c);
    }

    if (m.globally_lipschitz) {
        AssumptionCheck c{"lipschitz", true, 0.0, Vec(), ""};
        for (int t = 0; t < kPoints; ++t) {
            const Vec x = sample_point();
            Vec y = sample_point();
            if (t % 2 == 1) y = x + 1e-3 * (y - m.fixed_point);  // nearby pairs probe local slopes
            const double dx = (x - y).norm();
            if (dx == 0.0) continue;
            const double ratio = (drift(x) - drift(y)).norm() / dx;
            if (ratio > c.worst) {
                c.worst = ratio;
                c.witness = x;
            }
        }
        c.pass = c.worst <= m.lipschitz_L * (1.0 + 1e-6);
        c.detail = "sampled Lipschitz ratio vs declared L = " + std::to_string(m.lipschitz_L);
        rep.checks.push_back(c);
    } else {
        rep.checks.push_back({"lipschitz", true, 0.0, Vec(), "not globally Lipschitz; not required in the Gibbs regime"});
    }

    if (m.kind != ModelKind::GibbsConvex1d) {
        const HurwitzCertificate h = is_hurwitz(m.jacobian_at_root);
        AssumptionCheck c{"hurwitz", h.hurwitz, 0.0, Vec(), h.diagnostic};
        if (h) {
            c.worst = lambda_max(*h.witness);
        } else {
            // witness: direction of the symmetric part with the largest Rayleigh quotient
            const EigenSym es = eig_sym(0.5 * (m.jacobian_at_root + m.jacobian_at_root.transpose()));
            c.witness = es.vectors.col(m.dim - 1);
            c.worst = es.values(m.dim - 1);
        }
        rep.checks.push_back(c);
    }

    if (m.kind == ModelKind::SgdStronglyConvex) {
        const double sigma = m.strong_convexity_sigma.value_or(0.0);
        AssumptionCheck c{"strong_monotonicity", true, INFINITY, Vec(), ""};
        for (int t = 0; t < kPoints; ++t) {
            const Vec x = sample_point();
            const Vec u = x - m.fixed_point;
            const double nu = u.squaredNorm();
            if (nu == 0.0) continue;
            const double ratio = u.dot(-drift(x)) / nu;
            if (ratio < c.worst) {
                c.worst = ratio;
                c.witness = x;
            }
        }
        c.pass = sigma > 0.0 && c.worst >= sigma * (1.0 - 1e-9);
        c.detail = "min <x - x*, -F(x)> / |x - x*|^2 vs sigma = " + std::to_string(sigma);
        rep.checks.push_back(c);
    }

    if (m.kind == ModelKind::ContractiveSA) {
        const double gamma = m.contraction_gamma.value_or(1.0);
        const Vec w = m.mu_weights.value_or(Vec::Ones(m.dim)).cwiseSqrt();
        AssumptionCheck c{"contraction", true, 0.0, Vec(), ""};
        for (int t = 0; t < kPoints; ++t) {
            const Vec x = sample_point();
            Vec y = sample_point();
            if (t % 2 == 1) y = x + 1e-3 * (y - m.fixed_point);
            const Vec dx = x - y;
            const double den = w.cwiseProduct(dx).norm();
            if (den == 0.0) continue;
            // tau(x) = F(x) + x
            const Vec dt = (drift(x) + x) - (drift(y) + y);
            const double ratio = w.cwiseProduct(dt).norm() / den;
            if (ratio > c.worst) {
                c.worst = ratio;
                c.witness = x;
            }
        }
        c.pass = gamma > 0.0 && gamma < 1.0 && c.worst <= gamma * (1.0 + 1e-9);
        c.detail = "sampled mu-norm Lipschitz ratio of tau vs gamma = " + std::to_string(gamma);
        rep.checks.push_back(c);
    }

    if (m.kind == ModelKind::GibbsConvex1d) {
        const int h = m.gibbs_order_h.value_or(0);
        const double top = m.gibbs_top_deriv.value_or(0.0);
        AssumptionCheck c{"gibbs_order", h >= 2 && h % 2 == 0 && top > 0.0, top, m.fixed_point,
                          "h = " + std::to_string(h) + ", f^(h)(x*) = " + std::to_string(top)};
        rep.checks.push_back(c);
    }
    return rep;
}

inline json to_json(const AssumptionReport& r) {
    json a = json::array();
    for (const auto& c : r.checks) {
        a.push_back({{"name", c.name},
                     {"pass", c.pass},
                     {"worst", real_to_json(c.worst)},
                     {"witness", vec_to_json(c.witness)},
                     {"detail", c.detail}});
    }
    return a;
}

inline json to_json(const ModelSpec& m) {
    json j = {{"name", m.name},
              {"kind", to_string(m.kind)},
              {"dim", m.dim},
              {"params", m.params},
              {"fixed_point", vec_to_json(m.fixed_point)},
              {"jacobian_at_root", mat_to_json(m.jacobian_at_root)},
              {"lipschitz_L", real_to_json(m.lipschitz_L)},
              {"second_deriv_M", real_to_json(m.second_deriv_M)}};
    if (m.strong_convexity_sigma) j["strong_convexity_sigma"] = *m.strong_convexity_sigma;
    if (m.contraction_gamma) j["contraction_gamma"] = *m.contraction_gamma;
    if (m.mu_weights) j["mu_weights"] = vec_to_json(*m.mu_weights);
    if (m.gibbs_order_h) j["gibbs_order_h"] = *m.gibbs_order_h;
    if (m.gibbs_top_deriv) j["gibbs_top_deriv"] = *m.gibbs_top_deriv;
    return j;
}

}  // namespace sa_steady
