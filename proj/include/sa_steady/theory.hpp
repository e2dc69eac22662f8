#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sa_steady/error.hpp"
#include "sa_steady/json_util.hpp"
#include "sa_steady/matlib.hpp"
#include "sa_steady/models.hpp"
#include "sa_steady/noise.hpp"
#include "sa_steady/quadrature.hpp"

namespace sa_steady {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Standard normal moments

/// E|Z|^p for Z ~ N(0, 1), closed form 2^{p/2} Gamma((p+1)/2) / sqrt(pi).
inline double normal_abs_moment(double p) {
    return std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
}

/// E|Z|^p by adaptive Simpson on [-40, 40]; used to cross-check the closed form.
inline double normal_abs_moment_quadrature(double p) {
    return 2.0 * adaptive_simpson_split([p](double z) { return std::pow(z, p) * normal_pdf(z); }, 0.0, 40.0, 160, 1e-14);
}

/// Throws NumericalError if quadrature and closed form disagree for p = 1..4.
inline void verify_normal_moments() {
    for (int p = 1; p <= 4; ++p) {
        const double q = normal_abs_moment_quadrature(p);
        const double c = normal_abs_moment(p);
        if (!(std::abs(q - c) <= 1e-10 * c)) {
            throw NumericalError("standard normal moment " + std::to_string(p) + " quadrature mismatch");
        }
    }
}

// ---------------------------------------------------------------------------
// Stein constants

struct SteinConstants {
    double K_Y = 0.0;
    double lambda = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    double g3 = 0.0;
    double C2 = 0.0;
    int dim = 0;
    double sigma_y_min = 0.0;  ///< lambda_min(Sigma_Y)
    double inv_sqrt_op = 0.0;  ///< |Sigma_Y^{-1/2}|_op
};

/// Derivative bounds of the Ornstein-Uhlenbeck Stein solution for Lipschitz-1
/// test functions, for target N(0, Sigma_Y) and generator covariance Sigma.
inline SteinConstants stein_constants(const SpdMat& sigma_y, const SpdMat& sigma) {
    if (sigma_y.dim() != sigma.dim()) throw InvalidArgument("stein_constants: dimension mismatch");
    const int d = sigma.dim();
    const EigenSym ey = eig_sym(sigma_y.mat());
    const double ymin = ey.values(0);
    const double ymax = ey.values(d - 1);
    const Mat inv_sqrt = spd_inv_sqrt(sigma_y).mat();
    const double lambda = eig_sym(inv_sqrt * sigma.mat() * inv_sqrt).values(0);
    if (!(lambda > 0.0)) throw NumericalError("stein_constants: lambda is not positive");
    SteinConstants s;
    s.dim = d;
    s.sigma_y_min = ymin;
    s.inv_sqrt_op = 1.0 / std::sqrt(ymin);
    s.K_Y = std::sqrt(ymax) * s.inv_sqrt_op;
    s.lambda = lambda;
    const double k = s.K_Y;
    const double c = std::sqrt(2.0 / std::numbers::pi);
    s.g1 = 2.0 * k / lambda;
    s.g2 = (2.0 / lambda) * c * k * k * s.inv_sqrt_op;
    s.C2 = (d + 1.0) * k * k * k *
           (4.0 / (lambda * ymin) + (4.0 / (3.0 * lambda)) * std::exp(-0.75 * lambda) / ((1.0 - std::exp(-lambda)) * ymin));
    s.g3 = 4.0 * c * k * k / std::sqrt(lambda) + s.C2;
    return s;
}

inline json to_json(const SteinConstants& s) {
    return {{"K_Y", s.K_Y}, {"lambda", s.lambda}, {"g1", s.g1}, {"g2", s.g2},
            {"g3", s.g3},   {"C2", s.C2},         {"dim", s.dim}, {"sigma_y_min", s.sigma_y_min},
            {"inv_sqrt_op", s.inv_sqrt_op}};
}

inline SteinConstants stein_from_json(const json& j) {
    SteinConstants s;
    s.K_Y = j.at("K_Y").get<double>();
    s.lambda = j.at("lambda").get<double>();
    s.g1 = j.at("g1").get<double>();
    s.g2 = j.at("g2").get<double>();
    s.g3 = j.at("g3").get<double>();
    s.C2 = j.at("C2").get<double>();
    s.dim = j.at("dim").get<int>();
    s.sigma_y_min = j.at("sigma_y_min").get<double>();
    s.inv_sqrt_op = j.at("inv_sqrt_op").get<double>();
    return s;
}

// ---------------------------------------------------------------------------
// Moment constants

enum class MomentBranch { A_SGD, A_LSA, A_CSA, Markov };

inline const char* to_string(MomentBranch b) {
    switch (b) {
        case MomentBranch::A_SGD: return "A_SGD";
        case MomentBranch::A_LSA: return "A_LSA";
        case MomentBranch::A_CSA: return "A_CSA";
        case MomentBranch::Markov: return "markov_moments";
    }
    return "?";
}

inline MomentBranch moment_branch_from_string(const std::string& s) {
    if (s == "A_SGD") return MomentBranch::A_SGD;
    if (s == "A_LSA") return MomentBranch::A_LSA;
    if (s == "A_CSA") return MomentBranch::A_CSA;
    if (s == "markov_moments") return MomentBranch::Markov;
    throw InvalidArgument("moments.which: unknown branch '" + s + "'");
}

/// Bounds on moments of the scaled steady state Y.
struct MomentConstants {
    MomentBranch which = MomentBranch::A_SGD;
    double value_m3 = kNaN;  ///< bound on E|Y|^3
    double value_m2 = kNaN;  ///< bound on E|Y|^2 (when the branch provides one)
    double value_m4 = kNaN;  ///< bound on E|Y|^4 (Markov)
    double ev2 = kNaN;       ///< E|V|^2 (Markov)
    double sup_w_op = kNaN;  ///< sup_z |W(z)|_op (Markov)
    json intermediates = json::object();
};

namespace detail {

struct LinearGeometry {
    SpdMat p;        // solves B^T P + P B = -I
    double lmax = 0; // lambda_max(P)
    double lmin = 0; // lambda_min(P)
    double c = 0;    // 1 / (2 lambda_max(P))
    double kappa = 0;// |P^{1/2} B P^{-1/2}|_op
};

inline LinearGeometry linear_geometry(const Mat& b) {
    const HurwitzCertificate h = is_hurwitz(b);
    if (!h) throw NotHurwitz("moment_constant: B is not Hurwitz: " + h.diagnostic);
    LinearGeometry g;
    g.p = *h.witness;
    const EigenSym es = eig_sym(g.p.mat());
    g.lmin = es.values(0);
    g.lmax = es.values(es.values.size() - 1);
    g.c = 1.0 / (2.0 * g.lmax);
    g.kappa = op_norm(spd_sqrt(g.p).mat() * b * spd_inv_sqrt(g.p).mat());
    return g;
}

/// |A|_P = |P^{1/2} A P^{-1/2}|_op.
inline double p_norm(const SpdMat& p, const Mat& a) {
    return op_norm(spd_sqrt(p).mat() * a * spd_inv_sqrt(p).mat());
}

inline void require_moments(const NoiseMoments& m) {
    if (!std::isfinite(m.m2) || !std::isfinite(m.m3)) {
        throw InvalidArgument("noise: second and third moments must be finite");
    }
}

}  // namespace detail

/// A_SGD, A_LSA or A_CSA for i.i.d. noise with the given moments.
inline MomentConstants moment_constant(const ModelSpec& model, const NoiseMoments& nm) {
    detail::require_moments(nm);
    const double m2 = nm.m2;
    const double m3 = nm.m3;
    MomentConstants mc;
    switch (model.kind) {
        case ModelKind::SgdStronglyConvex: {
            if (!model.strong_convexity_sigma) throw InvalidArgument("moment_constant: missing strong_convexity_sigma");
            const double s = *model.strong_convexity_sigma;
            mc.which = MomentBranch::A_SGD;
            mc.value_m3 = (12.0 * m2 / s) * (1.0 + m2 / s) + 12.0 * m3 / s;
            mc.value_m2 = m2 / s;
            mc.intermediates = {{"sigma", s}, {"m2", m2}, {"m3", m3}};
            break;
        }
        case ModelKind::LinearSA: {
            const auto g = detail::linear_geometry(model.jacobian_at_root);
            const double k32 = std::pow(g.kappa, 1.5);
            mc.which = MomentBranch::A_LSA;
            mc.value_m3 = (24.0 * k32 * m2 / g.c) * (1.0 + g.kappa * m2 / g.c) + 24.0 * k32 * m3 / g.c;
            mc.intermediates = {{"P", mat_to_json(g.p.mat())}, {"lambda_max_P", g.lmax}, {"c", g.c},
                                {"kappa", g.kappa},          {"m2", m2},                {"m3", m3}};
            break;
        }
        case ModelKind::ContractiveSA: {
            if (!model.contraction_gamma || !model.mu_weights) {
                throw InvalidArgument("moment_constant: missing contraction_gamma or mu_weights");
            }
            const double gamma = *model.contraction_gamma;
            const double mu_max = model.mu_weights->maxCoeff();
            const double mu_min = model.mu_weights->minCoeff();
            mc.which = MomentBranch::A_CSA;
            mc.value_m3 = 12.0 / (std::pow(mu_min, 1.5) * (1.0 - gamma)) *
                          (mu_max * m2 * (1.0 + mu_max * m2 / (1.0 - gamma)) + std::pow(mu_max, 1.5) * m3);
            mc.intermediates = {{"gamma", gamma}, {"mu_max", mu_max}, {"mu_min", mu_min}, {"m2", m2}, {"m3", m3}};
            break;
        }
        case ModelKind::GibbsConvex1d:
            throw InvalidArgument("moment_constant: Gibbs models have no Gaussian-regime moment constant");
    }
    return mc;
}

/// Moment bounds of the scaled steady state under Markov noise at stepsize alpha.
///
/// E|Y|^3 is bounded by (E|Y|^4)^{3/4}. See the decisions in the README for the
/// two places where the fourth-moment algebra departs from the printed formulas.
inline MomentConstants markov_moment_constant(const ModelSpec& model, const MarkovNoise& chain, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("markov_moment_constant: alpha must lie in (0, 1]");
    const double v = chain.sup_V;
    const double v2 = v * v;
    const double v4 = v2 * v2;
    MomentConstants mc;
    mc.which = MomentBranch::Markov;
    mc.ev2 = chain.v2;
    mc.sup_w_op = chain.sup_W_op;
    switch (model.kind) {
        case ModelKind::SgdStronglyConvex: {
            if (!model.strong_convexity_sigma) throw InvalidArgument("markov_moment_constant: missing strong_convexity_sigma");
            const double s = *model.strong_convexity_sigma;
            const double l = model.lipschitz_L;
            const double c = l * l * v2 / s + 8.0 * v2;
            const double c0 = (s + 2.0 * l * l / s) * v2;
            const double c1 = 8.0 * v2;
            const double c2 = 16.0 * std::pow(l, 4) + 128.0 * v4;
            const double c3 = 4.0 * std::pow(c2, 0.75);
            const double c4 = (c / s) * (4.0 * c0 + 6.0 * c1 + 2.0 * c3 + 2.0 * c2);
            mc.value_m2 = 2.0 * c / s + 2.0 * v2;
            mc.value_m4 = 8.0 * (2.0 * c4 / s) + 8.0 * v4;
            mc.intermediates = {{"sigma", s}, {"L", l}, {"sup_V", v}, {"C", c}, {"C0", c0},
                                {"C1", c1},   {"C2", c2}, {"C3", c3},  {"C4", c4}};
            break;
        }
        case ModelKind::LinearSA: {
            const Mat& b = model.jacobian_at_root;
            const auto g = detail::linear_geometry(b);
            const int d = model.dim;
            const double bp = g.kappa;
            const double ib = detail::p_norm(g.p, Mat::Identity(d, d) + alpha * b);
            const double c = 3.0 * bp * bp * v2 + 12.0 * v2 * g.lmax;
            const double cm = 2.0 * v * std::sqrt(g.lmax);
            const double cbv = bp * v * std::sqrt(g.lmax);
            const double cr = cm + cbv;
            const double conv = 1.0 / (g.lmin * g.lmin);
            const double tilde4 = (16.0 * c / (g.c * g.c)) * (0.5 + 6.0 * cr * cr * ib * ib + 4.0 * std::pow(ib, 3) * bp * v) +
                                  (4.0 / g.c) * (8.0 * std::pow(cr, 6) + std::pow(cr, 4));
            mc.value_m4 = 8.0 * conv * tilde4 + 8.0 * v4;
            mc.value_m2 = 2.0 * (4.0 * c / g.c) / g.lmin + 2.0 * v2;
            mc.intermediates = {{"P", mat_to_json(g.p.mat())}, {"lambda_max_P", g.lmax}, {"lambda_min_P", g.lmin},
                                {"c", g.c},                  {"B_P", bp},             {"I_plus_alphaB_P", ib},
                                {"C", c},                    {"C_M", cm},             {"C_BV", cbv},
                                {"C_R", cr},                 {"sup_V", v}};
            break;
        }
        case ModelKind::ContractiveSA: {
            if (!model.contraction_gamma || !model.mu_weights) {
                throw InvalidArgument("markov_moment_constant: missing contraction_gamma or mu_weights");
            }
            const double gamma = *model.contraction_gamma;
            const double mu_max = model.mu_weights->maxCoeff();
            const double mu_min = model.mu_weights->minCoeff();
            const double vm = v * std::sqrt(mu_max);
            const double vm2 = vm * vm;
            const double vm4 = vm2 * vm2;
            const double kc = (1.0 - gamma) / 4.0;
            const double g2 = gamma * gamma;
            const double c2 = (8.0 + 2.0 * g2 / (1.0 - gamma) + g2 + 4.0 / (1.0 - gamma)) * vm2;
            const double c1 = (54.0 / (kc * kc * kc)) * vm4 + 16.0 * g2 * gamma * vm4;
            const double c4 = 5832.0 * vm4 * vm2 + 81.0 * vm4;
            const double ca = c1 + 108.0 * vm2 + 0.5;
            const double cb = 8.0 * g2 * g2 * vm4 + c1 + 108.0 * g2 * vm4 + c4;
            const double tilde4 = 2.0 * ca * c2 / (kc * kc) + 2.0 * cb * alpha / kc;
            mc.value_m4 = (8.0 * tilde4 + 8.0 * vm4) / (mu_min * mu_min);
            mc.value_m2 = (2.0 * c2 / kc + 2.0 * vm2) / mu_min;
            mc.intermediates = {{"gamma", gamma}, {"mu_max", mu_max}, {"mu_min", mu_min}, {"V_mu", vm},
                                {"kappa", kc},    {"C2_mu", c2},      {"C1_mu", c1},      {"C4_mu", c4},
                                {"C_A", ca},      {"C_B", cb}};
            break;
        }
        case ModelKind::GibbsConvex1d:
            throw InvalidArgument("markov_moment_constant: Gibbs models are not covered under Markov noise");
    }
    mc.value_m3 = std::pow(mc.value_m4, 0.75);
    return mc;
}

inline json to_json(const MomentConstants& m) {
    return {{"which", to_string(m.which)},         {"value_m3", real_to_json(m.value_m3)},
            {"value_m2", real_to_json(m.value_m2)}, {"value_m4", real_to_json(m.value_m4)},
            {"E_V2", real_to_json(m.ev2)},          {"sup_W_op", real_to_json(m.sup_w_op)},
            {"intermediates", m.intermediates}};
}

inline MomentConstants moments_from_json(const json& j) {
    MomentConstants m;
    m.which = moment_branch_from_string(j.at("which").get<std::string>());
    m.value_m3 = real_from_json(j.at("value_m3"), "moments.value_m3");
    m.value_m2 = real_from_json(j.at("value_m2"), "moments.value_m2");
    m.value_m4 = real_from_json(j.at("value_m4"), "moments.value_m4");
    m.ev2 = real_from_json(j.at("E_V2"), "moments.E_V2");
    m.sup_w_op = real_from_json(j.at("sup_W_op"), "moments.sup_W_op");
    m.intermediates = j.at("intermediates");
    return m;
}

// ---------------------------------------------------------------------------
// Wasserstein constants

/// U = M E|Y|^2 g1 + (L^2/2) g2 E|Y|^2 + g3 (1 + L^3 E|Y|^3 + E|xi|^3).
inline double theorem_constant(double m, double l, const SteinConstants& s, double ey2, double ey3, double exi3) {
    return m * ey2 * s.g1 + 0.5 * l * l * s.g2 * ey2 + s.g3 * (1.0 + l * l * l * ey3 + exi3);
}

struct UOptions {
    bool sharper_second_moment = false;  ///< use m2/sigma instead of A^2 for E|Y|^2 (SGD only)
};

/// U1 (SGD), U2 (linear SA) or U3 (contractive SA), substituting A^2 and A^3 for
/// the second and third moment placeholders.
inline double iid_wasserstein_constant(const ModelSpec& model, const SteinConstants& s, const MomentConstants& mc,
                                       double exi3, const UOptions& opt = {}) {
    const double a = mc.value_m3;
    double ey2 = a * a;
    if (opt.sharper_second_moment && model.kind == ModelKind::SgdStronglyConvex) ey2 = mc.value_m2;
    switch (model.kind) {
        case ModelKind::SgdStronglyConvex:
            if (mc.which != MomentBranch::A_SGD) break;
            return theorem_constant(model.second_deriv_M, model.lipschitz_L, s, ey2, a * a * a, exi3);
        case ModelKind::LinearSA:
            if (mc.which != MomentBranch::A_LSA) break;
            return theorem_constant(0.0, op_norm(model.jacobian_at_root), s, ey2, a * a * a, exi3);
        case ModelKind::ContractiveSA:
            if (mc.which != MomentBranch::A_CSA) break;
            return theorem_constant(model.second_deriv_M, model.lipschitz_L, s, ey2, a * a * a, exi3);
        case ModelKind::GibbsConvex1d:
            break;
    }
    throw InvalidArgument("wasserstein_constant: regime/parameter mismatch");
}

/// Per-summand breakdown of the Markov constant.
struct MarkovTerms {
    double cubic = 0.0;
    double curvature = 0.0;
    double poisson_v = 0.0;
    double poisson_w = 0.0;
    double cross = 0.0;
    double total() const { return cubic + curvature + poisson_v + poisson_w + cross; }
};

inline MarkovTerms markov_terms(const ModelSpec& model, const SteinConstants& s, const MomentConstants& mc,
                                const MarkovNoise& chain, double alpha) {
    if (mc.which != MomentBranch::Markov) throw InvalidArgument("wasserstein_constant: regime/parameter mismatch");
    const double l = model.kind == ModelKind::LinearSA ? op_norm(model.jacobian_at_root) : model.lipschitz_L;
    const double d = model.dim;
    MarkovTerms t;
    t.cubic = s.g3 * 2.0 * (1.0 + l * l * l * mc.value_m3 + chain.m3);
    t.curvature = 0.5 * model.second_deriv_M * s.g1 * mc.value_m2;
    t.poisson_v = 2.0 * s.g3 * std::sqrt(chain.v2) * (l * l * alpha * std::sqrt(mc.value_m4) + std::sqrt(chain.m4) + 1.0);
    t.poisson_w = d * s.g3 * chain.sup_W_op * std::sqrt(2.0 * l * l * alpha * mc.value_m2 + 2.0 * chain.m2);
    t.cross = l * std::sqrt(alpha) * s.g2 * std::sqrt(chain.v2) * std::sqrt(mc.value_m2);
    return t;
}

/// (8 sqrt(|Sigma_Y|_op) + offset) sqrt(U); offset is 1 for i.i.d. noise and 2 for Markov noise.
inline double tail_constant(const SpdMat& sigma_y, double u, double offset) {
    return (8.0 * std::sqrt(lambda_max(sigma_y)) + offset) * std::sqrt(u);
}

// ---------------------------------------------------------------------------
// Tail bounds

struct TailEnvelope {
    double center = 0.0;  ///< Gaussian tail P(<Z, zeta> > a)
    double width = 0.0;
    double lower = 0.0;
    double upper = 1.0;
    double s = 0.0;       ///< sqrt(zeta^T Sigma_Y zeta)
};

namespace detail {
inline double directional_scale(const Vec& zeta, const SpdMat& sigma_y) {
    if (zeta.size() != sigma_y.dim()) throw InvalidArgument("zeta: dimension mismatch");
    if (std::abs(zeta.norm() - 1.0) > 1e-12) throw InvalidArgument("zeta: must be a unit vector");
    return std::sqrt(zeta.dot(sigma_y.mat() * zeta));
}
}  // namespace detail

/// Gaussian tail +- ((1 - rho) a / s) phi(rho a / s) + dW / ((1 - rho) a), clamped to [0, 1].
inline TailEnvelope tail_envelope(double a, const Vec& zeta, const SpdMat& sigma_y, double dw, double rho) {
    if (!(a > 0.0)) throw InvalidArgument("tail_envelope: a must be > 0");
    if (!(dw >= 0.0)) throw InvalidArgument("tail_envelope: dW must be >= 0");
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("tail_envelope: rho must lie in [0, 1)");
    if (rho == 1.0 && dw > 0.0) throw InvalidArgument("tail_envelope: rho = 1 requires dW = 0");
    TailEnvelope e;
    e.s = detail::directional_scale(zeta, sigma_y);
    const double x = a / e.s;
    e.center = normal_sf(x);
    e.width = rho == 1.0 ? 0.0 : (1.0 - rho) * x * normal_pdf(rho * x) + dw / ((1.0 - rho) * a);
    e.lower = std::clamp(e.center - e.width, 0.0, 1.0);
    e.upper = std::clamp(e.center + e.width, 0.0, 1.0);
    return e;
}

/// (8 sqrt(|Sigma_Y|_op) + 1) delta^{1/2} alpha^{1/4} log^{1/2}(1/alpha) / a.
///
/// Requires delta sqrt(alpha) log(1/alpha) < 1; otherwise the optimized rho does
/// not exist and the caller should use tail_envelope directly.
inline double optimized_tail_bound(double a, const Vec& zeta, const SpdMat& sigma_y, double delta, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("optimized_tail_bound: alpha must lie in (0, 1)");
    if (!(a > 0.0)) throw InvalidArgument("optimized_tail_bound: a must be > 0");
    if (!(delta >= 0.0)) throw InvalidArgument("optimized_tail_bound: delta must be >= 0");
    (void)detail::directional_scale(zeta, sigma_y);
    const double lg = std::log(1.0 / alpha);
    if (!(delta * std::sqrt(alpha) * lg < 1.0)) {
        throw InvalidArgument("optimized_tail_bound: precondition delta sqrt(alpha) log(1/alpha) < 1 violated; use tail_envelope");
    }
    return (8.0 * std::sqrt(lambda_max(sigma_y)) + 1.0) * std::sqrt(delta) * std::pow(alpha, 0.25) * std::sqrt(lg) / a;
}

/// rho = 1 - sqrt(delta sqrt(alpha) log(1/alpha)) when dW = delta sqrt(alpha) log(1/alpha);
/// clamped to [0, 1).
inline double optimized_rho(double dw) {
    if (dw <= 0.0) return 1.0;
    return std::clamp(1.0 - std::sqrt(std::min(1.0, dw)), 0.0, 1.0 - 1e-12);
}

// ---------------------------------------------------------------------------
// One-dimensional exchangeable-pair bound and Gibbs constants

/// (sqrt(2 pi (2 - alpha) E w^4) + (8 (2 - alpha)^{3/2} / 3) E|w|^3) sqrt(alpha).
inline double exch_pair_bound_1d(double alpha, double m3_abs, double m4) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("exch_pair_bound_1d: alpha must lie in (0, 1)");
    if (!(m3_abs >= 0.0) || !(m4 >= 0.0) || !std::isfinite(m3_abs) || !std::isfinite(m4)) {
        throw InvalidArgument("exch_pair_bound_1d: moments must be finite and nonnegative");
    }
    const double t = 2.0 - alpha;
    return (std::sqrt(2.0 * std::numbers::pi * t * m4) + (8.0 * std::pow(t, 1.5) / 3.0) * m3_abs) * std::sqrt(alpha);
}

/// Exact W1 between N(0, 1/(2 - alpha)) and N(0, 1/2).
inline double exch_pair_exact_w1(double alpha) {
    return std::sqrt(2.0 / std::numbers::pi) * std::abs(1.0 / std::sqrt(2.0 - alpha) - 1.0 / std::numbers::sqrt2);
}

/// U5 = 2 M R C_h / (h (h-1)!).
inline double gibbs_constant(const ModelSpec& model, double r, double c_h) {
    if (model.kind != ModelKind::GibbsConvex1d || !model.gibbs_order_h) {
        throw InvalidArgument("gibbs_constant: model is not a Gibbs model");
    }
    if (!(r > 0.0)) throw InvalidArgument("gibbs.R: must be > 0");
    if (!(c_h > 0.0)) throw InvalidArgument("gibbs.C_h: must be > 0");
    const int h = *model.gibbs_order_h;
    return 2.0 * model.second_deriv_M * r * c_h / (h * detail::factorial(h - 1));
}

/// Normalized Gibbs law c exp(-kappa y^h) with kappa = 2 f^(h)(x*) / (sigma^2 h!).
class GibbsDensity {
public:
    GibbsDensity(int h, double top_deriv, double noise_variance, int cells = 4000) : h_(h) {
        if (h < 2 || h % 2 != 0) throw InvalidArgument("gibbs_density: h must be even and >= 2");
        if (!(top_deriv > 0.0)) throw InvalidArgument("gibbs_density: f^(h)(x*) must be > 0");
        if (!(noise_variance > 0.0)) throw InvalidArgument("gibbs_density: noise variance must be > 0");
        kappa_ = 2.0 * top_deriv / (noise_variance * detail::factorial(h));
        // Tail mass beyond Y is at most exp(-kappa Y^h) / (kappa Y^{h-1}); the
        // normalizer is at least 2 c / e with c = kappa^{-1/h}.
        const double c = std::pow(kappa_, -1.0 / h);
        const double z_lower = 2.0 * c / std::numbers::e;
        double y = c;
        while (std::exp(-kappa_ * std::pow(y, h)) / (kappa_ * std::pow(y, h - 1)) > 1e-13 * z_lower) y *= 1.02;
        ymax_ = y;
        cells_ = cells;
        dy_ = 2.0 * ymax_ / cells_;
        table_.resize(static_cast<std::size_t>(cells_) + 1);
        table_[0] = 0.0;
        auto f = [this](double t) { return unnormalized(t); };
        for (int i = 0; i < cells_; ++i) {
            const double a = node(i);
            table_[i + 1] = table_[i] + adaptive_simpson(f, a, a + dy_, 1e-16, 30);
        }
        z_ = table_.back();
        for (auto& t : table_) t /= z_;
    }

    double kappa() const noexcept { return kappa_; }
    int order() const noexcept { return h_; }
    double normalizer() const noexcept { return z_; }
    double support_radius() const noexcept { return ymax_; }

    double pdf(double y) const { return unnormalized(y) / z_; }

    double cdf(double y) const {
        if (y <= -ymax_) return 0.0;
        if (y >= ymax_) return 1.0;
        const int i = std::min(cells_ - 1, static_cast<int>((y + ymax_) / dy_));
        const double a = node(i);
        return std::clamp(table_[i] + gauss_legendre8([this](double t) { return pdf(t); }, a, y), 0.0, 1.0);
    }

    double quantile(double u) const {
        if (!(u > 0.0)) return -ymax_;
        if (!(u < 1.0)) return ymax_;
        const auto it = std::upper_bound(table_.begin(), table_.end(), u);
        int i = static_cast<int>(it - table_.begin()) - 1;
        i = std::clamp(i, 0, cells_ - 1);
        double lo = node(i);
        double hi = lo + dy_;
        double y = lo + dy_ * (u - table_[i]) / std::max(table_[i + 1] - table_[i], 1e-300);
        for (int it2 = 0; it2 < 60; ++it2) {
            const double g = cdf(y) - u;
            if (g > 0.0) hi = y; else lo = y;
            const double p = pdf(y);
            double next = p > 0.0 ? y - g / p : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - y) <= 1e-15 * std::max(1.0, std::abs(y))) return next;
            y = next;
        }
        return y;
    }

    /// Excess kurtosis of the law, Gamma(5/h) Gamma(1/h) / Gamma(3/h)^2 - 3.
    double excess_kurtosis() const {
        const double a = 1.0 / h_;
        return std::tgamma(5 * a) * std::tgamma(a) / (std::tgamma(3 * a) * std::tgamma(3 * a)) - 3.0;
    }

private:
    double unnormalized(double y) const { return std::exp(-kappa_ * std::pow(std::abs(y), h_)); }
    double node(int i) const { return -ymax_ + i * dy_; }

    int h_;
    double kappa_ = 0.0;
    double ymax_ = 0.0;
    double dy_ = 0.0;
    int cells_ = 0;
    double z_ = 1.0;
    std::vector<double> table_;
};

inline GibbsDensity gibbs_density(const ModelSpec& model, double noise_variance) {
    if (model.kind != ModelKind::GibbsConvex1d) throw InvalidArgument("gibbs_density: model is not a Gibbs model");
    return GibbsDensity(*model.gibbs_order_h, *model.gibbs_top_deriv, noise_variance);
}

// ---------------------------------------------------------------------------
// Ledger

enum class Regime { Iid, Markov, Gibbs, ExchPair1d };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::Iid: return "iid";
        case Regime::Markov: return "markov";
        case Regime::Gibbs: return "gibbs";
        case Regime::ExchPair1d: return "exch-pair-1d";
    }
    return "?";
}

inline Regime regime_from_string(const std::string& s) {
    if (s == "iid") return Regime::Iid;
    if (s == "markov") return Regime::Markov;
    if (s == "gibbs") return Regime::Gibbs;
    if (s == "exch-pair-1d") return Regime::ExchPair1d;
    throw InvalidArgument("ledger.regime: unknown regime '" + s + "'");
}

/// Every constant of one bound together with the inputs it came from.
struct ConstantLedger {
    Regime regime = Regime::Iid;
    std::string constant_name;  ///< U1, U2, U3, U4, U5 or exch-pair
    json model = json::object();
    json noise = json::object();
    Mat sigma;    ///< noise covariance (Sigma, or Sigma_M under Markov noise)
    Mat sigma_y;  ///< Lyapunov solution
    SteinConstants stein;
    MomentConstants moments;
    double U = kNaN;
    double U_tail = kNaN;
    double alpha = kNaN;          ///< stepsize at which an alpha-dependent U was evaluated
    double U_uniform = kNaN;      ///< Markov: U evaluated at alpha = 1
    double U_tail_uniform = kNaN;
    bool sharper_second_moment = false;
    json markov_terms = json::object();
    double R = kNaN;
    double C_h = kNaN;
    double U5 = kNaN;
};

inline const char* iid_constant_name(ModelKind k) {
    switch (k) {
        case ModelKind::SgdStronglyConvex: return "U1";
        case ModelKind::LinearSA: return "U2";
        case ModelKind::ContractiveSA: return "U3";
        case ModelKind::GibbsConvex1d: return "U5";
    }
    return "?";
}

inline ConstantLedger build_iid_ledger(const ModelSpec& model, const IidNoise& noise, const UOptions& opt = {}) {
    if (noise.dim != model.dim) throw InvalidArgument("noise: dimension does not match model");
    ConstantLedger l;
    l.regime = Regime::Iid;
    l.constant_name = iid_constant_name(model.kind);
    l.model = to_json(model);
    l.noise = to_json(noise);
    l.sharper_second_moment = opt.sharper_second_moment;
    const SpdMat sigma = noise.covariance();
    const SpdMat sy = solve_lyapunov(model.jacobian_at_root, sigma);
    l.sigma = sigma.mat();
    l.sigma_y = sy.mat();
    l.stein = stein_constants(sy, sigma);
    l.moments = moment_constant(model, noise.moments);
    l.U = iid_wasserstein_constant(model, l.stein, l.moments, noise.moments.m3, opt);
    l.U_tail = tail_constant(sy, l.U, 1.0);
    return l;
}

inline ConstantLedger build_markov_ledger(const ModelSpec& model, const MarkovNoise& chain, double alpha) {
    if (chain.dim != model.dim) throw InvalidArgument("noise: dimension does not match model");
    if (!chain.long_run_cov_pd) throw InvalidArgument("noise: long-run covariance is not positive definite");
    ConstantLedger l;
    l.regime = Regime::Markov;
    l.constant_name = "U4";
    l.model = to_json(model);
    l.noise = to_json(chain);
    const SpdMat sigma(chain.long_run_cov);
    const SpdMat sy = solve_lyapunov(model.jacobian_at_root, sigma);
    l.sigma = sigma.mat();
    l.sigma_y = sy.mat();
    l.stein = stein_constants(sy, sigma);
    l.alpha = alpha;
    l.moments = markov_moment_constant(model, chain, alpha);
    const MarkovTerms t = markov_terms(model, l.stein, l.moments, chain, alpha);
    l.U = t.total();
    l.U_tail = tail_constant(sy, l.U, 2.0);
    l.markov_terms = {{"cubic", t.cubic}, {"curvature", t.curvature}, {"poisson_V", t.poisson_v},
                      {"poisson_W", t.poisson_w}, {"cross", t.cross}};
    const MomentConstants mu = markov_moment_constant(model, chain, 1.0);
    l.U_uniform = markov_terms(model, l.stein, mu, chain, 1.0).total();
    l.U_tail_uniform = tail_constant(sy, l.U_uniform, 2.0);
    return l;
}

inline ConstantLedger build_gibbs_ledger(const ModelSpec& model, double noise_variance, double r, double c_h) {
    ConstantLedger l;
    l.regime = Regime::Gibbs;
    l.constant_name = "U5";
    l.model = to_json(model);
    l.noise = {{"variance", noise_variance}};
    l.R = r;
    l.C_h = c_h;
    l.U5 = gibbs_constant(model, r, c_h);
    l.U = l.U5;
    return l;
}

inline json to_json(const ConstantLedger& l) {
    json j = {{"schema_version", 1},
              {"regime", to_string(l.regime)},
              {"constant_name", l.constant_name},
              {"model", l.model},
              {"noise", l.noise},
              {"U", real_to_json(l.U)},
              {"U_tail", real_to_json(l.U_tail)},
              {"alpha", real_to_json(l.alpha)},
              {"U_uniform", real_to_json(l.U_uniform)},
              {"U_tail_uniform", real_to_json(l.U_tail_uniform)},
              {"sharper_second_moment", l.sharper_second_moment},
              {"markov_terms", l.markov_terms},
              {"R", real_to_json(l.R)},
              {"C_h", real_to_json(l.C_h)},
              {"U5", real_to_json(l.U5)}};
    if (l.regime == Regime::Iid || l.regime == Regime::Markov) {
        j["sigma"] = mat_to_json(l.sigma);
        j["sigma_y"] = mat_to_json(l.sigma_y);
        j["stein"] = to_json(l.stein);
        j["moments"] = to_json(l.moments);
    }
    return j;
}

inline ConstantLedger ledger_from_json(const json& j) {
    ConstantLedger l;
    l.regime = regime_from_string(j.at("regime").get<std::string>());
    l.constant_name = j.at("constant_name").get<std::string>();
    l.model = j.at("model");
    l.noise = j.at("noise");
    l.U = real_from_json(j.at("U"), "ledger.U");
    l.U_tail = real_from_json(j.at("U_tail"), "ledger.U_tail");
    l.alpha = real_from_json(j.at("alpha"), "ledger.alpha");
    l.U_uniform = real_from_json(j.at("U_uniform"), "ledger.U_uniform");
    l.U_tail_uniform = real_from_json(j.at("U_tail_uniform"), "ledger.U_tail_uniform");
    l.sharper_second_moment = j.at("sharper_second_moment").get<bool>();
    l.markov_terms = j.at("markov_terms");
    l.R = real_from_json(j.at("R"), "ledger.R");
    l.C_h = real_from_json(j.at("C_h"), "ledger.C_h");
    l.U5 = real_from_json(j.at("U5"), "ledger.U5");
    if (j.contains("stein")) {
        l.sigma = mat_from_json(j.at("sigma"), "ledger.sigma");
        l.sigma_y = mat_from_json(j.at("sigma_y"), "ledger.sigma_y");
        l.stein = stein_from_json(j.at("stein"));
        l.moments = moments_from_json(j.at("moments"));
    }
    return l;
}

}  // namespace sa_steady
