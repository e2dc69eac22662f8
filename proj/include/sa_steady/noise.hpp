#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sa_steady/error.hpp"
#include "sa_steady/json_util.hpp"
#include "sa_steady/matlib.hpp"
#include "sa_steady/rng.hpp"

namespace sa_steady {

enum class IidKind { Gaussian, SignedPareto, Rademacher, Discrete };

inline const char* to_string(IidKind k) {
    switch (k) {
        case IidKind::Gaussian: return "gaussian";
        case IidKind::SignedPareto: return "signed-pareto";
        case IidKind::Rademacher: return "rademacher";
        case IidKind::Discrete: return "discrete";
    }
    return "?";
}

/// E|xi|^2, E|xi|^3, E|xi|^4 in the Euclidean norm.
struct NoiseMoments {
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    bool m3_exact = true;   ///< false when m3 is an upper bound rather than the exact value
    bool m4_finite = true;
};

/// Expected Euclidean norm cubed of a standard normal vector in R^d.
inline double chi_third_moment(int d) {
    return 2.0 * std::numbers::sqrt2 * std::exp(std::lgamma((d + 3) / 2.0) - std::lgamma(d / 2.0));
}

/// Mean-zero i.i.d. noise law.
struct IidNoise {
    IidKind kind = IidKind::Gaussian;
    int dim = 1;
    Mat cov;       ///< covariance Sigma
    Mat cov_sqrt;  ///< symmetric square root, Gaussian only
    double x_m = 0.0;
    double beta = 0.0;
    double scale = 0.0;
    Mat atoms;       ///< Discrete only, one atom per row
    Vec probs;
    Vec cum_probs;
    NoiseMoments moments;

    /// Gaussian with symmetric positive semidefinite covariance (zero allowed).
    static IidNoise gaussian(const Mat& sigma) {
        require_square(sigma, "noise.cov");
        if (sigma.rows() > kMaxDim) throw InvalidArgument("noise.cov: dimension exceeds " + std::to_string(kMaxDim));
        if (!is_symmetric(sigma)) throw InvalidArgument("noise.cov: covariance must be symmetric");
        const Mat s = 0.5 * (sigma + sigma.transpose());
        const EigenSym es = eig_sym(s);
        const double tol = 1e-12 * std::max(1.0, std::abs(es.values.maxCoeff()));
        if (es.values(0) < -tol) throw InvalidArgument("noise.cov: covariance must be positive semidefinite");
        IidNoise n;
        n.kind = IidKind::Gaussian;
        n.dim = static_cast<int>(s.rows());
        n.cov = s;
        n.cov_sqrt = psd_sqrt(s);
        const double tr = s.trace();
        n.moments.m2 = tr;
        n.moments.m4 = tr * tr + 2.0 * (s * s).trace();
        const double lmax = std::max(0.0, es.values(n.dim - 1));
        const double lmin = std::max(0.0, es.values(0));
        if (lmax - lmin <= 1e-12 * std::max(1.0, lmax)) {
            n.moments.m3 = std::pow(lmax, 1.5) * chi_third_moment(n.dim);
        } else {
            // both are valid upper bounds: sub-isotropic comparison and Lyapunov's inequality
            n.moments.m3 = std::min(std::pow(lmax, 1.5) * chi_third_moment(n.dim), std::pow(n.moments.m4, 0.75));
            n.moments.m3_exact = false;
        }
        return n;
    }

    /// Coordinates sign * Pareto(x_m, beta), Pareto drawn by inverse CDF x_m U^{-1/beta}.
    static IidNoise signed_pareto(double x_m, double beta, int dim = 1) {
        if (!(x_m > 0.0) || !std::isfinite(x_m)) throw InvalidArgument("noise.x_m: must be > 0");
        if (!(beta > 3.0) || !std::isfinite(beta)) throw InvalidArgument("noise.beta: must be > 3 (finite third moment)");
        if (dim < 1 || dim > kMaxDim) throw InvalidArgument("noise.dim: out of range");
        IidNoise n;
        n.kind = IidKind::SignedPareto;
        n.dim = dim;
        n.x_m = x_m;
        n.beta = beta;
        auto abs_moment = [&](double p) { return beta * std::pow(x_m, p) / (beta - p); };
        const double v = abs_moment(2.0);
        n.cov = v * Mat::Identity(dim, dim);
        n.moments.m2 = dim * v;
        n.moments.m4_finite = beta > 4.0;
        if (n.moments.m4_finite) {
            n.moments.m4 = dim * abs_moment(4.0) + dim * (dim - 1.0) * v * v;
        } else {
            n.moments.m4 = INFINITY;
        }
        if (dim == 1) {
            n.moments.m3 = abs_moment(3.0);
        } else {
            n.moments.m3 = n.moments.m4_finite ? std::pow(n.moments.m4, 0.75)
                                               : std::pow(dim, 1.5) * abs_moment(3.0);  // convexity of t^{3/2}
            n.moments.m3_exact = false;
        }
        return n;
    }

    /// Independent +-scale coordinates.
    static IidNoise rademacher(double scale, int dim = 1) {
        if (!(scale >= 0.0) || !std::isfinite(scale)) throw InvalidArgument("noise.scale: must be >= 0");
        if (dim < 1 || dim > kMaxDim) throw InvalidArgument("noise.dim: out of range");
        IidNoise n;
        n.kind = IidKind::Rademacher;
        n.dim = dim;
        n.scale = scale;
        n.cov = scale * scale * Mat::Identity(dim, dim);
        const double r2 = dim * scale * scale;
        n.moments.m2 = r2;
        n.moments.m3 = std::pow(r2, 1.5);
        n.moments.m4 = r2 * r2;
        return n;
    }

    /// Finitely supported law: row k of `atoms` with probability probs(k). Must be mean zero.
    static IidNoise discrete(const Mat& atoms, const Vec& probs) {
        require_finite(atoms, "noise.atoms");
        require_finite(probs, "noise.probs");
        if (atoms.rows() < 1 || atoms.rows() != probs.size()) throw InvalidArgument("noise.probs: one probability per atom required");
        if (atoms.cols() < 1 || atoms.cols() > kMaxDim) throw InvalidArgument("noise.atoms: dimension out of range");
        if (probs.minCoeff() < 0.0 || std::abs(probs.sum() - 1.0) > 1e-12) {
            throw InvalidArgument("noise.probs: must be nonnegative and sum to 1");
        }
        const Vec mean = atoms.transpose() * probs;
        if (mean.norm() > 1e-12 * std::max(1.0, atoms.cwiseAbs().maxCoeff())) {
            throw InvalidArgument("noise.atoms: law must have mean zero");
        }
        IidNoise n;
        n.kind = IidKind::Discrete;
        n.dim = static_cast<int>(atoms.cols());
        n.atoms = atoms;
        n.probs = probs;
        n.cum_probs.resize(probs.size());
        double c = 0.0;
        for (Eigen::Index k = 0; k < probs.size(); ++k) n.cum_probs(k) = (c += probs(k));
        n.cum_probs(probs.size() - 1) = 1.0;
        n.cov = atoms.transpose() * probs.asDiagonal() * atoms;
        for (Eigen::Index k = 0; k < atoms.rows(); ++k) {
            const double r = atoms.row(k).norm();
            n.moments.m2 += probs(k) * r * r;
            n.moments.m3 += probs(k) * r * r * r;
            n.moments.m4 += probs(k) * r * r * r * r;
        }
        return n;
    }

    bool cov_is_pd() const {
        const EigenSym es = eig_sym(cov);
        return es.values(0) > 0.0;
    }

    SpdMat covariance() const { return SpdMat(cov); }
};

/// Per-replica sampler for an IidNoise; owns the normal-distribution state.
class IidSampler {
public:
    explicit IidSampler(const IidNoise& n) : n_(&n), z_(static_cast<std::size_t>(n.dim)) {}

    void operator()(Rng& rng, double* out) {
        const int d = n_->dim;
        switch (n_->kind) {
            case IidKind::Gaussian:
                if (d == 1) {
                    out[0] = n_->cov_sqrt(0, 0) * normal_(rng);
                } else {
                    for (int k = 0; k < d; ++k) z_[k] = normal_(rng);
                    for (int i = 0; i < d; ++i) {
                        double s = 0.0;
                        for (int k = 0; k < d; ++k) s += n_->cov_sqrt(i, k) * z_[k];
                        out[i] = s;
                    }
                }
                break;
            case IidKind::SignedPareto:
                for (int i = 0; i < d; ++i) {
                    const double mag = n_->x_m * std::pow(rng.uniform_open(), -1.0 / n_->beta);
                    out[i] = (rng() >> 63) ? mag : -mag;
                }
                break;
            case IidKind::Rademacher:
                for (int i = 0; i < d; ++i) out[i] = (rng() >> 63) ? n_->scale : -n_->scale;
                break;
            case IidKind::Discrete: {
                const double u = rng.uniform_open();
                Eigen::Index k = 0;
                while (k + 1 < n_->cum_probs.size() && u >= n_->cum_probs(k)) ++k;
                for (int i = 0; i < d; ++i) out[i] = n_->atoms(k, i);
                break;
            }
        }
    }

private:
    const IidNoise* n_;
    NormalDist normal_;
    std::vector<double> z_;
};

inline Vec draw_iid(const IidNoise& n, Rng& rng) {
    IidSampler s(n);
    Vec v(n.dim);
    s(rng, v.data());
    return v;
}

// ---------------------------------------------------------------------------
// Finite-state Markov noise

/// Throws InvalidArgument unless P is row-stochastic, irreducible and aperiodic.
///
/// Primitivity is checked on the sparsity pattern: P^{n^2} must be strictly
/// positive (Wielandt's bound (n-1)^2 + 1 <= n^2).
inline void validate_transition(const Mat& p) {
    require_square(p, "noise.transition");
    const Eigen::Index n = p.rows();
    if (p.minCoeff() < 0.0) throw InvalidArgument("noise.transition: negative entry");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(p.row(i).sum() - 1.0) > 1e-12) {
            throw InvalidArgument("noise.transition: row " + std::to_string(i) + " does not sum to 1");
        }
    }
    using BoolMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
    BoolMat pat = (p.array() > 0.0).cast<int>().matrix();
    BoolMat acc = BoolMat::Identity(n, n);
    auto bool_mul = [n](const BoolMat& a, const BoolMat& b) {
        BoolMat r = (a * b).unaryExpr([](int v) { return v > 0 ? 1 : 0; });
        (void)n;
        return r;
    };
    long long e = static_cast<long long>(n) * n;
    BoolMat base = pat;
    while (e > 0) {
        if (e & 1) acc = bool_mul(acc, base);
        base = bool_mul(base, base);
        e >>= 1;
    }
    if (acc.minCoeff() == 0) {
        throw InvalidArgument("noise.transition: chain is reducible or periodic (P^{n^2} has a zero entry)");
    }
}

/// Stationary distribution: null vector of (P^T - I) normalized to sum 1,
/// solved as an augmented dense system.
inline Vec stationary_dist(const Mat& p) {
    validate_transition(p);
    const Eigen::Index n = p.rows();
    Mat a = p.transpose() - Mat::Identity(n, n);
    a.row(n - 1).setOnes();
    Vec rhs = Vec::Zero(n);
    rhs(n - 1) = 1.0;
    Vec pi = a.partialPivLu().solve(rhs);
    if (!(pi.minCoeff() > 0.0) || !pi.allFinite()) {
        throw NumericalError("stationary_dist: solution is not a positive probability vector");
    }
    pi /= pi.sum();
    return pi;
}

namespace detail {
inline Mat fundamental_matrix(const Mat& p, const Vec& pi) {
    const Eigen::Index n = p.rows();
    return (Mat::Identity(n, n) - p + Vec::Ones(n) * pi.transpose()).inverse();
}
}  // namespace detail

/// Centered solution of the Poisson equation xi = V - P V with pi . V = 0.
/// `emission` holds xi(z) as rows (n_states x d).
inline Mat solve_poisson_V(const Mat& p, const Mat& emission, const Vec& pi) {
    if (emission.rows() != p.rows()) throw InvalidArgument("noise.emission: one row per state required");
    const Vec mean = emission.transpose() * pi;
    const double scale = std::max(1.0, emission.cwiseAbs().maxCoeff());
    if (mean.cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw InvalidArgument("noise.emission: not centered under the stationary distribution (|E_pi xi| = " +
                              std::to_string(mean.cwiseAbs().maxCoeff()) + ")");
    }
    const Eigen::Index n = p.rows();
    const Mat a = Mat::Identity(n, n) - p + Vec::Ones(n) * pi.transpose();
    Mat v = a.partialPivLu().solve(emission);
    const double res = (emission - (v - p * v)).cwiseAbs().maxCoeff();
    if (!(res <= 1e-10 * scale)) {
        throw NumericalError("solve_poisson_V: residual " + std::to_string(res) + " exceeds 1e-10");
    }
    return v;
}

/// Long-run covariance in closed form, E_pi[xi xi^T + xi (PV)^T + (PV) xi^T].
inline Mat long_run_cov(const Mat& p, const Mat& emission, const Vec& pi, const Mat& v) {
    const Mat pv = p * v;
    const Mat d = pi.asDiagonal();
    Mat s = emission.transpose() * d * emission + emission.transpose() * d * pv + pv.transpose() * d * emission;
    return 0.5 * (s + s.transpose());
}

struct SeriesCov {
    Mat value;
    int horizon = 0;
};

/// Long-run covariance from the truncated autocovariance series; the horizon is
/// the first M with |P^M - 1 pi^T|_op * max_z |xi(z)|^2 <= 1e-10.
inline SeriesCov long_run_cov_series(const Mat& p, const Mat& emission, const Vec& pi, int max_horizon = 1000000) {
    const Eigen::Index n = p.rows();
    const Mat d = pi.asDiagonal();
    const Mat limit = Vec::Ones(n) * pi.transpose();
    const double xi_max2 = emission.rowwise().squaredNorm().maxCoeff();
    SeriesCov out;
    out.value = emission.transpose() * d * emission;
    Mat pm = Mat::Identity(n, n);
    for (int m = 1; m <= max_horizon; ++m) {
        pm = pm * p;
        const Mat c = emission.transpose() * d * pm * emission;
        out.value += c + c.transpose();
        if (op_norm(pm - limit) * xi_max2 <= 1e-10) {
            out.horizon = m;
            out.value = 0.5 * (out.value + out.value.transpose());
            return out;
        }
    }
    throw NumericalError("long_run_cov_series: horizon cap reached (chain mixes too slowly)");
}

/// Centered solution of W - PW = Phi - E_pi[Phi] with
/// Phi(z) = -V(z) xi(z)^T + Sigma_M / 2 + xi(z) xi(z)^T / 2.
inline std::vector<Mat> solve_poisson_W(const Mat& p, const Mat& emission, const Vec& pi, const Mat& v,
                                        const Mat& sigma_m) {
    const Eigen::Index n = p.rows();
    const Eigen::Index d = emission.cols();
    std::vector<Mat> phi(static_cast<std::size_t>(n));
    Mat phi_bar = Mat::Zero(d, d);
    for (Eigen::Index z = 0; z < n; ++z) {
        const Vec x = emission.row(z).transpose();
        const Vec vz = v.row(z).transpose();
        phi[z] = -vz * x.transpose() + 0.5 * sigma_m + 0.5 * x * x.transpose();
        phi_bar += pi(z) * phi[z];
    }
    const Mat zinv = detail::fundamental_matrix(p, pi);
    std::vector<Mat> w(static_cast<std::size_t>(n), Mat::Zero(d, d));
    for (Eigen::Index z = 0; z < n; ++z)
        for (Eigen::Index y = 0; y < n; ++y) w[z] += zinv(z, y) * (phi[y] - phi_bar);
    return w;
}

/// Largest entrywise residual of W - PW - (Phi - E_pi Phi).
inline double poisson_W_residual(const Mat& p, const Mat& emission, const Vec& pi, const Mat& v, const Mat& sigma_m,
                                 const std::vector<Mat>& w) {
    const Eigen::Index n = p.rows();
    const Eigen::Index d = emission.cols();
    std::vector<Mat> phi(static_cast<std::size_t>(n));
    Mat phi_bar = Mat::Zero(d, d);
    for (Eigen::Index z = 0; z < n; ++z) {
        const Vec x = emission.row(z).transpose();
        phi[z] = -v.row(z).transpose() * x.transpose() + 0.5 * sigma_m + 0.5 * x * x.transpose();
        phi_bar += pi(z) * phi[z];
    }
    double worst = 0.0;
    for (Eigen::Index z = 0; z < n; ++z) {
        Mat pw = Mat::Zero(d, d);
        for (Eigen::Index y = 0; y < n; ++y) pw += p(z, y) * w[y];
        worst = std::max(worst, (w[z] - pw - (phi[z] - phi_bar)).cwiseAbs().maxCoeff());
    }
    return worst;
}

/// Row-wise cumulative sums of P for inverse-CDF sampling.
inline Mat cumulative_rows(const Mat& p) {
    Mat c = p;
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        for (Eigen::Index k = 1; k < c.cols(); ++k) c(i, k) += c(i, k - 1);
        c(i, c.cols() - 1) = 1.0;
    }
    return c;
}

inline int step_chain(const Mat& cum, int state, Rng& rng) {
    const double u = rng.uniform_open();
    const Eigen::Index n = cum.cols();
    for (Eigen::Index k = 0; k < n - 1; ++k) {
        if (u < cum(state, k)) return static_cast<int>(k);
    }
    return static_cast<int>(n - 1);
}

/// Finite-state Markov noise xi(Z_k) together with its Poisson analytics.
struct MarkovNoise {
    int n_states = 0;
    int dim = 0;
    Mat transition;
    Mat emission;  ///< n_states x d, row z is xi(z)
    Vec stationary;
    Mat poisson_V;  ///< n_states x d, row z is V(z)
    std::vector<Mat> poisson_W;
    Mat long_run_cov;
    bool long_run_cov_pd = false;
    Mat cumulative;
    double residual_V = 0.0;
    double residual_W = 0.0;
    // summaries under pi
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;  ///< E|xi|^p
    double v2 = 0.0;                       ///< E|V|^2
    double sup_xi = 0.0, sup_V = 0.0, sup_W_op = 0.0, sup_W_fro = 0.0;

    int step(int state, Rng& rng) const { return step_chain(cumulative, state, rng); }

    int draw_stationary(Rng& rng) const {
        const double u = rng.uniform_open();
        double c = 0.0;
        for (int k = 0; k < n_states - 1; ++k) {
            c += stationary(k);
            if (u < c) return k;
        }
        return n_states - 1;
    }
};

inline MarkovNoise make_markov_noise(const Mat& p, const Mat& emission) {
    validate_transition(p);
    require_finite(emission, "noise.emission");
    if (emission.rows() != p.rows()) throw InvalidArgument("noise.emission: one row per state required");
    if (emission.cols() > kMaxDim) throw InvalidArgument("noise.emission: dimension exceeds " + std::to_string(kMaxDim));
    MarkovNoise m;
    m.n_states = static_cast<int>(p.rows());
    m.dim = static_cast<int>(emission.cols());
    m.transition = p;
    m.emission = emission;
    m.stationary = stationary_dist(p);
    m.poisson_V = solve_poisson_V(p, emission, m.stationary);
    m.residual_V = (emission - (m.poisson_V - p * m.poisson_V)).cwiseAbs().maxCoeff();
    m.long_run_cov = long_run_cov(p, emission, m.stationary, m.poisson_V);
    m.long_run_cov_pd = eig_sym(m.long_run_cov).values(0) > 0.0;
    m.poisson_W = solve_poisson_W(p, emission, m.stationary, m.poisson_V, m.long_run_cov);
    m.residual_W = poisson_W_residual(p, emission, m.stationary, m.poisson_V, m.long_run_cov, m.poisson_W);
    m.cumulative = cumulative_rows(p);
    for (int z = 0; z < m.n_states; ++z) {
        const double r = emission.row(z).norm();
        const double pz = m.stationary(z);
        m.m2 += pz * r * r;
        m.m3 += pz * r * r * r;
        m.m4 += pz * r * r * r * r;
        m.v2 += pz * m.poisson_V.row(z).squaredNorm();
        m.sup_xi = std::max(m.sup_xi, r);
        m.sup_V = std::max(m.sup_V, m.poisson_V.row(z).norm());
        m.sup_W_op = std::max(m.sup_W_op, op_norm(m.poisson_W[z]));
        m.sup_W_fro = std::max(m.sup_W_fro, m.poisson_W[z].norm());
    }
    return m;
}

/// Chain whose rows all equal pi: an i.i.d. sequence written as a Markov chain.
inline Mat iid_as_chain(const Vec& pi) {
    return Vec::Ones(pi.size()) * pi.transpose();
}

/// The i.i.d. law of a chain whose rows are all equal; empty for a genuinely Markov chain.
inline std::optional<IidNoise> iid_equivalent(const MarkovNoise& m) {
    for (int z = 1; z < m.n_states; ++z) {
        if ((m.transition.row(z) - m.transition.row(0)).cwiseAbs().maxCoeff() > 1e-15) return std::nullopt;
    }
    return IidNoise::discrete(m.emission, m.stationary);
}

inline json to_json(const IidNoise& n) {
    json j = {{"kind", to_string(n.kind)},
              {"dim", n.dim},
              {"cov", mat_to_json(n.cov)},
              {"m2", real_to_json(n.moments.m2)},
              {"m3", real_to_json(n.moments.m3)},
              {"m4", real_to_json(n.moments.m4)},
              {"m3_exact", n.moments.m3_exact}};
    if (n.kind == IidKind::SignedPareto) {
        j["x_m"] = n.x_m;
        j["beta"] = n.beta;
    }
    if (n.kind == IidKind::Rademacher) j["scale"] = n.scale;
    if (n.kind == IidKind::Discrete) {
        j["atoms"] = mat_to_json(n.atoms);
        j["probs"] = vec_to_json(n.probs);
    }
    return j;
}

inline json to_json(const MarkovNoise& m) {
    json w = json::array();
    for (const auto& wz : m.poisson_W) w.push_back(mat_to_json(wz));
    return {{"kind", "markov"},
            {"n_states", m.n_states},
            {"dim", m.dim},
            {"transition", mat_to_json(m.transition)},
            {"emission", mat_to_json(m.emission)},
            {"stationary", vec_to_json(m.stationary)},
            {"poisson_V", mat_to_json(m.poisson_V)},
            {"poisson_W", w},
            {"long_run_cov", mat_to_json(m.long_run_cov)},
            {"long_run_cov_pd", m.long_run_cov_pd},
            {"residual_V", m.residual_V},
            {"residual_W", m.residual_W},
            {"m2", m.m2},
            {"m3", m.m3},
            {"m4", m.m4},
            {"E_V2", m.v2},
            {"sup_xi", m.sup_xi},
            {"sup_V", m.sup_V},
            {"sup_W_op", m.sup_W_op}};
}

}  // namespace sa_steady
