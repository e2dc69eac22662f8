#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "sa_steady/error.hpp"
#include "sa_steady/rng.hpp"

namespace sa_steady {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Largest supported state dimension. Keeps the d^2 x d^2 Kronecker system small.
inline constexpr int kMaxDim = 32;

inline void require_finite(const Mat& a, std::string_view what) {
    if (a.size() == 0) {
        throw InvalidArgument(std::string(what) + ": empty matrix");
    }
    if (!a.allFinite()) {
        throw InvalidArgument(std::string(what) + ": non-finite entry");
    }
}

inline void require_square(const Mat& a, std::string_view what) {
    require_finite(a, what);
    if (a.rows() != a.cols()) {
        throw InvalidArgument(std::string(what) + ": matrix is not square");
    }
}

/// Symmetric to within `rel` relative to the largest entry.
inline bool is_symmetric(const Mat& a, double rel = 1e-12) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel * scale;
}

/// Symmetric eigendecomposition with ascending eigenvalues.
struct EigenSym {
    Vec values;
    Mat vectors;
};

inline EigenSym eig_sym(const Mat& a) {
    require_square(a, "eig_sym");
    if (!is_symmetric(a)) {
        throw InvalidArgument("eig_sym: input is not symmetric");
    }
    const Mat sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    if (es.info() != Eigen::Success) {
        throw NumericalError("eig_sym: eigensolver did not converge");
    }
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Operator norm induced by the Euclidean norm (largest singular value).
inline double op_norm(const Mat& a) {
    require_finite(a, "op_norm");
    if (a.size() == 1) return std::abs(a(0, 0));
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues()(0);
}

/// Symmetric positive definite matrix, validated on construction.
class SpdMat {
public:
    SpdMat() = default;

    /// Throws InvalidArgument unless `a` is symmetric with strictly positive spectrum.
    explicit SpdMat(const Mat& a) {
        require_square(a, "SpdMat");
        if (!is_symmetric(a)) {
            throw InvalidArgument("SpdMat: matrix is not symmetric");
        }
        m_ = 0.5 * (a + a.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(m_, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) {
            throw NumericalError("SpdMat: eigensolver did not converge");
        }
        if (!(es.eigenvalues()(0) > 0.0)) {
            throw InvalidArgument("SpdMat: matrix is not positive definite (lambda_min = " +
                                  std::to_string(es.eigenvalues()(0)) + ")");
        }
    }

    static SpdMat identity(int d) { return SpdMat(Mat::Identity(d, d)); }
    static SpdMat scalar(double v) { return SpdMat(Mat::Constant(1, 1, v)); }

    const Mat& mat() const noexcept { return m_; }
    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    double operator()(int i, int j) const { return m_(i, j); }

private:
    Mat m_;
};

inline double lambda_min(const SpdMat& a) { return eig_sym(a.mat()).values(0); }
inline double lambda_max(const SpdMat& a) { return eig_sym(a.mat()).values(a.dim() - 1); }

namespace detail {
inline Mat spectral_apply(const Mat& a, double (*fn)(double)) {
    const EigenSym es = eig_sym(a);
    Vec f = es.values;
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = fn(f(i));
    Mat r = es.vectors * f.asDiagonal() * es.vectors.transpose();
    return 0.5 * (r + r.transpose());
}
}  // namespace detail

inline SpdMat spd_sqrt(const SpdMat& a) {
    return SpdMat(detail::spectral_apply(a.mat(), [](double x) { return std::sqrt(x); }));
}

inline SpdMat spd_inv_sqrt(const SpdMat& a) {
    return SpdMat(detail::spectral_apply(a.mat(), [](double x) { return 1.0 / std::sqrt(x); }));
}

/// Symmetric square root of a positive semidefinite matrix; tiny negative
/// eigenvalues from rounding are clamped to zero.
inline Mat psd_sqrt(const Mat& a) {
    return detail::spectral_apply(a, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

/// Residual J X + X J^T + S in Frobenius norm.
inline double lyapunov_residual(const Mat& j, const Mat& x, const Mat& s) {
    return (j * x + x * j.transpose() + s).norm();
}

/// Solves J X + X J^T = -S for arbitrary symmetric S through the Kronecker
/// system (I (x) J + J (x) I) vec(X) = -vec(S).
///
/// Throws NumericalError when the system is singular, i.e. when J has
/// eigenvalues with lambda_i + conj(lambda_j) = 0.
inline Mat solve_lyapunov_general(const Mat& j, const Mat& s) {
    require_square(j, "solve_lyapunov: J");
    require_square(s, "solve_lyapunov: Sigma");
    const Eigen::Index d = j.rows();
    if (s.rows() != d) {
        throw InvalidArgument("solve_lyapunov: J and Sigma dimensions differ");
    }
    if (d > kMaxDim) {
        throw InvalidArgument("solve_lyapunov: dimension exceeds " + std::to_string(kMaxDim));
    }
    const Eigen::Index n = d * d;
    Mat k = Mat::Zero(n, n);
    // vec is column-major: entry (r, c) of X sits at c*d + r.
    for (Eigen::Index c = 0; c < d; ++c) {
        for (Eigen::Index r = 0; r < d; ++r) {
            const Eigen::Index row = c * d + r;
            for (Eigen::Index m = 0; m < d; ++m) {
                k(row, c * d + m) += j(r, m);  // (J X)(r,c) = sum_m J(r,m) X(m,c)
                k(row, m * d + r) += j(c, m);  // (X J^T)(r,c) = sum_m X(r,m) J(c,m)
            }
        }
    }
    Eigen::PartialPivLU<Mat> lu(k);
    const double rc = lu.rcond();
    if (!(rc > 1e-13)) {
        throw NumericalError("solve_lyapunov: singular Kronecker system (eigenvalue pair with lambda_i + conj(lambda_j) = 0), rcond = " +
                             std::to_string(rc));
    }
    const Vec rhs = -Eigen::Map<const Vec>(s.data(), n);
    Vec x = lu.solve(rhs);
    // One step of iterative refinement tightens the residual for ill-conditioned J.
    x += lu.solve(rhs - k * x);
    Mat out = Eigen::Map<const Mat>(x.data(), d, d);
    out = 0.5 * (out + out.transpose());
    if (!out.allFinite()) {
        throw NumericalError("solve_lyapunov: non-finite solution");
    }
    return out;
}

/// Certificate of the Hurwitz property: the SPD solution P of J^T P + P J = -I.
struct HurwitzCertificate {
    bool hurwitz = false;
    std::optional<SpdMat> witness;
    std::string diagnostic;

    explicit operator bool() const noexcept { return hurwitz; }
};

inline HurwitzCertificate is_hurwitz(const Mat& j) {
    require_square(j, "is_hurwitz");
    HurwitzCertificate cert;
    Mat p;
    try {
        p = solve_lyapunov_general(j.transpose(), Mat::Identity(j.rows(), j.cols()));
    } catch (const NumericalError& e) {
        cert.diagnostic = e.what();
        return cert;
    }
    const EigenSym es = eig_sym(p);
    if (!(es.values(0) > 0.0)) {
        cert.diagnostic = "Lyapunov solution P is not positive definite (lambda_min(P) = " +
                          std::to_string(es.values(0)) + ")";
        return cert;
    }
    cert.hurwitz = true;
    cert.witness = SpdMat(p);
    return cert;
}

/// Stationary covariance Sigma_Y with J Sigma_Y + Sigma_Y J^T = -Sigma.
inline SpdMat solve_lyapunov(const Mat& j, const SpdMat& sigma) {
    if (j.rows() != sigma.dim() || j.cols() != sigma.dim()) {
        throw InvalidArgument("solve_lyapunov: J and Sigma dimensions differ");
    }
    const HurwitzCertificate h = is_hurwitz(j);
    if (!h) {
        throw NotHurwitz("solve_lyapunov: J is not Hurwitz: " + h.diagnostic);
    }
    const Mat x = solve_lyapunov_general(j, sigma.mat());
    const double tol = 1e-10 * sigma.mat().norm();
    const double res = lyapunov_residual(j, x, sigma.mat());
    if (!(res <= tol)) {
        throw NumericalError("solve_lyapunov: residual " + std::to_string(res) + " exceeds tolerance");
    }
    return SpdMat(x);
}

/// n x d matrix whose rows are independent N(0, Sigma) draws, generated as
/// Sigma^{1/2} z with the symmetric square root.
template <class Urbg>
Mat sample_gaussian(const SpdMat& sigma, Eigen::Index n, Urbg& rng) {
    if (n < 1) throw InvalidArgument("sample_gaussian: n must be >= 1");
    const Mat root = spd_sqrt(sigma).mat();
    const Eigen::Index d = sigma.dim();
    NormalDist normal;
    Mat out(n, d);
    Vec z(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) z(k) = normal(rng);
        out.row(i) = (root * z).transpose();
    }
    return out;
}

}  // namespace sa_steady
