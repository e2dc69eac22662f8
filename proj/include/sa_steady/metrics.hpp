#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sa_steady/error.hpp"
#include "sa_steady/json_util.hpp"
#include "sa_steady/matlib.hpp"
#include "sa_steady/rng.hpp"

namespace sa_steady {

/// Number of bootstrap resamples behind every mc_std_err.
inline constexpr int kBootstrapResamples = 50;
inline constexpr std::uint64_t kDefaultBootstrapSeed = 0xb0075742ULL;
inline constexpr int kDefaultProjections = 128;

enum class W1Method { Sorted1d, Sliced, Quantile1d };

struct W1Estimate {
    double value = 0.0;
    W1Method method = W1Method::Sorted1d;
    int n_proj = 0;
    long long n_samples = 0;
    double mc_std_err = 0.0;

    std::string method_name() const {
        switch (method) {
            case W1Method::Sorted1d: return "sorted-1d";
            case W1Method::Quantile1d: return "quantile-1d";
            case W1Method::Sliced: return "sliced(" + std::to_string(n_proj) + ")";
        }
        return "?";
    }
};

inline json to_json(const W1Estimate& w) {
    return {{"value", w.value}, {"method", w.method_name()}, {"n_samples", w.n_samples}, {"mc_std_err", w.mc_std_err}};
}

namespace detail {

/// n evenly spaced order statistics of a sorted array (identity when sizes match).
inline std::vector<double> thin_sorted(const std::vector<double>& sorted, std::size_t n) {
    const std::size_t m = sorted.size();
    if (m == n) return sorted;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = sorted[std::min(m - 1, static_cast<std::size_t>((static_cast<double>(i) + 0.5) * m / n))];
    }
    return out;
}

inline double sorted_pair_mean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

/// Bootstrap multiplicities: counts of n uniform draws with replacement.
inline void draw_counts(std::vector<std::uint16_t>& c, Rng& rng) {
    const std::size_t n = c.size();
    std::fill(c.begin(), c.end(), std::uint16_t{0});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
        if (c[k] == UINT16_MAX) throw NumericalError("bootstrap: multiplicity overflow");
        ++c[k];
    }
}

/// Mean |x*_(i) - y*_(i)| for resamples given by multiplicities over sorted inputs.
/// `ox`/`oy` map sorted position to original index (null means identity).
inline double weighted_sorted_pair_mean(const std::vector<double>& xs, const std::vector<std::uint16_t>& cx,
                                        const std::uint32_t* ox, const std::vector<double>& ys,
                                        const std::vector<std::uint16_t>& cy, const std::uint32_t* oy) {
    std::size_t ix = 0, iy = 0;
    auto cnt_x = [&](std::size_t i) { return cx[ox ? ox[i] : i]; };
    auto cnt_y = [&](std::size_t i) { return cy[oy ? oy[i] : i]; };
    long long rx = 0, ry = 0;
    const std::size_t n = xs.size();
    double s = 0.0;
    while (true) {
        while (rx == 0 && ix < n) rx = cnt_x(ix++);
        while (ry == 0 && iy < n) ry = cnt_y(iy++);
        if (rx == 0 || ry == 0) break;
        const long long m = std::min(rx, ry);
        s += static_cast<double>(m) * std::abs(xs[ix - 1] - ys[iy - 1]);
        rx -= m;
        ry -= m;
    }
    return s / static_cast<double>(n);
}

inline double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Exact one-dimensional W1 between two empirical laws via the sorted coupling.
///
/// The larger sample is thinned to the smaller size by taking evenly spaced
/// order statistics. mc_std_err is the standard deviation over 50 bootstrap
/// resamples of both samples.
inline W1Estimate w1_sorted_1d(std::vector<double> xs, std::vector<double> ys,
                               std::uint64_t boot_seed = kDefaultBootstrapSeed, int n_boot = kBootstrapResamples) {
    if (xs.empty() || ys.empty()) throw InvalidArgument("w1_sorted_1d: empty sample");
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const std::size_t n = std::min(xs.size(), ys.size());
    xs = detail::thin_sorted(xs, n);
    ys = detail::thin_sorted(ys, n);
    W1Estimate w;
    w.method = W1Method::Sorted1d;
    w.n_samples = static_cast<long long>(n);
    w.value = detail::sorted_pair_mean(xs, ys);
    if (n_boot > 1) {
        Rng rng(boot_seed);
        std::vector<std::uint16_t> cx(n), cy(n);
        std::vector<double> reps;
        for (int b = 0; b < n_boot; ++b) {
            detail::draw_counts(cx, rng);
            detail::draw_counts(cy, rng);
            reps.push_back(detail::weighted_sorted_pair_mean(xs, cx, nullptr, ys, cy, nullptr));
        }
        w.mc_std_err = detail::stddev(reps);
    }
    return w;
}

/// W1 between an empirical law and a continuous law given by its quantile
/// function, coupling x_(i) with Q((i - 1/2)/n). Only the sample side is resampled.
inline W1Estimate w1_to_quantile(std::vector<double> xs, const std::function<double(double)>& quantile,
                                 std::uint64_t boot_seed = kDefaultBootstrapSeed, int n_boot = kBootstrapResamples) {
    if (xs.empty()) throw InvalidArgument("w1_to_quantile: empty sample");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    W1Estimate w;
    w.method = W1Method::Quantile1d;
    w.n_samples = static_cast<long long>(n);
    w.value = detail::sorted_pair_mean(xs, q);
    if (n_boot > 1) {
        Rng rng(boot_seed);
        std::vector<std::uint16_t> cx(n), cq(n, 1);
        std::vector<double> reps;
        for (int b = 0; b < n_boot; ++b) {
            detail::draw_counts(cx, rng);
            reps.push_back(detail::weighted_sorted_pair_mean(xs, cx, nullptr, q, cq, nullptr));
        }
        w.mc_std_err = detail::stddev(reps);
    }
    return w;
}

inline std::vector<double> column_values(const Mat& m, Eigen::Index col = 0) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, col);
    return v;
}

/// Random unit directions drawn from the normalized Gaussian.
inline Mat random_directions(int d, int n_proj, Rng& rng) {
    NormalDist normal;
    Mat u(d, n_proj);
    for (int p = 0; p < n_proj; ++p) {
        double s = 0.0;
        do {
            for (int i = 0; i < d; ++i) u(i, p) = normal(rng);
            s = u.col(p).norm();
        } while (s == 0.0);
        u.col(p) /= s;
    }
    return u;
}

namespace detail {
inline Mat thin_rows(const Mat& x, Eigen::Index n) {
    const Eigen::Index m = x.rows();
    if (m == n) return x;
    Mat out(n, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = x.row(std::min(m - 1, i * m / n));
    return out;
}
}  // namespace detail

/// Sliced W1: mean over n_proj random directions of the sorted W1 of the projections.
///
/// Every projection is 1-Lipschitz, so each slice and the average are lower
/// bounds on the true W1. Unequal sample sizes are matched by row-stride
/// thinning of the larger sample.
inline W1Estimate w1_sliced(const Mat& x_in, const Mat& y_in, int n_proj, Rng& rng,
                            int n_boot = kBootstrapResamples) {
    if (x_in.cols() != y_in.cols()) throw InvalidArgument("w1_sliced: dimension mismatch");
    if (x_in.rows() == 0 || y_in.rows() == 0) throw InvalidArgument("w1_sliced: empty sample");
    if (n_proj < 16) throw InvalidArgument("w1_sliced: n_proj must be >= 16");
    const Eigen::Index n = std::min(x_in.rows(), y_in.rows());
    const Mat x = detail::thin_rows(x_in, n);
    const Mat y = detail::thin_rows(y_in, n);
    const int d = static_cast<int>(x.cols());
    const Mat dirs = random_directions(d, n_proj, rng);
    const std::uint64_t boot_seed = rng();

    const auto nn = static_cast<std::size_t>(n);
    std::vector<std::vector<std::uint16_t>> cx, cy;
    if (n_boot > 1) {
        Rng brng(boot_seed);
        cx.assign(static_cast<std::size_t>(n_boot), std::vector<std::uint16_t>(nn));
        cy.assign(static_cast<std::size_t>(n_boot), std::vector<std::uint16_t>(nn));
        for (int b = 0; b < n_boot; ++b) {
            detail::draw_counts(cx[b], brng);
            detail::draw_counts(cy[b], brng);
        }
    }
    std::vector<double> boot(static_cast<std::size_t>(std::max(n_boot, 0)), 0.0);
    double total = 0.0;
    std::vector<double> px(nn), py(nn);
    std::vector<std::uint32_t> ox(nn), oy(nn);
    std::vector<double> sx(nn), sy(nn);
    for (int p = 0; p < n_proj; ++p) {
        const Vec u = dirs.col(p);
        for (std::size_t i = 0; i < nn; ++i) {
            px[i] = x.row(static_cast<Eigen::Index>(i)).dot(u);
            py[i] = y.row(static_cast<Eigen::Index>(i)).dot(u);
        }
        std::iota(ox.begin(), ox.end(), 0u);
        std::iota(oy.begin(), oy.end(), 0u);
        std::sort(ox.begin(), ox.end(), [&](std::uint32_t a, std::uint32_t b) { return px[a] < px[b]; });
        std::sort(oy.begin(), oy.end(), [&](std::uint32_t a, std::uint32_t b) { return py[a] < py[b]; });
        for (std::size_t i = 0; i < nn; ++i) {
            sx[i] = px[ox[i]];
            sy[i] = py[oy[i]];
        }
        total += detail::sorted_pair_mean(sx, sy);
        for (int b = 0; b < n_boot && n_boot > 1; ++b) {
            boot[b] += detail::weighted_sorted_pair_mean(sx, cx[b], ox.data(), sy, cy[b], oy.data());
        }
    }
    W1Estimate w;
    w.method = W1Method::Sliced;
    w.n_proj = n_proj;
    w.n_samples = n;
    w.value = total / n_proj;
    if (n_boot > 1) {
        for (auto& v : boot) v /= n_proj;
        w.mc_std_err = detail::stddev(boot);
    }
    return w;
}

// ---------------------------------------------------------------------------

/// Two-sided 95% normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

struct TailEstimate {
    double a = 0.0;
    Vec zeta;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
    long long n = 0;
};

/// Wilson score interval for k successes out of n.
inline std::pair<double, double> wilson_interval(long long k, long long n, double z = kZ95) {
    if (n <= 0) return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double den = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / den;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / den;
    return {std::max(0.0, std::min(p, center - half)), std::min(1.0, std::max(p, center + half))};
}

/// Fraction of rows with <row, zeta> > a and its 95% Wilson interval.
inline TailEstimate tail_prob(const Mat& sample, const Vec& zeta, double a) {
    if (sample.rows() == 0) throw InvalidArgument("tail_prob: empty sample");
    if (zeta.size() != sample.cols()) throw InvalidArgument("tail_prob: zeta dimension mismatch");
    if (std::abs(zeta.norm() - 1.0) > 1e-12) throw InvalidArgument("tail_prob: zeta must be a unit vector");
    long long k = 0;
    for (Eigen::Index i = 0; i < sample.rows(); ++i)
        if (sample.row(i).dot(zeta) > a) ++k;
    TailEstimate t;
    t.a = a;
    t.zeta = zeta;
    t.n = sample.rows();
    t.p_hat = static_cast<double>(k) / static_cast<double>(t.n);
    std::tie(t.ci_lo, t.ci_hi) = wilson_interval(k, t.n);
    return t;
}

/// Tail probabilities at many levels from one sorted projection.
inline std::vector<TailEstimate> tail_probs(const Mat& sample, const Vec& zeta, const std::vector<double>& levels) {
    if (sample.rows() == 0) throw InvalidArgument("tail_prob: empty sample");
    if (std::abs(zeta.norm() - 1.0) > 1e-12) throw InvalidArgument("tail_prob: zeta must be a unit vector");
    std::vector<double> proj(static_cast<std::size_t>(sample.rows()));
    for (Eigen::Index i = 0; i < sample.rows(); ++i) proj[static_cast<std::size_t>(i)] = sample.row(i).dot(zeta);
    std::sort(proj.begin(), proj.end());
    std::vector<TailEstimate> out;
    for (double a : levels) {
        const auto k = static_cast<long long>(proj.end() - std::upper_bound(proj.begin(), proj.end(), a));
        TailEstimate t;
        t.a = a;
        t.zeta = zeta;
        t.n = sample.rows();
        t.p_hat = static_cast<double>(k) / static_cast<double>(t.n);
        std::tie(t.ci_lo, t.ci_hi) = wilson_interval(k, t.n);
        out.push_back(t);
    }
    return out;
}

/// sup |ECDF - F| over the sample points (both one-sided limits).
template <class Cdf>
double ks_distance(std::vector<double> xs, const Cdf& cdf) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_sf(double lambda) {
    if (lambda < 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KsTwoSample {
    double d = 0.0;
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov statistic with its asymptotic p-value.
inline KsTwoSample ks_two_sample(std::vector<double> xs, std::vector<double> ys) {
    if (xs.empty() || ys.empty()) throw InvalidArgument("ks_two_sample: empty sample");
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const double n1 = static_cast<double>(xs.size());
    const double n2 = static_cast<double>(ys.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < xs.size() && j < ys.size()) {
        const double v = std::min(xs[i], ys[j]);
        while (i < xs.size() && xs[i] == v) ++i;
        while (j < ys.size() && ys[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
    }
    KsTwoSample r;
    r.d = d;
    const double ne = std::sqrt(n1 * n2 / (n1 + n2));
    r.p_value = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
    return r;
}

// ---------------------------------------------------------------------------

/// Plug-in moments of |Y| with jackknife standard errors, plus the covariance.
struct MomentSummary {
    double m[5] = {1.0, 0.0, 0.0, 0.0, 0.0};   ///< m[p] = mean |Y|^p
    double se[5] = {0.0, 0.0, 0.0, 0.0, 0.0};  ///< jackknife standard error of m[p]
    Vec mean;
    Mat covariance;
    long long n = 0;
};

/// The jackknife standard error of a sample mean has the closed form s / sqrt(n),
/// which is what is computed here.
inline MomentSummary moment_summary(const Mat& sample) {
    MomentSummary s;
    s.n = sample.rows();
    const Eigen::Index d = sample.cols();
    s.mean = Vec::Zero(d);
    s.covariance = Mat::Zero(d, d);
    if (s.n == 0) return s;
    double sum[5] = {0, 0, 0, 0, 0};
    double sum2[5] = {0, 0, 0, 0, 0};
    for (Eigen::Index i = 0; i < sample.rows(); ++i) {
        const double r = sample.row(i).norm();
        double rp = 1.0;
        for (int p = 1; p <= 4; ++p) {
            rp *= r;
            sum[p] += rp;
            sum2[p] += rp * rp;
        }
    }
    const double n = static_cast<double>(s.n);
    for (int p = 1; p <= 4; ++p) {
        s.m[p] = sum[p] / n;
        if (s.n > 1) {
            const double var = std::max(0.0, (sum2[p] - n * s.m[p] * s.m[p]) / (n - 1.0));
            s.se[p] = std::sqrt(var / n);
        }
    }
    s.mean = sample.colwise().mean().transpose();
    if (s.n > 1) {
        const Mat c = sample.rowwise() - s.mean.transpose();
        s.covariance = (c.transpose() * c) / (n - 1.0);
    }
    return s;
}

}  // namespace sa_steady
