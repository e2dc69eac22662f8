#include <gtest/gtest.h>

#include <random>

#include "sa_steady/metrics.hpp"
#include "sa_steady/quadrature.hpp"

using namespace sa_steady;

namespace {

std::vector<double> normals(std::size_t n, double mean, double sd, std::uint64_t seed) {
    Rng rng(seed);
    NormalDist nd;
    std::vector<double> v(n);
    for (auto& x : v) x = mean + sd * nd(rng);
    return v;
}

}  // namespace

TEST(W1, SortedCouplingIsExactForSmallSamples) {
    EXPECT_NEAR(w1_sorted_1d({3.0, 0.0, 1.0}, {2.0, 1.0, 6.0}, 1, 0).value, (1.0 + 1.0 + 3.0) / 3.0, 1e-15);
    EXPECT_EQ(w1_sorted_1d({1.0, 2.0}, {1.0, 2.0}, 1, 0).value, 0.0);
}

TEST(W1, ShiftOfSameSampleIsExact) {
    auto x = normals(1000, 0.0, 1.0, 1);
    auto y = x;
    for (auto& v : y) v += 0.37;
    EXPECT_NEAR(w1_sorted_1d(x, y, 1, 0).value, 0.37, 1e-12);
}

TEST(W1, QuantileReferenceRecoversScaleDifference) {
    // W1(N(0, s^2), N(0, 1)) = |s - 1| sqrt(2/pi)
    const auto x = normals(400000, 0.0, 1.2, 7);
    const W1Estimate w = w1_to_quantile(x, normal_quantile, 3, 20);
    const double exact = 0.2 * std::sqrt(2.0 / std::numbers::pi);
    EXPECT_NEAR(w.value, exact, 4.0 * w.mc_std_err + 0.002);
    EXPECT_GT(w.mc_std_err, 0.0);
    EXPECT_EQ(w.method, W1Method::Quantile1d);
}

TEST(W1, BootstrapIsDeterministicInSeed) {
    const auto x = normals(5000, 0.0, 1.0, 2), y = normals(5000, 0.1, 1.0, 3);
    EXPECT_EQ(w1_sorted_1d(x, y, 5).mc_std_err, w1_sorted_1d(x, y, 5).mc_std_err);
    EXPECT_NE(w1_sorted_1d(x, y, 5).mc_std_err, w1_sorted_1d(x, y, 6).mc_std_err);
}

TEST(W1, SlicedIsBelowFullDistanceForShift) {
    // Sliced W1 of a shift v averages |<v, theta>| over directions, at most |v|.
    Rng rng(5);
    NormalDist nd;
    Mat x(20000, 3), y(20000, 3);
    Vec v(3);
    v << 0.5, -0.2, 0.3;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (int k = 0; k < 3; ++k) {
            x(i, k) = nd(rng);
            y(i, k) = x(i, k) + v(k);
        }
    Rng dirs(9);
    const W1Estimate w = w1_sliced(x, y, 256, dirs, 0);
    EXPECT_LE(w.value, v.norm());
    // E|<v, theta>| for theta uniform on S^2 is |v| / 2.
    EXPECT_NEAR(w.value, 0.5 * v.norm(), 0.05 * v.norm());
    EXPECT_EQ(w.method_name(), "sliced(256)");
}

TEST(W1, Validation) {
    EXPECT_THROW(w1_sorted_1d({}, {1.0}), InvalidArgument);
    Rng rng(1);
    EXPECT_THROW(w1_sliced(Mat::Zero(4, 2), Mat::Zero(4, 3), 32, rng), InvalidArgument);
    EXPECT_THROW(w1_sliced(Mat::Zero(4, 2), Mat::Zero(4, 2), 8, rng), InvalidArgument);
}

TEST(Ks, SameLawHasLargePValue) {
    const KsTwoSample k = ks_two_sample(normals(20000, 0, 1, 1), normals(20000, 0, 1, 2));
    EXPECT_LT(k.d, 0.02);
    EXPECT_GT(k.p_value, 0.001);
}

TEST(Ks, ShiftedLawIsDetected) {
    const KsTwoSample k = ks_two_sample(normals(20000, 0, 1, 1), normals(20000, 0.1, 1, 2));
    EXPECT_NEAR(k.d, normal_cdf(0.05) - normal_cdf(-0.05), 0.015);
    EXPECT_LT(k.p_value, 1e-6);
}

TEST(Ks, ExactStatisticOnTinySamples) {
    EXPECT_NEAR(ks_two_sample({1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}).d, 1.0, 1e-15);
    EXPECT_NEAR(ks_two_sample({1.0, 3.0}, {2.0, 4.0}).d, 0.5, 1e-15);
    EXPECT_NEAR(kolmogorov_sf(1.36), 0.049, 0.001);
}

TEST(Wilson, IntervalContainsPointAndCovers) {
    const auto [lo, hi] = wilson_interval(0, 100);
    EXPECT_EQ(lo, 0.0);
    EXPECT_GT(hi, 0.0);
    // coverage of a p = 0.1 binomial with n = 200 over 2000 trials
    std::mt19937_64 g(3);
    std::binomial_distribution<long long> b(200, 0.1);
    int covered = 0;
    for (int t = 0; t < 2000; ++t) {
        const auto [l, h] = wilson_interval(b(g), 200);
        covered += (l <= 0.1 && 0.1 <= h) ? 1 : 0;
    }
    EXPECT_NEAR(covered / 2000.0, 0.95, 0.02);
}

TEST(Tail, ProbabilitiesAgreeWithSingleLevel) {
    Mat s(5000, 2);
    Rng rng(4);
    NormalDist nd;
    for (Eigen::Index i = 0; i < s.rows(); ++i) s.row(i) << nd(rng), nd(rng);
    Vec z(2);
    z << 0.6, 0.8;
    const auto many = tail_probs(s, z, {-1.0, 0.0, 0.5, 2.0});
    for (const auto& t : many) {
        EXPECT_EQ(t.p_hat, tail_prob(s, z, t.a).p_hat);
        EXPECT_LE(t.ci_lo, t.p_hat);
        EXPECT_GE(t.ci_hi, t.p_hat);
    }
    EXPECT_NEAR(many[1].p_hat, 0.5, 0.03);
}

TEST(Moments, SummaryOfConstantSample) {
    Mat s = Mat::Constant(10, 1, 2.0);
    const MomentSummary m = moment_summary(s);
    EXPECT_DOUBLE_EQ(m.m[2], 4.0);
    EXPECT_DOUBLE_EQ(m.m[3], 8.0);
    EXPECT_DOUBLE_EQ(m.m[4], 16.0);
    EXPECT_DOUBLE_EQ(m.se[3], 0.0);
    EXPECT_EQ(m.n, 10);
}
