#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sa_steady/noise.hpp"

using namespace sa_steady;

namespace {

struct Empirical {
    Mat cov;
    double m2 = 0, m3 = 0, m4 = 0;
    Vec mean;
};

Empirical draw_moments(const IidNoise& n, int count, std::uint64_t seed) {
    Rng rng(seed);
    IidSampler s(n);
    Empirical e;
    e.cov = Mat::Zero(n.dim, n.dim);
    e.mean = Vec::Zero(n.dim);
    Vec x(n.dim);
    for (int i = 0; i < count; ++i) {
        s(rng, x.data());
        const double r = x.norm();
        e.m2 += r * r;
        e.m3 += r * r * r;
        e.m4 += r * r * r * r;
        e.cov += x * x.transpose();
        e.mean += x;
    }
    e.cov /= count;
    e.mean /= count;
    e.m2 /= count;
    e.m3 /= count;
    e.m4 /= count;
    return e;
}

}  // namespace

TEST(IidNoise, GaussianClosedFormMoments) {
    const IidNoise n = IidNoise::gaussian(Mat::Identity(1, 1));
    EXPECT_DOUBLE_EQ(n.moments.m2, 1.0);
    EXPECT_NEAR(n.moments.m3, 2.0 * std::sqrt(2.0 / std::numbers::pi), 1e-14);
    EXPECT_DOUBLE_EQ(n.moments.m4, 3.0);
    // isotropic d = 3: E|z|^3 = 2 sqrt(2) Gamma(3) / Gamma(3/2) = 8 sqrt(2/pi)
    const IidNoise n3 = IidNoise::gaussian(Mat::Identity(3, 3));
    EXPECT_NEAR(n3.moments.m3, 4.0 * std::sqrt(2.0) / std::tgamma(1.5), 1e-12);
    EXPECT_DOUBLE_EQ(n3.moments.m4, 15.0);
}

TEST(IidNoise, SignedParetoNormalizedVariance) {
    const IidNoise n = IidNoise::signed_pareto(std::sqrt(1.0 / 1.2), 12.0);
    EXPECT_NEAR(n.cov(0, 0), 1.0, 1e-14);
    EXPECT_NEAR(n.moments.m4, 12.0 / 8.0 * std::pow(1.0 / 1.2, 2.0), 1e-14);
}

TEST(IidNoise, SamplerMomentsMatchDeclared) {
    Mat s(2, 2);
    s << 1.0, 0.3, 0.3, 0.5;
    Mat atoms(3, 1);
    atoms << -1.0, -0.5, 3.0;
    Vec probs(3);
    probs << 0.4, 0.4, 0.2;
    for (const IidNoise& n : {IidNoise::gaussian(s), IidNoise::signed_pareto(0.8, 12.0, 2), IidNoise::rademacher(1.5, 2),
                              IidNoise::discrete(atoms, probs)}) {
        const Empirical e = draw_moments(n, 400000, 17);
        EXPECT_LE((e.cov - n.cov).cwiseAbs().maxCoeff(), 0.02 * std::max(1.0, n.cov.maxCoeff())) << to_string(n.kind);
        EXPECT_LE(e.mean.norm(), 0.01 * std::sqrt(n.moments.m2)) << to_string(n.kind);
        EXPECT_NEAR(e.m2, n.moments.m2, 0.02 * n.moments.m2) << to_string(n.kind);
        EXPECT_NEAR(e.m4, n.moments.m4, 0.05 * n.moments.m4) << to_string(n.kind);
        if (n.moments.m3_exact) {
            EXPECT_NEAR(e.m3, n.moments.m3, 0.03 * n.moments.m3) << to_string(n.kind);
        } else {
            EXPECT_LE(e.m3, n.moments.m3 * 1.01) << to_string(n.kind);
        }
    }
}

TEST(IidNoise, Validation) {
    Mat bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(IidNoise::gaussian(bad), InvalidArgument);
    EXPECT_THROW(IidNoise::signed_pareto(1.0, 3.0), InvalidArgument);
    EXPECT_THROW(IidNoise::signed_pareto(-1.0, 12.0), InvalidArgument);
    EXPECT_THROW(IidNoise::rademacher(-1.0), InvalidArgument);
    Mat atoms(2, 1);
    atoms << 1.0, 1.0;
    Vec probs(2);
    probs << 0.5, 0.5;
    EXPECT_THROW(IidNoise::discrete(atoms, probs), InvalidArgument);
    atoms << 1.0, -1.0;
    probs << 0.5, 0.6;
    EXPECT_THROW(IidNoise::discrete(atoms, probs), InvalidArgument);
}

TEST(Markov, TwoStateClosedForm) {
    const double p = 0.3, q = 0.45;
    Mat t(2, 2), e(2, 1);
    t << 1 - p, p, q, 1 - q;
    e << 1.0, -1.5;
    const MarkovNoise m = make_markov_noise(t, e);
    EXPECT_NEAR(m.stationary(0), q / (p + q), 1e-15);
    const double var = 1.5;
    const double lambda = 1.0 - p - q;
    EXPECT_NEAR(m.long_run_cov(0, 0), var * (1 + lambda) / (1 - lambda), 1e-13);
    EXPECT_LE(m.residual_V, 1e-12);
    EXPECT_LE(m.residual_W, 1e-12);
    // V solves xi = V - P V; for two states V = xi / (p + q) after centering.
    EXPECT_NEAR(m.poisson_V(0, 0), 1.0 / (p + q), 1e-13);
    EXPECT_NEAR(m.poisson_V(1, 0), -1.5 / (p + q), 1e-13);
}

TEST(Markov, StationaryAgreesWithOracle) {
    std::mt19937_64 g(4);
    for (int n = 2; n <= 8; ++n) {
        const Mat p = oracle::random_transition(n, g);
        EXPECT_LE((stationary_dist(p) - oracle::stationary(p)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Markov, DualCovarianceMethodsAgree) {
    std::mt19937_64 g(21);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + trial % 7, d = 1 + trial % 4;
        const Mat p = oracle::random_transition(n, g);
        const Vec pi = oracle::stationary(p);
        Mat e(n, d);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < d; ++k) e(i, k) = nd(g);
        e.rowwise() -= (pi.transpose() * e);
        const MarkovNoise m = make_markov_noise(p, e);
        const SeriesCov s = long_run_cov_series(p, e, m.stationary);
        EXPECT_LE((s.value - m.long_run_cov).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
    }
}

TEST(Markov, IidChainDegenerates) {
    Vec pi(3);
    pi << 0.2, 0.5, 0.3;
    Mat e(3, 2);
    e << 1.0, 0.5, -0.4, 0.2, 0.3, -1.0;
    e.rowwise() -= (pi.transpose() * e);
    const MarkovNoise m = make_markov_noise(iid_as_chain(pi), e);
    EXPECT_LE((m.poisson_V - e).cwiseAbs().maxCoeff(), 1e-12);
    const Mat sigma = e.transpose() * pi.asDiagonal() * e;
    // P W = E_pi W = 0, so W = Phi - E Phi = (Sigma - xi xi^T) / 2
    for (int z = 0; z < 3; ++z) {
        const Vec x = e.row(z).transpose();
        EXPECT_LE((m.poisson_W[z] - 0.5 * (sigma - x * x.transpose())).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_LE((m.long_run_cov - sigma).cwiseAbs().maxCoeff(), 1e-12);
    const auto iid = iid_equivalent(m);
    ASSERT_TRUE(iid.has_value());
    EXPECT_LE((iid->cov - sigma).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Markov, ConstantOuterProductGivesZeroW) {
    // xi(z) xi(z)^T is the same in every state, so Phi is constant
    Vec pi(2);
    pi << 0.5, 0.5;
    Mat e(2, 2);
    e << 0.6, -0.8, -0.6, 0.8;
    const MarkovNoise m = make_markov_noise(iid_as_chain(pi), e);
    for (const auto& w : m.poisson_W) EXPECT_LE(w.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(m.residual_W, 1e-12);
}

TEST(Markov, GenuineChainHasNoIidEquivalent) {
    Mat t(2, 2), e(2, 1);
    t << 0.7, 0.3, 0.45, 0.55;
    e << 1.0, -1.5;
    EXPECT_FALSE(iid_equivalent(make_markov_noise(t, e)).has_value());
}

TEST(Markov, EmpiricalFrequenciesMatchStationary) {
    Mat t(3, 3);
    t << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.3, 0.3, 0.4;
    Mat e = Mat::Zero(3, 1);
    const Vec pi = stationary_dist(t);
    e(0, 0) = pi(1);
    e(1, 0) = -pi(0);
    const MarkovNoise m = make_markov_noise(t, e);
    Rng rng(9);
    int z = m.draw_stationary(rng);
    Vec counts = Vec::Zero(3);
    const int steps = 300000;
    for (int k = 0; k < steps; ++k) {
        z = m.step(z, rng);
        counts(z) += 1.0;
    }
    EXPECT_LE((counts / steps - pi).cwiseAbs().maxCoeff(), 0.005);
}

TEST(Markov, Validation) {
    Mat t(2, 2), e(2, 1);
    t << 0.0, 1.0, 1.0, 0.0;  // periodic
    e << 1.0, -1.0;
    EXPECT_THROW(make_markov_noise(t, e), InvalidArgument);
    t << 1.0, 0.0, 0.0, 1.0;  // reducible
    EXPECT_THROW(make_markov_noise(t, e), InvalidArgument);
    t << 0.5, 0.5, 0.5, 0.6;
    EXPECT_THROW(make_markov_noise(t, e), InvalidArgument);
    t << 0.5, 0.5, 0.2, 0.8;
    e << 1.0, 1.0;  // not centered
    EXPECT_THROW(make_markov_noise(t, e), InvalidArgument);
}
