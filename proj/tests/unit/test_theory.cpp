#include <gtest/gtest.h>

#include "sa_steady/quadrature.hpp"
#include "sa_steady/theory.hpp"

using namespace sa_steady;

namespace {

ConstantLedger quadratic_ledger(bool sharper = false) {
    UOptions u;
    u.sharper_second_moment = sharper;
    return build_iid_ledger(builtin_model("quadratic-sgd"), IidNoise::gaussian(Mat::Identity(1, 1)), u);
}

MarkovNoise two_state() {
    Mat t(2, 2), e(2, 1);
    t << 0.7, 0.3, 0.45, 0.55;
    e << 1.0, -1.5;
    return make_markov_noise(t, e);
}

}  // namespace

TEST(NormalMoments, ClosedFormAgainstQuadrature) {
    EXPECT_NO_THROW(verify_normal_moments());
    EXPECT_NEAR(normal_abs_moment(1), std::sqrt(2.0 / std::numbers::pi), 1e-15);
    EXPECT_NEAR(normal_abs_moment(3), 2.0 * std::sqrt(2.0 / std::numbers::pi), 1e-14);
    EXPECT_NEAR(normal_abs_moment(4), 3.0, 1e-14);
}

TEST(Stein, QuadraticSgdFrozenValues) {
    const ConstantLedger l = quadratic_ledger();
    EXPECT_NEAR(l.sigma_y(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(l.stein.lambda, 2.0, 1e-13);
    EXPECT_NEAR(l.stein.K_Y, 1.0, 1e-13);
    EXPECT_NEAR(l.stein.g1, 1.0, 1e-13);
    EXPECT_NEAR(l.stein.g2, 1.1283791670955128, 1e-12);
    EXPECT_NEAR(l.stein.C2, 8.68814391157658, 1e-11);
    EXPECT_NEAR(l.stein.g3, 10.944902245767604, 1e-11);
    EXPECT_NEAR(l.moments.value_m3, 43.14922945926877, 1e-11);
    EXPECT_NEAR(l.moments.value_m2, 1.0, 1e-15);
    EXPECT_NEAR(l.U, 880366.5967980648, 1e-9 * 880366.6);
    EXPECT_NEAR(l.U_tail, 6245.983408779813, 1e-9 * 6246.0);
    EXPECT_EQ(l.constant_name, "U1");
}

TEST(Stein, SharperSecondMomentLowersU) {
    const ConstantLedger plain = quadratic_ledger(false), sharp = quadratic_ledger(true);
    EXPECT_NEAR(sharp.U, 879316.7212247301, 1e-9 * 879316.7);
    EXPECT_LT(sharp.U, plain.U);
}

TEST(Stein, ConstantsScaleInvariantUnderNoiseScaling) {
    // Scaling Sigma by c scales Sigma_Y by c: K_Y and lambda are unchanged.
    const ModelSpec m = builtin_model("rotation-linear", {{"omega", 2.0}, {"decay", 0.5}});
    Mat s(2, 2);
    s << 1.0, 0.2, 0.2, 0.7;
    const SpdMat sy1 = solve_lyapunov(m.jacobian_at_root, SpdMat(s));
    const SpdMat sy4 = solve_lyapunov(m.jacobian_at_root, SpdMat(4.0 * s));
    const SteinConstants a = stein_constants(sy1, SpdMat(s)), b = stein_constants(sy4, SpdMat(4.0 * s));
    EXPECT_NEAR(a.K_Y, b.K_Y, 1e-10);
    EXPECT_NEAR(a.lambda, b.lambda, 1e-10);
    EXPECT_NEAR(a.g1, b.g1, 1e-10);
    EXPECT_NEAR(b.g2, a.g2 / 2.0, 1e-10);
}

TEST(Stein, ConstantsArePositiveAcrossModels) {
    const std::vector<std::pair<ModelSpec, IidNoise>> cases = {
        {builtin_model("logcosh-sgd", {{"d", 2}}), IidNoise::gaussian(Mat::Identity(2, 2))},
        {builtin_model("rotation-linear"), IidNoise::signed_pareto(0.8, 12.0, 2)},
        {builtin_model("soft-contraction", {{"d", 3}}), IidNoise::rademacher(1.0, 3)}};
    for (const auto& [m, n] : cases) {
        const ConstantLedger l = build_iid_ledger(m, n);
        EXPECT_GT(l.stein.g1, 0.0);
        EXPECT_GT(l.stein.g2, 0.0);
        EXPECT_GT(l.stein.g3, l.stein.C2);
        EXPECT_TRUE(std::isfinite(l.U) && l.U > 0.0) << m.name;
        EXPECT_GT(l.U_tail, 0.0);
    }
}

TEST(Moments, BranchMatchesModelKind) {
    const NoiseMoments nm = IidNoise::gaussian(Mat::Identity(2, 2)).moments;
    EXPECT_EQ(moment_constant(builtin_model("logcosh-sgd", {{"d", 2}}), nm).which, MomentBranch::A_SGD);
    EXPECT_EQ(moment_constant(builtin_model("rotation-linear"), nm).which, MomentBranch::A_LSA);
    EXPECT_EQ(moment_constant(builtin_model("soft-contraction"), nm).which, MomentBranch::A_CSA);
    EXPECT_THROW(moment_constant(builtin_model("poly-gibbs"), IidNoise::gaussian(Mat::Identity(1, 1)).moments),
                 InvalidArgument);
}

TEST(Markov, LedgerIsEvaluatedAtAlphaAndAtOne) {
    const MarkovNoise chain = two_state();
    const ModelSpec m = builtin_model("user-matrix-linear", {{"B", {{-1.0}}}});
    const double at_one = build_markov_ledger(m, chain, 1.0).U;
    for (double a : {0.001, 0.01, 0.1, 0.5}) {
        const ConstantLedger l = build_markov_ledger(m, chain, a);
        EXPECT_NEAR(l.sigma_y(0, 0), 1.25, 1e-12);
        EXPECT_TRUE(std::isfinite(l.U));
        EXPECT_GT(l.U, 0.0);
        EXPECT_EQ(l.alpha, a);
        EXPECT_EQ(l.U_uniform, at_one);
        EXPECT_NEAR(l.markov_terms.at("cubic").get<double>() + l.markov_terms.at("curvature").get<double>() +
                        l.markov_terms.at("poisson_V").get<double>() + l.markov_terms.at("poisson_W").get<double>() +
                        l.markov_terms.at("cross").get<double>(),
                    l.U, 1e-9 * l.U);
    }
}

TEST(Ledger, JsonRoundTrip) {
    const ConstantLedger l = quadratic_ledger();
    const ConstantLedger r = ledger_from_json(json::parse(to_json(l).dump()));
    EXPECT_DOUBLE_EQ(r.U, l.U);
    EXPECT_DOUBLE_EQ(r.stein.g3, l.stein.g3);
    EXPECT_EQ(to_json(r).dump(), to_json(l).dump());
    const ConstantLedger mk = build_markov_ledger(builtin_model("user-matrix-linear", {{"B", {{-1.0}}}}), two_state(), 0.05);
    EXPECT_EQ(to_json(ledger_from_json(to_json(mk))).dump(), to_json(mk).dump());
}

TEST(Tail, EnvelopeWidthWithoutTransportTerm) {
    const SpdMat sy = SpdMat::scalar(0.5);
    const Vec z = Vec::Ones(1);
    for (double a : {0.5, 1.0, 2.0}) {
        const TailEnvelope e = tail_envelope(a, z, sy, 0.0, 0.3);
        const double x = a / std::sqrt(0.5);
        EXPECT_NEAR(e.center, 0.5 * std::erfc(x / std::sqrt(2.0)), 1e-15);
        EXPECT_NEAR(e.width, 0.7 * x * std::exp(-0.5 * 0.09 * x * x) / std::sqrt(2.0 * std::numbers::pi), 1e-15);
    }
    EXPECT_EQ(tail_envelope(1.0, z, sy, 0.0, optimized_rho(0.0)).width, 0.0);
}

TEST(Tail, EnvelopeMonotoneInTransportDistance) {
    const SpdMat sy = SpdMat::scalar(0.5);
    const Vec z = Vec::Ones(1);
    double prev = -1.0;
    for (double dw : {0.0, 1e-4, 1e-3, 1e-2, 1e-1}) {
        const double w = tail_envelope(1.0, z, sy, dw, 0.5).width;
        EXPECT_GT(w, prev);
        prev = w;
    }
}

TEST(Tail, OptimizedBoundMatchesEnvelopeAtOptimalRho) {
    // With dW = delta sqrt(alpha) log(1/alpha) and rho = 1 - sqrt(dW), the envelope
    // width is dominated by the optimized closed form.
    const SpdMat sy = SpdMat::scalar(0.5);
    const Vec z = Vec::Ones(1);
    const double alpha = 0.01, delta = 0.5;
    const double dw = delta * std::sqrt(alpha) * std::log(1.0 / alpha);
    for (double a : {0.25, 1.0, 3.0}) {
        const double width = tail_envelope(a, z, sy, dw, optimized_rho(dw)).width;
        EXPECT_LE(width, optimized_tail_bound(a, z, sy, delta, alpha) * (1 + 1e-12));
    }
    EXPECT_THROW(optimized_tail_bound(1.0, z, sy, 100.0, 0.5), InvalidArgument);
    EXPECT_THROW(tail_envelope(0.0, z, sy, 0.1, 0.5), InvalidArgument);
    Vec bad(1);
    bad << 2.0;
    EXPECT_THROW(tail_envelope(1.0, bad, sy, 0.1, 0.5), InvalidArgument);
}

TEST(ExchPair, FrozenValues) {
    const double m3 = 2.0 * std::sqrt(2.0 / std::numbers::pi);
    EXPECT_NEAR(exch_pair_bound_1d(0.25, m3, 3.0), 7.797379738488823, 1e-13);
    EXPECT_NEAR(exch_pair_exact_w1(0.25), 0.03895445154435116, 1e-15);
    for (double a : {0.5, 0.25, 0.1, 0.05, 0.01}) EXPECT_LT(exch_pair_exact_w1(a), exch_pair_bound_1d(a, m3, 3.0));
}

TEST(ExchPair, ExactW1IsLinearForSmallAlpha) {
    // d/dalpha (2 - alpha)^{-1/2} at 0 is 2^{-5/2}.
    const double slope = std::sqrt(2.0 / std::numbers::pi) * std::pow(2.0, -2.5);
    EXPECT_NEAR(exch_pair_exact_w1(1e-6) / 1e-6, slope, 1e-6);
}

TEST(Gibbs, DensityNormalizationAndMoments) {
    // f = x^4 / 4, unit variance: kappa = 1/2, Z = 2 Gamma(5/4) 2^{1/4}.
    const GibbsDensity g = gibbs_density(builtin_model("poly-gibbs", {{"ell", 2}}), 1.0);
    EXPECT_NEAR(g.kappa(), 0.5, 1e-15);
    EXPECT_NEAR(g.normalizer(), 2.0 * std::tgamma(1.25) * std::pow(2.0, 0.25), 1e-10);
    const double mass = adaptive_simpson_split([&](double y) { return g.pdf(y); }, -g.support_radius(), g.support_radius(), 64, 1e-13);
    EXPECT_NEAR(mass, 1.0, 1e-10);
    // excess kurtosis of exp(-k y^4): Gamma(5/4) Gamma(1/4) / Gamma(3/4)^2 - 3
    const double want = std::tgamma(1.25) * std::tgamma(0.25) / std::pow(std::tgamma(0.75), 2) - 3.0;
    EXPECT_NEAR(g.excess_kurtosis(), want, 1e-8);
    for (double u : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999}) EXPECT_NEAR(g.cdf(g.quantile(u)), u, 1e-10);
    EXPECT_NEAR(g.quantile(0.5), 0.0, 1e-10);
}

TEST(Gibbs, KappaScalesWithNoiseAndOrder) {
    EXPECT_NEAR(gibbs_density(builtin_model("poly-gibbs", {{"ell", 3}}), 2.0).kappa(), 2.0 / (6.0 * 2.0), 1e-15);
    EXPECT_NEAR(gibbs_density(builtin_model("poly-gibbs", {{"ell", 4}}), 1.0).kappa(), 0.25, 1e-15);
    EXPECT_THROW(GibbsDensity(3, 1.0, 1.0), InvalidArgument);
}

TEST(Gibbs, LedgerNeedsConstants) {
    // a pure polynomial has f^(h+1) = 0, so the constant vanishes
    const ModelSpec poly = builtin_model("poly-gibbs", {{"ell", 2}});
    EXPECT_EQ(build_gibbs_ledger(poly, 1.0, 2.0, 3.0).U5, 0.0);
    const ModelSpec trig = builtin_model("trig-gibbs", {{"ell", 2}});
    const ConstantLedger l = build_gibbs_ledger(trig, 1.0, 2.0, 3.0);
    EXPECT_TRUE(std::isfinite(l.U5));
    EXPECT_NEAR(l.U5, 2.0 * trig.second_deriv_M * 2.0 * 3.0 / (4.0 * 6.0), 1e-12 * l.U5);
    EXPECT_GT(l.U5, 0.0);
    EXPECT_THROW(build_gibbs_ledger(poly, 1.0, 0.0, 3.0), InvalidArgument);
    EXPECT_THROW(build_iid_ledger(poly, IidNoise::gaussian(Mat::Identity(1, 1))), Error);
}
