#include <gtest/gtest.h>

#include <random>

#include "sa_steady/models.hpp"

using namespace sa_steady;

namespace {

std::vector<ModelSpec> all_models() {
    return {builtin_model("quadratic-sgd", {{"d", 3}, {"curvature", {1.0, 2.0, 0.5}}, {"x_star", {1.0, -1.0, 0.0}}}),
            builtin_model("logcosh-sgd", {{"d", 2}, {"beta", 0.7}}),
            builtin_model("rotation-linear", {{"omega", 2.0}, {"decay", 0.5}, {"x_star", {0.3, 0.1}}}),
            builtin_model("user-matrix-linear", {{"B", {{-1.0, 0.4}, {-0.3, -2.0}}}, {"b", {1.0, 2.0}}}),
            builtin_model("soft-contraction", {{"d", 3}, {"gamma", 0.8}}),
            builtin_model("poly-gibbs", {{"ell", 3}}),
            builtin_model("trig-gibbs", {{"ell", 2}})};
}

}  // namespace

TEST(Models, DriftVanishesAtFixedPoint) {
    for (const auto& m : all_models()) {
        EXPECT_LE(eval_drift(m, m.fixed_point, false).value.norm(), 1e-12) << m.name;
    }
}

TEST(Models, AnalyticJacobianMatchesFiniteDifferences) {
    std::mt19937_64 g(8);
    std::normal_distribution<double> n;
    for (const auto& m : all_models()) {
        for (int trial = 0; trial < 20; ++trial) {
            Vec x = m.fixed_point;
            for (int i = 0; i < m.dim; ++i) x(i) += 1.5 * n(g);
            const Mat analytic = *eval_drift(m, x).jacobian;
            const Mat fd = finite_difference_jacobian(m, x);
            EXPECT_LE((analytic - fd).norm(), 1e-6 * std::max(1.0, analytic.norm())) << m.name << " at " << x.transpose();
        }
    }
}

TEST(Models, JacobianAtRootIsStored) {
    for (const auto& m : all_models()) {
        if (m.kind == ModelKind::GibbsConvex1d) continue;
        EXPECT_LE((m.jacobian_at_root - *eval_drift(m, m.fixed_point).jacobian).norm(), 1e-14) << m.name;
    }
}

TEST(Models, UserMatrixFixedPoint) {
    const ModelSpec m = builtin_model("user-matrix-linear", {{"B", {{-2.0, 0.0}, {0.0, -4.0}}}, {"b", {2.0, 2.0}}});
    EXPECT_NEAR(m.fixed_point(0), 1.0, 1e-15);
    EXPECT_NEAR(m.fixed_point(1), 0.5, 1e-15);
}

TEST(Models, GibbsTopDerivative) {
    // f = x^{2 ell} / (2 ell): f^{(2 ell)} = (2 ell - 1)!
    EXPECT_DOUBLE_EQ(*builtin_model("poly-gibbs", {{"ell", 2}}).gibbs_top_deriv, 6.0);
    EXPECT_DOUBLE_EQ(*builtin_model("poly-gibbs", {{"ell", 4}}).gibbs_top_deriv, 5040.0);
    EXPECT_EQ(*builtin_model("trig-gibbs", {{"ell", 3}}).gibbs_order_h, 6);
    EXPECT_GT(*builtin_model("trig-gibbs", {{"ell", 2}}).gibbs_top_deriv, 6.0);
}

TEST(Models, AssumptionsHoldForBuiltins) {
    for (const auto& m : all_models()) {
        const AssumptionReport r = check_model_assumptions(m);
        for (const auto& c : r.checks) EXPECT_TRUE(c.pass) << m.name << ": " << c.name << " " << c.detail;
    }
}

TEST(Models, DeclaredConstantsBoundSampledRatios) {
    const ModelSpec m = builtin_model("logcosh-sgd", {{"d", 2}, {"beta", 2.0}});
    const AssumptionReport r = check_model_assumptions(m, 99);
    const auto* lip = r.find("lipschitz");
    ASSERT_NE(lip, nullptr);
    EXPECT_LE(lip->worst, m.lipschitz_L * (1 + 1e-12));
    const auto* sm = r.find("strong_monotonicity");
    ASSERT_NE(sm, nullptr);
    EXPECT_GE(sm->worst, *m.strong_convexity_sigma * (1 - 1e-12));
}

TEST(Models, RejectsBadParameters) {
    EXPECT_THROW(builtin_model("no-such-model"), InvalidArgument);
    EXPECT_THROW(builtin_model("quadratic-sgd", {{"curvature", {-1.0}}}), InvalidArgument);
    EXPECT_THROW(builtin_model("quadratic-sgd", {{"bogus", 1}}), InvalidArgument);
    EXPECT_THROW(builtin_model("soft-contraction", {{"gamma", 1.0}}), InvalidArgument);
    EXPECT_THROW(builtin_model("user-matrix-linear", {{"B", {{0.0, 0.0}, {0.0, 0.0}}}}), InvalidArgument);
    EXPECT_THROW(builtin_model("rotation-linear", {{"decay", -1.0}}), InvalidArgument);
    EXPECT_THROW(builtin_model("poly-gibbs", {{"ell", 1}}), InvalidArgument);
    const ModelSpec m = builtin_model("quadratic-sgd", {{"d", 2}});
    EXPECT_THROW(eval_drift(m, Vec::Zero(3)), InvalidArgument);
}

TEST(Models, UnstableUserMatrixFailsHurwitzCheck) {
    const ModelSpec m = builtin_model("user-matrix-linear", {{"B", {{0.5, 0.0}, {0.0, -1.0}}}});
    const AssumptionReport r = check_model_assumptions(m);
    const auto* h = r.find("hurwitz");
    ASSERT_NE(h, nullptr);
    EXPECT_FALSE(h->pass);
}
