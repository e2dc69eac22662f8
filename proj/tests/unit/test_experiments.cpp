#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sa_steady/experiments.hpp"

using namespace sa_steady;

namespace {

SimOptions small(long long n, std::uint64_t seed = 1) {
    SimOptions o;
    o.n_replicas = n;
    o.seed = seed;
    return o;
}

int column(const Table& t, const std::string& name) {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        if (t.columns[i] == name) return static_cast<int>(i);
    ADD_FAILURE() << "no column " << name;
    return 0;
}

}  // namespace

TEST(Certificate, MarginAndSlack) {
    const auto c = certify("x", 1.2, 0.1, 1.0, json::object());
    EXPECT_TRUE(c.pass);
    EXPECT_NEAR(c.margin, 1.0 - (1.2 - 0.3), 1e-15);
    EXPECT_FALSE(certify("x", 1.2, 0.1, 1.0, json::object(), 0.0).pass);
    EXPECT_TRUE(certify("x", 1.0, 0.0, 1.0, json::object(), 0.0).pass);
    EXPECT_FALSE(certify("x", kNaN, 0.0, 1.0, json::object()).pass);
    EXPECT_FALSE(certify("x", 0.5, 0.0, kNaN, json::object()).pass);
    EXPECT_TRUE(certify("x", 1e300, 0.0, INFINITY, json::object()).pass);
    const json j = to_json(c);
    EXPECT_EQ(j.at("name"), "x");
    EXPECT_TRUE(j.at("pass").get<bool>());
}

TEST(RateFit, RecoversPowerLaw) {
    const std::vector<double> a = {0.1, 0.05, 0.025, 0.0125};
    std::vector<double> v;
    for (double x : a) v.push_back(3.0 * std::pow(x, 0.75));
    const RateFit f = fit_rate(a, v);
    EXPECT_NEAR(f.slope, 0.75, 1e-12);
    EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_THROW(fit_rate({0.1}, {1.0}), InvalidArgument);
    EXPECT_THROW(fit_rate({0.1, 0.05}, {1.0, 0.0}), InvalidArgument);
}

TEST(WassersteinStudy, QuadraticGaussianSlopeIsOne) {
    // The stationary law is exactly N(0, 1/(2 - alpha)), so W1 is linear in alpha.
    RateOptions o;
    o.sim = small(200000, 3);
    o.reference = "quantile";
    const StudyResult r = study_wasserstein_rate(builtin_model("quadratic-sgd"), IidNoise::gaussian(Mat::Identity(1, 1)),
                                                 {0.4, 0.2, 0.1, 0.05}, o);
    ASSERT_TRUE(r.fit.has_value());
    EXPECT_NEAR(r.fit->slope, 1.0, 0.1);
    EXPECT_TRUE(r.all_pass());
    const int w = column(r.table, "w1");
    const int a = column(r.table, "alpha");
    for (const auto& row : r.table.rows) {
        const double exact = exch_pair_exact_w1(std::stod(row[a]));
        EXPECT_NEAR(std::stod(row[w]), exact, 0.25 * exact + 0.002);
    }
}

TEST(WassersteinStudy, GridRequirements) {
    const ModelSpec m = builtin_model("quadratic-sgd");
    const IidNoise n = IidNoise::gaussian(Mat::Identity(1, 1));
    RateOptions o;
    o.sim = small(10);
    EXPECT_THROW(study_wasserstein_rate(m, n, {0.1, 0.05, 0.025}, o), InvalidArgument);
    EXPECT_THROW(study_wasserstein_rate(m, n, {0.1, 0.05, 0.02, 0.01}, o), InvalidArgument);
    EXPECT_THROW(study_wasserstein_rate(m, n, {0.1, 0.1, 0.05, 0.025}, o), InvalidArgument);
}

TEST(TailStudy, ColumnsAndEnvelopeRows) {
    TailOptions o;
    o.sim = small(20000, 4);
    o.a_grid = default_a_grid(4.0, 10);
    const StudyResult r = study_tail_envelope(builtin_model("quadratic-sgd"), IidNoise::gaussian(Mat::Identity(1, 1)), {0.1}, o);
    EXPECT_EQ(r.table.columns, (std::vector<std::string>{"a", "p_hat", "gauss_tail", "env_lo", "env_hi", "pass", "alpha"}));
    EXPECT_EQ(r.table.rows.size(), 10u);
    for (const auto& row : r.table.rows) {
        EXPECT_LE(std::stod(row[3]), std::stod(row[2]));
        EXPECT_GE(std::stod(row[4]), std::stod(row[2]));
    }
    EXPECT_TRUE(r.all_pass());
}

TEST(TailStudy, ZetaRequiredInHigherDimension) {
    TailOptions o;
    o.sim = small(10);
    EXPECT_THROW(study_tail_envelope(builtin_model("rotation-linear"), IidNoise::gaussian(Mat::Identity(2, 2)), {0.1}, o),
                 InvalidArgument);
}

TEST(GibbsOracle, DiscreteChainBiasDecreasesWithAlpha) {
    for (int h : {4, 6, 8}) {
        double prev = INFINITY;
        for (double a : {0.04, 0.02, 0.01}) {
            const double w = oracle::GibbsChainOracle{h, a}.w1_to_gibbs();
            EXPECT_LT(w, prev) << "h = " << h << " alpha = " << a;
            EXPECT_GT(w, 0.0);
            prev = w;
        }
    }
}

TEST(GibbsOracle, SimulatedSecondMomentMatchesTransferOperator) {
    const double alpha = 0.04;
    const oracle::GibbsChainOracle o{4, alpha};
    std::vector<double> y, p;
    o.w1_to_gibbs(&y, &p);
    // law after one more step: sum_i p_i N(m_i, tau)
    double m2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double m = y[i] - o.tau() * std::pow(y[i], 3);
        m2 += p[i] * (m * m + o.tau());
    }
    SimPlan plan;
    plan.model = builtin_model("poly-gibbs", {{"ell", 2}});
    plan.noise = IidNoise::gaussian(Mat::Identity(1, 1));
    plan.alpha = alpha;
    plan.n_replicas = 40000;
    plan.n_steps = default_gibbs_steps(2, alpha);
    plan.scaling_exponent = 0.25;
    plan.seed = 12;
    const SteadySample s = run(plan, 0);
    const double emp = s.rows.squaredNorm() / static_cast<double>(s.rows.rows());
    const double sd = std::sqrt((s.rows.array().pow(4).mean() - emp * emp) / static_cast<double>(s.rows.rows()));
    EXPECT_NEAR(emp, m2, 4.0 * sd);
}

TEST(GibbsStudy, SmallRunProducesBothScalings) {
    GibbsOptions o;
    o.sim = small(4000, 5);
    const StudyResult r = study_gibbs_scaling(builtin_model("poly-gibbs", {{"ell", 2}}), IidNoise::gaussian(Mat::Identity(1, 1)),
                                              {0.04, 0.02}, o);
    ASSERT_EQ(r.table.rows.size(), 4u);
    EXPECT_EQ(r.table.rows[0][1], "correct");
    EXPECT_EQ(r.table.rows[1][1], "baseline");
    EXPECT_EQ(r.certificates.size(), 2u);
    EXPECT_NEAR(r.summary.at("kappa").get<double>(), 0.5, 1e-15);
    const int ks = column(r.table, "ks_prev");
    EXPECT_LT(std::stod(r.table.rows[2][ks]), std::stod(r.table.rows[3][ks]));
}

TEST(GibbsStudy, RejectsUnsupportedInputs) {
    GibbsOptions o;
    o.sim = small(10);
    const IidNoise g = IidNoise::gaussian(Mat::Identity(1, 1));
    EXPECT_THROW(study_gibbs_scaling(builtin_model("quadratic-sgd"), g, {0.04, 0.02}, o), InvalidArgument);
    EXPECT_THROW(study_gibbs_scaling(builtin_model("poly-gibbs", {{"ell", 5}}), g, {0.04, 0.02}, o), InvalidArgument);
    EXPECT_THROW(study_gibbs_scaling(builtin_model("poly-gibbs", {{"ell", 2}}), IidNoise::rademacher(1.0), {0.04, 0.02}, o),
                 InvalidArgument);
}

TEST(GibbsStudy, DivergenceBecomesFailedCertificate) {
    GibbsOptions o;
    o.sim = small(2000, 6);
    o.sim.n_steps = 200;
    const StudyResult r = study_gibbs_scaling(builtin_model("poly-gibbs", {{"ell", 4}}), IidNoise::signed_pareto(3.0, 4.5),
                                              {0.9, 0.5}, o);
    ASSERT_FALSE(r.certificates.empty());
    EXPECT_FALSE(r.all_pass());
    bool saw_nan = false;
    for (const auto& c : r.certificates) saw_nan = saw_nan || std::isnan(c.empirical);
    EXPECT_TRUE(saw_nan);
}

TEST(MarkovStudy, IidChainMatchesDiscreteNoise) {
    Vec pi(2);
    pi << 0.5, 0.5;
    Mat e(2, 1);
    e << 0.8, -0.8;
    MarkovOptions o;
    o.sim = small(20000, 7);
    const StudyResult r =
        study_markov(builtin_model("user-matrix-linear", {{"B", {{-1.0}}}}), make_markov_noise(iid_as_chain(pi), e), {0.1}, o);
    EXPECT_TRUE(r.summary.at("iid_as_chain").get<bool>());
    EXPECT_TRUE(r.all_pass());
    bool found = false;
    for (const auto& c : r.certificates) found = found || c.name.rfind("iid equivalence", 0) == 0;
    EXPECT_TRUE(found);
}

TEST(MarkovStudy, ZeroNoiseUsesZeroBound) {
    Mat t(2, 2), e = Mat::Zero(2, 1);
    t << 0.6, 0.4, 0.3, 0.7;
    MarkovOptions o;
    o.sim = small(100, 8);
    const StudyResult r = study_markov(builtin_model("user-matrix-linear", {{"B", {{-1.0}}}}), make_markov_noise(t, e), {0.1}, o);
    EXPECT_TRUE(r.summary.at("zero_noise").get<bool>());
    EXPECT_TRUE(r.all_pass());
    for (const auto& c : r.certificates) EXPECT_EQ(c.bound, 0.0);
}

TEST(AuditStudy, SgdHasSecondMomentCertificate) {
    const StudyResult r = study_moment_audit(builtin_model("logcosh-sgd", {{"d", 2}}), IidNoise::gaussian(Mat::Identity(2, 2)),
                                             {0.1}, small(5000, 9));
    ASSERT_EQ(r.certificates.size(), 2u);
    EXPECT_NE(r.certificates[1].name.find("m2/sigma"), std::string::npos);
    EXPECT_TRUE(r.all_pass());
}

TEST(ExchPairStudy, AllCertificatesPassWithFiniteRatio) {
    const StudyResult r = study_exch_pair({0.5, 0.25, 0.1, 0.05});
    EXPECT_TRUE(r.all_pass());
    const int ratio = column(r.table, "ratio");
    for (const auto& row : r.table.rows) {
        const double v = std::stod(row[ratio]);
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GT(v, 1.0);
    }
}

TEST(Grid, DefaultLevels) {
    const auto g = default_a_grid();
    ASSERT_EQ(g.size(), 50u);
    EXPECT_NEAR(g.front(), 0.08, 1e-15);
    EXPECT_NEAR(g.back(), 4.0, 1e-15);
}
