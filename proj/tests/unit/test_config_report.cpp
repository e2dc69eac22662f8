#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sa_steady/config.hpp"
#include "sa_steady/report.hpp"

using namespace sa_steady;
namespace fs = std::filesystem;

namespace {

json minimal(const std::string& study) {
    return {{"study", study},
            {"model", {{"name", "quadratic-sgd"}, {"params", json::object()}}},
            {"noise", {{"kind", "gaussian"}}},
            {"alphas", {0.1, 0.05, 0.025, 0.0125}}};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sa_steady_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, ShippedConfigsParseAndRoundTrip) {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(SA_STEADY_SOURCE_DIR) / "configs")) {
        if (entry.path().extension() != ".json") continue;
        const RunConfig c = load_config(entry.path().string());
        const json echo = to_json(c);
        EXPECT_EQ(to_json(parse_config(echo)).dump(), echo.dump()) << entry.path();
        ++count;
    }
    EXPECT_GE(count, 8);
}

TEST(Config, DefaultsAreResolvedInEcho) {
    const RunConfig c = parse_config(minimal("wasserstein"));
    const json e = to_json(c);
    EXPECT_EQ(e.at("n_steps"), "auto");
    EXPECT_EQ(e.at("burn_in"), "auto");
    EXPECT_EQ(e.at("n_replicas"), 100000);
    EXPECT_EQ(e.at("noise").at("cov"), 1.0);
    EXPECT_EQ(e.at("schema_version"), 1);
    const json p = parse_config({{"study", "simulate"},
                                 {"model", {{"name", "quadratic-sgd"}}},
                                 {"noise", {{"kind", "signed-pareto"}}},
                                 {"alphas", {0.1}}})
                       .noise;
    EXPECT_NEAR(p.at("x_m").get<double>(), std::sqrt(1.0 / 1.2), 1e-15);
    EXPECT_EQ(p.at("beta"), 12.0);
}

TEST(Config, UnknownKeysAreRejected) {
    json j = minimal("wasserstein");
    j["n_replica"] = 10;
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("wasserstein");
    j["noise"]["variance"] = 1.0;
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("wasserstein");
    j["metrics"] = {{"nproj", 32}};
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("wasserstein");
    j["model"]["param"] = json::object();
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("tail");
    j["tail"] = {{"levels", {1.0}}};
    EXPECT_THROW(parse_config(j), InvalidArgument);
}

TEST(Config, ValueValidation) {
    json j = minimal("wasserstein");
    j["alphas"] = {0.1, 1.5};
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("wasserstein");
    j.erase("alphas");
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("wasserstein");
    j["schema_version"] = 2;
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("wasserstein");
    j["seed"] = -1;
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("wasserstein");
    j["metrics"] = {{"n_proj", 8}};
    EXPECT_THROW(parse_config(j), InvalidArgument);
    j = minimal("bogus");
    EXPECT_THROW(parse_config(j), InvalidArgument);
    EXPECT_THROW(parse_config(minimal("tail"), "wasserstein"), InvalidArgument);
    j = minimal("tail");
    j["tail"] = {{"a_grid", {1.0}}, {"a_max", 3.0}};
    EXPECT_THROW(parse_config(j), InvalidArgument);
}

TEST(Config, StudyDefaults) {
    json g = {{"study", "gibbs"}, {"model", {{"name", "poly-gibbs"}, {"params", {{"ell", 2}}}}}, {"noise", {{"kind", "gaussian"}}}};
    EXPECT_EQ(parse_config(g).alphas, (std::vector<double>{0.04, 0.02, 0.01}));
    EXPECT_EQ(parse_config({{"study", "exch-pair"}}).alphas, (std::vector<double>{0.5, 0.25, 0.1, 0.05}));
    EXPECT_THROW(parse_config({{"study", "exch-pair"}, {"model", {{"name", "quadratic-sgd"}}}}), InvalidArgument);
    const RunConfig m = parse_config({{"study", "markov"},
                                      {"model", {{"name", "user-matrix-linear"}, {"params", {{"B", {{-1.0}}}}}}},
                                      {"noise", {{"kind", "markov"}, {"transition", {{0.5, 0.5}, {0.5, 0.5}}}, {"emission", {1.0, -1.0}}}},
                                      {"alphas", {0.1}}});
    EXPECT_EQ(m.a_grid.size(), 8u);
    EXPECT_NO_THROW(build_noise(m.noise, 1));
}

TEST(Csv, FieldQuoting) {
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(Csv, EmptyTableIsHeaderOnly) {
    const Table t{{"alpha", "w1"}, {}};
    EXPECT_EQ(csv_text(t), "alpha,w1\r\n");
}

TEST(Report, RerunsAreByteIdentical) {
    const RunConfig c = parse_config({{"study", "simulate"},
                                      {"model", {{"name", "logcosh-sgd"}, {"params", {{"d", 2}}}}},
                                      {"noise", {{"kind", "gaussian"}}},
                                      {"alphas", {0.1, 0.05}},
                                      {"n_replicas", 500},
                                      {"seed", 3}});
    std::vector<fs::path> dirs = {scratch("rerun_a"), scratch("rerun_b")};
    std::vector<ReportFiles> files;
    for (int i = 0; i < 2; ++i) {
        std::vector<SteadySample> samples;
        const StudyResult r = run_study(c, &samples, i == 0 ? 1 : 2);
        files.push_back(emit_report(r, to_json(c), dirs[i].string(), &samples));
    }
    ASSERT_EQ(files[0].paths.size(), files[1].paths.size());
    ASSERT_EQ(files[0].paths.size(), 8u);
    for (std::size_t k = 0; k < files[0].paths.size(); ++k) {
        EXPECT_EQ(files[0].paths[k].filename(), files[1].paths[k].filename());
        EXPECT_EQ(slurp(files[0].paths[k]), slurp(files[1].paths[k])) << files[0].paths[k];
    }
}

TEST(Report, CertificatesAndEcho) {
    const RunConfig c = parse_config({{"study", "exch-pair"}});
    const fs::path dir = scratch("exch");
    emit_report(run_study(c), to_json(c), dir.string());
    const json certs = json::parse(slurp(dir / "certificates.json"));
    EXPECT_EQ(certs.at("schema_version"), 1);
    EXPECT_EQ(certs.at("csv_schema_version"), 1);
    EXPECT_EQ(certs.at("certificates").size(), 4u);
    const json echo = json::parse(slurp(dir / "config-echo.json"));
    EXPECT_EQ(to_json(parse_config(echo)).dump(), echo.dump());
    const std::string results = slurp(dir / "results.csv");
    EXPECT_EQ(results.substr(0, results.find("\r\n")), "alpha,w1_exact,bound,ratio,pass");
    const std::string plot = slurp(dir / "plot.csv");
    EXPECT_EQ(plot.substr(0, plot.find("\r\n")), "study,curve,x,y");
}

TEST(Report, TailCsvColumns) {
    json j = minimal("tail");
    j["alphas"] = {0.1};
    j["n_replicas"] = 2000;
    j["tail"] = {{"a_max", 2.0}, {"a_points", 5}};
    const RunConfig c = parse_config(j);
    const fs::path dir = scratch("tail");
    emit_report(run_study(c), to_json(c), dir.string());
    const std::string results = slurp(dir / "results.csv");
    EXPECT_EQ(results.substr(0, results.find("\r\n")), "a,p_hat,gauss_tail,env_lo,env_hi,pass,alpha");
    EXPECT_EQ(std::count(results.begin(), results.end(), '\n'), 6);
}

TEST(Report, UnwritableDirectoryThrows) {
    const fs::path file = scratch("blocker");
    std::ofstream(file) << "x";
    EXPECT_THROW(emit_report(study_exch_pair({0.1}), json::object(), (file / "sub").string()), Error);
}
