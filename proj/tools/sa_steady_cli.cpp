// sa_steady: command-line front end.
//
// Exit codes: 0 success with every certificate passing, 1 usage or config
// error, 2 a certificate (or selftest case) failed. Results are written
// before exit 2.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "sa_steady/sa_steady.hpp"
#include "sa_steady/selftest.hpp"

namespace {

using namespace sa_steady;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCertificate = 2;

json parse_json_arg(const std::string& text, const std::string& flag) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        throw InvalidArgument(flag + ": not valid JSON");
    }
}

/// gaussian:VAR | signed-pareto[:X_M:BETA] | rademacher:SCALE | a JSON noise block.
json noise_from_shorthand(const std::string& s) {
    if (!s.empty() && s.front() == '{') return detail::normalize_noise(parse_json_arg(s, "--noise"));
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t k = s.find(':', start);
        parts.push_back(s.substr(start, k - start));
        if (k == std::string::npos) break;
        start = k + 1;
    }
    auto num = [&](std::size_t i) {
        try {
            std::size_t used = 0;
            const double v = std::stod(parts[i], &used);
            if (used != parts[i].size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw InvalidArgument("--noise: '" + parts[i] + "' is not a number");
        }
    };
    json n;
    if (parts[0] == "gaussian" && parts.size() <= 2) {
        n = {{"kind", "gaussian"}, {"cov", parts.size() == 2 ? num(1) : 1.0}};
    } else if (parts[0] == "signed-pareto" && (parts.size() == 1 || parts.size() == 3)) {
        n = {{"kind", "signed-pareto"}};
        if (parts.size() == 3) {
            n["x_m"] = num(1);
            n["beta"] = num(2);
        }
    } else if (parts[0] == "rademacher" && parts.size() <= 2) {
        n = {{"kind", "rademacher"}, {"scale", parts.size() == 2 ? num(1) : 1.0}};
    } else {
        throw InvalidArgument("--noise: expected gaussian:VAR, signed-pareto[:X_M:BETA], rademacher:SCALE or a JSON block");
    }
    return detail::normalize_noise(n);
}

int finish(const StudyResult& r, const RunConfig& c, const std::vector<SteadySample>* samples) {
    const ReportFiles files = emit_report(r, c, samples);
    int failed = 0;
    for (const auto& cert : r.certificates) {
        if (!cert.pass) ++failed;
        std::cout << (cert.pass ? "PASS " : "FAIL ") << cert.name << "  empirical=" << format_real(cert.empirical)
                  << " bound=" << format_real(cert.bound) << "\n";
    }
    std::cout << r.certificates.size() - failed << "/" << r.certificates.size() << " certificates passed; wrote "
              << files.paths.size() << " files to " << c.output_dir << "\n";
    return failed == 0 ? kExitOk : kExitCertificate;
}

int run_config_study(const std::string& path, const std::string& study, const std::string& out_dir, int threads) {
    RunConfig c = load_config(path, study);
    if (!out_dir.empty()) c.output_dir = out_dir;
    std::vector<SteadySample> samples;
    const bool keep = c.study == "simulate";
    const StudyResult r = run_study(c, keep ? &samples : nullptr, threads);
    return finish(r, c, keep ? &samples : nullptr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady-state toolkit for constant-stepsize stochastic approximation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // lyapunov
    std::string lyap_j, lyap_sigma;
    auto* lyap = app.add_subcommand("lyapunov", "Solve J S + S J^T = -Sigma and certify J Hurwitz");
    lyap->add_option("--J", lyap_j, "Jacobian as JSON (number or rows)")->required();
    lyap->add_option("--sigma", lyap_sigma, "Noise covariance as JSON")->required();

    // constants
    std::string c_config, c_model, c_params = "{}", c_noise;
    double c_alpha = 0.1, c_r = 0.0, c_ch = 0.0;
    bool c_sharper = false;
    auto* cons = app.add_subcommand("constants", "Print the constant ledger as JSON");
    cons->add_option("--config", c_config, "Config file supplying model and noise");
    cons->add_option("--model", c_model, "Built-in model name");
    cons->add_option("--params", c_params, "Model parameters as JSON");
    cons->add_option("--noise", c_noise, "gaussian:VAR, signed-pareto[:X_M:BETA], rademacher:SCALE or JSON");
    cons->add_option("--alpha", c_alpha, "Stepsize for alpha-dependent (Markov) constants");
    cons->add_flag("--sharper", c_sharper, "Use m2/sigma for the SGD second moment");
    cons->add_option("--R", c_r, "Gibbs moment constant R");
    cons->add_option("--C_h", c_ch, "Gibbs Stein-regularity constant C_h");

    // config-driven studies
    std::string s_config, s_out;
    int s_threads = 0;
    std::vector<std::pair<CLI::App*, std::string>> studies;
    auto add_study = [&](const std::string& name, const std::string& study, const std::string& help) {
        auto* sc = app.add_subcommand(name, help);
        sc->add_option("--config", s_config, "JSON run config")->required();
        sc->add_option("--output-dir", s_out, "Override output_dir");
        sc->add_option("--threads", s_threads, "Worker threads (default SA_STEADY_THREADS or all cores)");
        studies.emplace_back(sc, study);
    };
    add_study("simulate", "simulate", "Simulate steady-state samples for each alpha");
    add_study("wasserstein", "wasserstein", "Wasserstein rate study");
    add_study("tail", "tail", "Tail-envelope study");
    add_study("gibbs", "gibbs", "Gibbs scaling study");
    add_study("markov", "markov", "Markov-noise study");
    add_study("audit", "audit", "Moment-bound audit");
    add_study("report", "", "Run the study named in the config and write its report");

    auto* self = app.add_subcommand("selftest", "Analytic oracle checks (no simulation)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*lyap) {
            const Mat j = mat_from_json(parse_json_arg(lyap_j, "--J"), "--J");
            const Mat s = mat_from_json(parse_json_arg(lyap_sigma, "--sigma"), "--sigma");
            const HurwitzCertificate h = is_hurwitz(j);
            if (!h) throw NotHurwitz("--J: not Hurwitz: " + h.diagnostic);
            const SpdMat sy = solve_lyapunov(j, SpdMat(s));
            const json out = {{"sigma_y", mat_to_json(sy.mat())},
                              {"residual", lyapunov_residual(j, sy.mat(), s)},
                              {"hurwitz_witness", mat_to_json(h.witness->mat())}};
            std::cout << out.dump(2) << "\n";
            return kExitOk;
        }
        if (*cons) {
            std::string model_name = c_model;
            json params = parse_json_arg(c_params, "--params");
            json noise_block;
            if (!c_config.empty()) {
                const RunConfig rc = load_config(c_config);
                if (rc.study == "exch-pair") throw InvalidArgument("--config: the exch-pair study has no ledger");
                model_name = rc.model_name;
                params = rc.model_params;
                noise_block = rc.noise;
            } else {
                if (c_model.empty()) throw InvalidArgument("--model: required without --config");
                if (c_noise.empty()) throw InvalidArgument("--noise: required without --config");
                noise_block = noise_from_shorthand(c_noise);
            }
            const ModelSpec model = builtin_model(model_name, params);
            const NoiseSpec noise = build_noise(noise_block, model.dim);
            ConstantLedger ledger;
            if (model.kind == ModelKind::GibbsConvex1d) {
                const auto& iid = std::get<IidNoise>(noise);
                const GibbsDensity g = gibbs_density(model, iid.cov(0, 0));
                json out;
                if (c_r > 0.0 && c_ch > 0.0) {
                    out = to_json(build_gibbs_ledger(model, iid.cov(0, 0), c_r, c_ch));
                } else {
                    out = {{"schema_version", 1}, {"regime", "gibbs"}, {"model", to_json(model)}, {"U5", "nan"}};
                }
                out["gibbs_density"] = {{"h", g.order()}, {"kappa", g.kappa()}, {"normalizer", g.normalizer()}};
                std::cout << out.dump(2) << "\n";
                return kExitOk;
            }
            if (const auto* iid = std::get_if<IidNoise>(&noise)) {
                UOptions u;
                u.sharper_second_moment = c_sharper;
                ledger = build_iid_ledger(model, *iid, u);
            } else {
                if (!(c_alpha > 0.0 && c_alpha < 1.0)) throw InvalidArgument("--alpha: must lie in (0, 1)");
                ledger = build_markov_ledger(model, std::get<MarkovNoise>(noise), c_alpha);
            }
            std::cout << to_json(ledger).dump(2) << "\n";
            return kExitOk;
        }
        for (const auto& [sc, study] : studies) {
            if (*sc) return run_config_study(s_config, study, s_out, s_threads);
        }
        if (*self) {
            int failed = 0;
            for (const auto& c : run_selftest()) {
                std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << (c.pass ? "" : ": " + c.detail) << "\n";
                failed += c.pass ? 0 : 1;
            }
            return failed == 0 ? kExitOk : kExitCertificate;
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
