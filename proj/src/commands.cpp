#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "gspin/cli.hpp"
#include "gspin/errors.hpp"
#include "gspin/gibbs.hpp"
#include "gspin/ovsbound.hpp"
#include "gspin/rng.hpp"

namespace gspin {

using nlohmann::json;

namespace {

template <class Fn>
std::string render(Fn&& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

std::string graph_hash(const GeometricGraph& g) {
    return git_blob_sha1(render([&](std::ostream& os) { write_configuration_csv(os, g.config()); }) +
                         "rho=" + render([&](std::ostream& os) { os << std::setprecision(17) << g.rho(); }));
}

json field_json(const RunConfig& c) {
    return {{"drift", c.get("field.drift", "cubic")}, {"coupling", c.get("field.coupling", "zero")},
            {"J", c.get("field.J", 0.0)}, {"noise", c.get("field.noise", "additive")}, {"M", c.get("field.M", 0.0)}};
}

json plan_json(const SimPlan& p) {
    return {{"dt", p.dt},           {"T", p.T}, {"scheme", to_string(p.scheme)}, {"replicas", p.replicas},
            {"master_seed", p.master_seed}, {"p", p.p}, {"record_stride", p.record_stride}};
}

json assumptions_json(const AssumptionReport& r) {
    json failed = json::array();
    for (const auto& c : r.checks)
        if (!c.passed) failed.push_back({{"name", c.name}, {"worst_margin", c.worst_margin}, {"at", c.counterexample}});
    return {{"passed", r.passed()}, {"failed", failed}};
}

json volumes_json(const VolumeSequence& v) {
    json sizes = json::array();
    for (const auto& vol : v.volumes()) sizes.push_back(vol.size());
    return {{"count", v.count()}, {"sizes", sizes}, {"strictly_nested", v.strictly_nested()}};
}

std::vector<SiteId> all_sites(std::size_t n) {
    std::vector<SiteId> s(n);
    for (SiteId x = 0; x < n; ++x) s[x] = x;
    return s;
}

}  // namespace

int cmd_graph(const RunConfig& config, const std::filesystem::path& out, unsigned, std::ostream& log) {
    const auto g = config.graph();
    OutputSet files(out);
    files.add("configuration.csv", render([&](std::ostream& os) { write_configuration_csv(os, g->config()); }));
    files.add("graph.csv", render([&](std::ostream& os) { write_graph_csv(os, *g); }));
    files.add("edges.csv", render([&](std::ostream& os) { write_edges_csv(os, *g); }));
    json report = {{"n_sites", g->size()}, {"rho", g->rho()}, {"edges", g->edge_count()}};
    if (g->size() > 0) {
        const double C = fit_degree_constant(*g);
        std::size_t max_nbar = 0;
        for (SiteId x = 0; x < g->size(); ++x) max_nbar = std::max(max_nbar, g->nbar(x));
        report["C"] = C;
        report["max_nbar"] = max_nbar;
        log << "sites " << g->size() << ", edges " << g->edge_count() << ", C = " << C << '\n';
    } else {
        report["C"] = nullptr;
        log << "empty configuration\n";
    }
    files.add("degree_report.json", report.dump(2) + "\n");
    files.finish("graph", config, {{"graph_hash", graph_hash(*g)}});
    return kExitOk;
}

int cmd_simulate(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log) {
    const auto g = config.graph();
    const auto field = config.field(g);
    const auto plan = config.plan();
    const auto init = config.initial(g);
    const auto vols = config.volumes(*g);
    const auto report = validate_assumptions(field, 10000, kDefaultValidationBox, config.seed());
    const auto ens = run_nested(field, vols, init, plan, threads);

    OutputSet files(out);
    files.add("moments.csv", render([&](std::ostream& os) { write_moments_csv(os, ens, vols.count() - 1, plan.p); }));
    if (config.get("output.trajectories", false).get<bool>())
        files.add("trajectories.csv", render([&](std::ostream& os) { write_trajectories_csv(os, ens); }));
    files.finish("simulate", config,
                 {{"graph_hash", graph_hash(*g)}, {"field", field_json(config)}, {"plan", plan_json(plan)},
                  {"volumes", volumes_json(vols)}, {"assumptions", assumptions_json(report)}});
    log << "simulated " << plan.replicas << " replicas x " << vols.count() << " volumes, " << plan.steps()
        << " steps; assumptions " << (report.passed() ? "pass" : "FAIL") << '\n';
    return kExitOk;
}

int cmd_converge(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log) {
    const auto g = config.graph();
    const auto field = config.field(g);
    const auto plan = config.plan();
    const auto init = config.initial(g);
    const auto vols = config.volumes(*g);
    const auto scale = config.scale();
    const double alpha = config.get("converge.alpha", scale.alpha_star).get<double>();
    const auto betas = config.get("converge.betas", std::vector<double>{scale.alpha_top}).get<std::vector<double>>();
    const double B = config.get("converge.gronwall_B", 1.0).get<double>();
    const double k = config.get("converge.gronwall_k", 2.0).get<double>();
    const double q = config.get("converge.q", 0.5).get<double>();
    const auto trials = config.get("converge.trials", kDefaultOvsTrials).get<std::size_t>();
    if (!scale.contains(alpha)) throw ConfigError("converge.alpha", "outside the scale");
    for (double b : betas)
        if (!scale.contains(b) || !(b > alpha)) throw ConfigError("converge.betas", "each beta must lie in (alpha, alpha_top]");

    const auto ens = run_nested(field, vols, init, plan, threads);
    const double L = estimate_L(FiniteRangeMatrix::neighborhood(g, B, k), scale, q, trials,
                                splitmix64(config.seed() ^ 0x67726f6e), threads);

    std::vector<double> sup_moment(g->size(), 0.0);
    for (std::size_t v = 0; v < vols.count(); ++v)
        for (std::size_t row = 0; row < ens.times().size(); ++row)
            for (SiteId x = 0; x < g->size(); ++x)
                sup_moment[x] = std::max(sup_moment[x], moment_p(ens, v, x, row, plan.p).mean);

    std::ostringstream csv;
    csv << "n,m,beta,alpha_prime,p,gap,stderr,bound,log10_bound,within_bound\n" << std::setprecision(17);
    std::size_t rows = 0, exceeded = 0;
    for (double beta : betas) {
        const double ap = 0.5 * (alpha + beta);
        const double log_K = log_k_series(L, plan.T, q, ap, beta);
        for (std::size_t m = 1; m < vols.count(); ++m)
            for (std::size_t n = 0; n < m; ++n) {
                const auto gap = cauchy_gap(ens, n, m, beta, plan.p);
                std::vector<bool> inner(g->size(), false);
                for (SiteId x : vols[n]) inner[x] = true;
                double S = 0.0;
                for (SiteId x : vols[m])
                    if (!inner[x]) S += std::exp(-ap * g->radius(x)) * std::pow(2.0, plan.p) * sup_moment[x];
                const double log_bound = S > 0 ? log_K + std::log(S) : -std::numeric_limits<double>::infinity();
                const double bound = std::exp(log_bound);
                const bool ok = gap.value <= bound;
                exceeded += ok ? 0 : 1;
                ++rows;
                csv << n << ',' << m << ',' << beta << ',' << ap << ',' << plan.p << ',' << gap.value << ','
                    << gap.se << ',' << bound << ',' << log_bound / std::log(10.0) << ',' << (ok ? 1 : 0) << '\n';
            }
    }
    OutputSet files(out);
    files.add("gaps.csv", csv.str());
    files.finish("converge", config,
                 {{"graph_hash", graph_hash(*g)}, {"field", field_json(config)}, {"plan", plan_json(plan)},
                  {"volumes", volumes_json(vols)}, {"ovs_L", L}, {"rows", rows}, {"rows_above_bound", exceeded}});
    log << rows << " gap rows, " << exceeded << " above the bound (L = " << L << ")\n";
    return kExitOk;
}

int cmd_gibbs(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log) {
    const auto g = config.graph();
    const auto a = PairPotential::parse(config.get("gibbs.a.type", "constant").get<std::string>(),
                                        config.get("gibbs.a.J", 0.0).get<double>(),
                                        config.get("gibbs.a.radius", g->rho()).get<double>());
    const auto V = SinglePotential::parse(config.get("gibbs.V.type", "quartic").get<std::string>(),
                                          config.get("gibbs.V.coeffs", std::vector<double>{}).get<std::vector<double>>());
    const GibbsModel model(g, a, V);
    ChainSpec chain;
    chain.steps = config.get("gibbs.chain.steps", 4000).get<std::size_t>();
    chain.burn_in = config.get("gibbs.chain.burn_in", 1000).get<std::size_t>();
    chain.step_size = config.get("gibbs.chain.step_size", 0.5).get<double>();
    chain.seed = config.seed();

    json report;
    json checks = json::array();
    for (const auto& c : model.validate())
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"worst_margin", c.worst_margin}, {"detail", c.detail}});
    report["model_checks"] = checks;

    const auto eta = config.get("gibbs.eta", all_sites(g->size())).get<std::vector<SiteId>>();
    const auto ks = kernel_sample(model, eta, std::vector<double>(g->size(), 0.0), chain);
    json sites = json::array();
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const auto m = ks.column(i);
        std::vector<double> centred;
        for (const auto& row : ks.samples) centred.push_back((row[i] - m.mean) * (row[i] - m.mean));
        const auto var = mean_stderr_correlated(centred);
        sites.push_back({{"site", eta[i]}, {"mean", m.mean}, {"mean_se", m.se}, {"variance", var.mean}, {"variance_se", var.se}});
    }
    report["kernel"] = {{"eta", eta},           {"kept_samples", ks.samples.size()}, {"acceptance_rate", ks.acceptance_rate},
                        {"step_size", ks.step_size}, {"iat", ks.iat}, {"ess", ks.ess}, {"thin", ks.thin},
                        {"sites", sites},       {"warnings", ks.warnings}};
    log << "kernel: acceptance " << ks.acceptance_rate << ", ess " << ks.ess << '\n';

    if (config.has("gibbs.dlr")) {
        const auto deta = config.require("gibbs.dlr.eta").get<std::vector<SiteId>>();
        if (deta.empty() || deta.size() >= g->size())
            throw HypothesisViolated("gibbs.dlr.eta must be a non-empty proper subset of the window");
        ChainSpec dchain = chain;
        dchain.seed = splitmix64(chain.seed ^ 0x646c72);
        const auto r = dlr_residual(model, deta, dchain, config.get("gibbs.dlr.outer_samples", 100).get<std::size_t>(),
                                    threads, config.get("gibbs.dlr.permutations", kDlrPermutations).get<std::size_t>());
        report["dlr"] = {{"eta", deta},
                         {"statistic", r.test.statistic},
                         {"p_value", r.test.p_value},
                         {"permutations", r.test.permutations},
                         {"outer_samples", r.outer_samples},
                         {"observables", r.observables},
                         {"warnings", r.warnings}};
        log << "dlr: statistic " << r.test.statistic << ", p = " << r.test.p_value << '\n';
    }

    if (config.has("gibbs.reversibility")) {
        const double t = config.get("gibbs.reversibility.t", 0.5).get<double>();
        SimPlan plan;
        plan.dt = config.get("gibbs.reversibility.dt", 0.01).get<double>();
        plan.T = t > 0 ? t : plan.dt;
        plan.scheme = parse_scheme(config.get("gibbs.reversibility.scheme", "tamed_em").get<std::string>());
        plan.replicas = config.get("gibbs.reversibility.paths", 10000).get<std::size_t>();
        plan.master_seed = splitmix64(config.seed() ^ 0x72657631);
        plan.p = 4;
        const std::vector<std::vector<SiteId>> fallback{{0, static_cast<SiteId>(g->size() ? g->size() - 1 : 0)}};
        const auto pairs = config.get("gibbs.reversibility.pairs", fallback).get<std::vector<std::vector<SiteId>>>();
        ChainSpec nu = chain;
        nu.seed = splitmix64(chain.seed ^ 0x6e75);
        json rows = json::array();
        for (const auto& pr : pairs) {
            if (pr.size() != 2 || pr[0] >= g->size() || pr[1] >= g->size())
                throw ConfigError("gibbs.reversibility.pairs", "each pair needs two valid site ids");
            const SiteId x1 = pr[0], x2 = pr[1];
            const Observable f = [x1](std::span<const double> z) { return std::tanh(z[x1]); };
            const Observable h = [x2](std::span<const double> z) { return std::tanh(z[x2]); };
            const auto r = reversibility_test(model, f, h, t, plan, nu, threads);
            const bool ok = std::abs(r.lhs - r.rhs) <= 3 * r.se;
            rows.push_back({{"f_site", x1}, {"g_site", x2}, {"t", t}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"se", r.se},
                            {"paths", r.paths}, {"within_3se", ok}});
            log << "reversibility (" << x1 << ", " << x2 << "): lhs " << r.lhs << ", rhs " << r.rhs << ", se " << r.se
                << '\n';
        }
        report["reversibility"] = rows;
    }

    OutputSet files(out);
    files.add("gibbs_report.json", report.dump(2) + "\n");
    if (config.get("output.samples", false).get<bool>())
        files.add("samples.csv", render([&](std::ostream& os) { write_samples_csv(os, ks); }));
    files.finish("gibbs", config, {{"graph_hash", graph_hash(*g)}});
    return kExitOk;
}

int cmd_ovs(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log) {
    const auto g = config.graph();
    const auto scale = config.scale();
    const std::string type = config.get("ovs.matrix.type", "neighborhood").get<std::string>();
    json matrix_desc = {{"type", type}};
    auto Q = [&] {
        if (type == "neighborhood") {
            const double B = config.get("ovs.matrix.B", 1.0).get<double>(), k = config.get("ovs.matrix.k", 1.0).get<double>();
            matrix_desc["B"] = B;
            matrix_desc["k"] = k;
            return FiniteRangeMatrix::neighborhood(g, B, k);
        }
        if (type == "identity") {
            const double c = config.get("ovs.matrix.c", 1.0).get<double>();
            matrix_desc["c"] = c;
            return FiniteRangeMatrix::scaled_identity(g, c);
        }
        if (type == "zero") return FiniteRangeMatrix::zero(g);
        if (type == "file") {
            std::ifstream in(config.file("ovs.matrix.path"));
            if (!in) throw ConfigError("ovs.matrix.path", "cannot open matrix file");
            return read_matrix_csv(in, g, config.require("ovs.matrix.C").get<double>(), config.get("ovs.matrix.k", 1.0).get<double>());
        }
        throw ConfigError("ovs.matrix.type", "expected neighborhood, identity, zero or file");
    }();
    Q.check_integrity();
    const double q = config.get("ovs.q", 0.5).get<double>();
    const auto trials = config.get("ovs.trials", kDefaultOvsTrials).get<std::size_t>();
    const auto seed = config.get("ovs.seed", config.seed()).get<std::uint64_t>();
    const double L = estimate_L(Q, scale, q, trials, seed, threads);
    const auto verify_seed = splitmix64(seed) + 1;
    const auto cert = verify_ovs_bound(Q, scale, q, L, trials, verify_seed, threads);

    json certificate = {{"matrix", matrix_desc},      {"scale", {scale.alpha_star, scale.alpha_top}},
                        {"q", q},                      {"L", L},
                        {"estimate_seed", seed},       {"verify_seed", verify_seed},
                        {"trials", cert.trials},       {"max_ratio", cert.max_ratio},
                        {"valid", cert.valid()}};

    const auto Ls = config.get("ovs.k_table.L", std::vector<double>{0.0, L}).get<std::vector<double>>();
    const auto Ts = config.get("ovs.k_table.T", std::vector<double>{1.0}).get<std::vector<double>>();
    const auto qs = config.get("ovs.k_table.q", std::vector<double>{0.0, q}).get<std::vector<double>>();
    const auto gaps = config.get("ovs.k_table.gap", std::vector<double>{scale.width()}).get<std::vector<double>>();
    std::ostringstream table;
    table << "L,T,q,gap,K,log_K\n" << std::setprecision(17);
    for (double l : Ls)
        for (double T : Ts)
            for (double qq : qs)
                for (double gap : gaps) {
                    const double logK = log_k_series(l, T, qq, 0.0, gap);
                    double K;
                    try {
                        K = k_series(l, T, qq, 0.0, gap).value;
                    } catch (const NumericError&) {
                        K = std::numeric_limits<double>::infinity();
                    }
                    table << l << ',' << T << ',' << qq << ',' << gap << ',' << K << ',' << logK << '\n';
                }

    OutputSet files(out);
    files.add("certificate.json", certificate.dump(2) + "\n");
    files.add("k_table.csv", table.str());
    files.finish("ovs", config, {{"graph_hash", graph_hash(*g)}});
    log << "L = " << L << ", fresh-trial max ratio " << cert.max_ratio << (cert.valid() ? " (valid)" : " (VIOLATED)") << '\n';
    if (!cert.valid()) throw HypothesisViolated("fresh trials exceeded the estimated Ovsjannikov constant");
    return kExitOk;
}

int run_command(const std::string& command, const std::filesystem::path& config_path, const std::filesystem::path& out,
                unsigned threads, std::ostream& log, std::ostream& err) {
    try {
        const RunConfig config(load_config(config_path), config_path.parent_path());
        if (command == "graph") return cmd_graph(config, out, threads, log);
        if (command == "simulate") return cmd_simulate(config, out, threads, log);
        if (command == "converge") return cmd_converge(config, out, threads, log);
        if (command == "gibbs") return cmd_gibbs(config, out, threads, log);
        if (command == "ovs") return cmd_ovs(config, out, threads, log);
        err << "unknown command '" << command << "'\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParameterError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IntegrityError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const HypothesisViolated& e) {
        err << "hypothesis violated: " << e.what() << '\n';
        return kExitHypothesis;
    }
}

}  // namespace gspin
