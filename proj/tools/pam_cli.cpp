// pam: simulation CLI for the lattice heat equation with a partially
// duplicated Pareto potential. Subcommands: generate, solve, localise,
// pathsum, experiment, verify.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pam/io.hpp"

namespace fs = std::filesystem;
using namespace pam;

namespace {

constexpr const char* kVersion = "pamsim 1.0.0";

struct FieldArgs {
    double alpha = 3.0;
    std::string regime = "critical";
    double beta = 1.0;
    u64 seed = 1;
    i64 window = 1000;
    std::string field_file;
};

void add_field_options(CLI::App* cmd, FieldArgs& fa, bool with_file = true) {
    cmd->add_option("--alpha", fa.alpha, "Pareto tail index (>= 2)");
    cmd->add_option("--regime", fa.regime, "critical|subcritical|supercritical")
        ->check(CLI::IsMember({"critical", "subcritical", "supercritical"}));
    cmd->add_option("--beta", fa.beta, "critical-regime intensity");
    cmd->add_option("--seed", fa.seed, "field seed");
    cmd->add_option("--window", fa.window, "field window half-width L");
    if (with_file) cmd->add_option("--field", fa.field_file, "load field from JSONL instead");
}

RegimeProfile make_profile(const FieldArgs& fa) {
    if (fa.regime == "critical") return RegimeProfile::critical(fa.alpha, fa.beta);
    if (fa.regime == "subcritical") return RegimeProfile::subcritical(fa.alpha);
    return RegimeProfile::supercritical(fa.alpha);
}

PotentialField make_field(const FieldArgs& fa) {
    if (!fa.field_file.empty()) {
        std::ifstream is(fa.field_file, std::ios::binary);
        if (!is) throw std::runtime_error("cannot open field file: " + fa.field_file);
        return load_field(is);
    }
    return build_potential(make_profile(fa), fa.window, fa.seed);
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> g;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) g.push_back(std::stod(tok));
    return g;
}

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
    if (path.empty()) return nullptr;
    auto os = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*os) throw std::runtime_error("cannot open output file: " + path);
    return os;
}

// ---- experiment orchestration ----

struct ExperimentArgs {
    std::string suite;
    std::string config_file;
    FieldArgs fa;
    std::string t_grid_str;
    i64 replicates = -1;
    int threads = 1;
    std::string out_dir = ".";
    bool emit_plotdata = false;
    // clt / point-process specifics
    double theta_over_xi = 1e-3;
    i64 k_size = 10000;
    double pp_scale = 1e4;
    i64 pp_fields = 500;
};

ExperimentConfig build_config(const ExperimentArgs& ea) {
    ExperimentConfig cfg;
    // file values first, CLI overrides win
    if (!ea.config_file.empty()) {
        std::ifstream is(ea.config_file);
        if (!is) throw std::runtime_error("cannot open config: " + ea.config_file);
        json j = json::parse(is);
        if (j.contains("profile")) cfg.profile = profile_from_json(j["profile"]);
        cfg.beta = j.value("beta", cfg.beta);
        if (j.contains("t_grid")) cfg.t_grid = j["t_grid"].get<std::vector<double>>();
        cfg.replicates = j.value("replicates", cfg.replicates);
        cfg.base_seed = j.value("base_seed", cfg.base_seed);
        cfg.threads = j.value("threads", cfg.threads);
        cfg.trend_p = j.value("trend_p", cfg.trend_p);
        cfg.gof_p = j.value("gof_p", cfg.gof_p);
    } else {
        cfg.profile = make_profile(ea.fa);
        cfg.beta = ea.fa.beta;
        cfg.base_seed = ea.fa.seed;
    }
    if (!ea.t_grid_str.empty()) cfg.t_grid = parse_grid(ea.t_grid_str);
    if (ea.replicates > 0) cfg.replicates = ea.replicates;
    if (ea.threads > 0) cfg.threads = ea.threads;
    cfg.progress = true;
    return cfg;
}

int run_experiment(const ExperimentArgs& ea) {
    ExperimentConfig cfg = build_config(ea);
    fs::create_directories(ea.out_dir);
    const fs::path dir(ea.out_dir);

    json eff;
    eff["suite"] = ea.suite;
    eff["version"] = kVersion;
    eff["config"] = config_to_json(cfg);

    Verdict verdict;
    if (ea.suite == "clt") {
        eff["theta_over_xi"] = ea.theta_over_xi;
        eff["k_size"] = ea.k_size;
        write_text_file(dir / "effective_config.json", eff.dump(2) + "\n");
        verdict = clt_suite(cfg.alpha(), ea.theta_over_xi, ea.k_size, cfg.base_seed);
    } else if (ea.suite == "pointprocess") {
        eff["scale"] = ea.pp_scale;
        eff["n_fields"] = ea.pp_fields;
        write_text_file(dir / "effective_config.json", eff.dump(2) + "\n");
        const std::vector<Box> boxes{{0.0, 1.0, 1.0, 2.0},
                                     {0.0, 1.0, 2.0, kInf},
                                     {1.0, 2.0, 1.25, 2.5},
                                     {1.0, 2.0, 2.5, kInf}};
        verdict = point_process_suite(cfg.profile, ea.pp_scale, ea.pp_fields, boxes,
                                      cfg.base_seed, false, cfg.beta, cfg.gof_p);
    } else {
        write_text_file(dir / "effective_config.json", eff.dump(2) + "\n");
        std::fprintf(stderr, "running %lld replicates x %zu t values...\n",
                     static_cast<long long>(cfg.replicates), cfg.t_grid.size());
        auto batch = run_batch(cfg);
        {
            std::ofstream os(dir / "replicates.jsonl", std::ios::binary);
            dump_replicates_jsonl(batch, os);
        }
        {
            std::ofstream os(dir / "summary.csv", std::ios::binary);
            dump_summary_csv(cfg, batch, os);
        }
        if (ea.suite == "localisation") verdict = localisation_suite(cfg, batch);
        else if (ea.suite == "phase") verdict = phase_suite(cfg, batch);
        else if (ea.suite == "critical") verdict = critical_suite(cfg, batch);
        else if (ea.suite == "variance") verdict = variance_suite(cfg, batch);
        else throw precondition_error("unknown suite: " + ea.suite);
        if (ea.emit_plotdata) {
            std::ofstream os(dir / "plotdata.csv", std::ios::binary);
            dump_summary_csv(cfg, batch, os);
        }
    }
    json verdicts;
    verdicts[verdict.suite] = verdict_to_json(verdict);
    write_text_file(dir / "verdicts.json", verdicts.dump(2) + "\n");
    std::cout << verdict.suite << ": " << (verdict.pass ? "PASS" : "FAIL") << " — "
              << verdict.details << "\n";
    return verdict.pass ? 0 : 1;
}

// ---- verify: fast self-test battery ----

int run_verify() {
    int failures = 0;
    auto report = [&](const std::string& name, bool ok, const std::string& info = "") {
        std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
        if (!info.empty()) std::cout << "  (" << info << ")";
        std::cout << "\n";
        if (!ok) ++failures;
    };

    // simplex integrals: closed forms
    {
        const double i0 = simplex_integral(2.0, {1.5});
        const double conf = simplex_integral(2.0, {1.0, 1.0, 1.0});
        const double i1 = simplex_integral(1.0, {1.0, 0.0});
        report("simplex closed forms",
               std::abs(i0 - 3.0) < 1e-12 &&
                   std::abs(conf - (2.0 + std::log(4.0 / 2.0))) < 1e-12 &&
                   std::abs(std::exp(i1) - (std::exp(1.0) - 1.0)) < 1e-12);
    }
    // oracle triangle on a few random fields
    {
        bool ok = true;
        double worst = 0.0;
        for (u64 seed = 1; seed <= 5 && ok; ++seed) {
            auto field = build_potential(RegimeProfile::critical(3.0, 1.0), 5, seed);
            auto states = solve_pam(field, {1.0}, 5);
            auto oracle = dense_oracle(field, 1.0, 5);
            for (i64 z = -5; z <= 5; ++z)
                worst = std::max(worst,
                                 std::abs(states[0].at(z) - oracle.at(z)) /
                                     std::max(oracle.at(z), 1e-300));
            worst = std::max(worst, std::abs(states[0].log_mass - oracle.log_mass));
            ok = worst < 1e-6;
        }
        report("solver vs dense oracle", ok, "worst rel err " + std::to_string(worst));
    }
    // Pareto moments
    {
        double m = 0.0, m2 = 0.0;
        const i64 n = 200000;
        for (i64 i = 0; i < n; ++i) {
            const double x = pareto_quantile(site_uniform(42, i, Stream::Base), 3.0);
            m += x;
            m2 += x * x;
        }
        m /= n;
        m2 = m2 / n - m * m;
        report("pareto mean/variance", std::abs(m - 1.5) < 0.02 && std::abs(m2 - 0.75) < 0.05,
               "mean " + std::to_string(m) + " var " + std::to_string(m2));
    }
    // symmetry null: fully duplicated field
    {
        bool ok = true;
        ExperimentConfig cfg;
        cfg.profile = RegimeProfile::custom(3.0, [](i64) { return 0.0; });
        for (u64 seed = 1; seed <= 3; ++seed) {
            auto r = run_replicate(cfg, seed, 1e3);
            ok = ok && r.ok && r.ratio_finite && std::abs(r.log_ratio) <= 1e-9;
        }
        report("mirror-symmetry null", ok);
    }
    // statistical helpers: closed-form cases
    {
        std::vector<double> u{0.1, 0.4, 0.7};
        const double d_same = ks_two_sample_statistic(u, u);
        auto cs = chi_square_gof({10, 10, 10}, {10, 10, 10});
        report("stats helpers", d_same == 0.0 && cs.stat == 0.0);
    }
    // limit sampler support + density normalization
    {
        auto samples = sample_limit_B(3.0, 200, 7);
        bool ok = true;
        for (const auto& s : samples)
            ok = ok && s.b > 0 && s.x1 > 0 && s.y1 > 0.5 * s.x1;
        const double norm = limit_density_normalization(3.0);
        report("limit-law sampler", ok && std::abs(norm - 1.0) < 1e-6,
               "density integral " + std::to_string(norm));
    }
    std::cout << (failures == 0 ? "verify: PASS" : "verify: FAIL") << "\n";
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kVersion) + " — duplicated-potential lattice simulation"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "generate a potential field (JSONL)");
    FieldArgs gen_fa;
    std::string gen_out;
    add_field_options(gen, gen_fa, false);
    gen->add_option("--out", gen_out, "output file (default stdout)");

    // solve
    auto* slv = app.add_subcommand("solve", "integrate the equation on a field");
    FieldArgs slv_fa;
    std::string slv_grid = "1", slv_out;
    i64 slv_L = -1, slv_topk = 0;
    double slv_tol = 1e-8;
    add_field_options(slv, slv_fa);
    slv->add_option("--t-grid", slv_grid, "comma-separated increasing times");
    slv->add_option("--window-solve", slv_L, "solver half-width (default: field window)");
    slv->add_option("--tolerance", slv_tol, "local tolerance");
    slv->add_option("--top-k", slv_topk, "sparse dump: only top-k sites by mass");
    slv->add_option("--out", slv_out, "CSV output (default stdout)");

    // localise
    auto* loc = app.add_subcommand("localise", "maximisers, K set, moments, events at time t");
    FieldArgs loc_fa;
    double loc_t = 1e3;
    std::string loc_out;
    add_field_options(loc, loc_fa, false);
    loc->add_option("--t", loc_t, "time");
    loc->add_option("--out", loc_out, "JSONL output (default stdout)");

    // pathsum
    auto* ps = app.add_subcommand("pathsum", "truncated exact path-sum oracle (tiny windows)");
    FieldArgs ps_fa;
    double ps_t = 0.5;
    i64 ps_target = 0, ps_maxlen = 10;
    std::string ps_out;
    add_field_options(ps, ps_fa);
    ps->add_option("--t", ps_t, "time");
    ps->add_option("--target", ps_target, "target site");
    ps->add_option("--max-len", ps_maxlen, "maximum path length");
    ps->add_option("--out", ps_out, "per-path CSV output");

    // experiment
    auto* exp = app.add_subcommand("experiment", "run a Monte Carlo suite");
    ExperimentArgs ea;
    exp->add_option("suite", ea.suite,
                    "localisation|phase|critical|variance|clt|pointprocess")
        ->required()
        ->check(CLI::IsMember(
            {"localisation", "phase", "critical", "variance", "clt", "pointprocess"}));
    exp->add_option("--config", ea.config_file, "JSON config file (CLI flags override)");
    add_field_options(exp, ea.fa, false);
    exp->add_option("--t-grid", ea.t_grid_str, "comma-separated increasing times");
    exp->add_option("--replicates", ea.replicates, "number of replicates");
    exp->add_option("--threads", ea.threads, "worker threads (1 = sequential)");
    exp->add_option("--out", ea.out_dir, "output directory");
    exp->add_flag("--emit-plotdata", ea.emit_plotdata, "also write per-figure CSV");
    exp->add_option("--theta-over-xi", ea.theta_over_xi, "clt: threshold ratio");
    exp->add_option("--k-size", ea.k_size, "clt: summands per sum");
    exp->add_option("--scale", ea.pp_scale, "pointprocess: rescaling s");
    exp->add_option("--n-fields", ea.pp_fields, "pointprocess: independent fields");

    // verify
    app.add_subcommand("verify", "run the fast self-test battery");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            auto field = make_field(gen_fa);
            auto os = open_out(gen_out);
            dump_field(field, os ? *os : std::cout);
            return 0;
        }
        if (slv->parsed()) {
            auto field = make_field(slv_fa);
            const i64 L = slv_L > 0 ? slv_L : field.window();
            auto states = solve_pam(field, parse_grid(slv_grid), L, slv_tol);
            auto os = open_out(slv_out);
            dump_states_csv(states, os ? *os : std::cout, slv_topk);
            for (const auto& st : states)
                if (st.window_warning)
                    std::cerr << "warning: boundary leakage above 1e-6 at t=" << st.t << "\n";
            return 0;
        }
        if (loc->parsed()) {
            ExperimentConfig cfg;
            cfg.profile = make_profile(loc_fa);
            cfg.beta = loc_fa.beta;
            auto r = run_replicate(cfg, loc_fa.seed, loc_t);
            auto os = open_out(loc_out);
            json j = replicate_time_to_json(r);
            j["seed"] = loc_fa.seed;
            (os ? *os : std::cout) << j.dump() << "\n";
            return r.ok ? 0 : 3;
        }
        if (ps->parsed()) {
            auto field = make_field(ps_fa);
            auto os = open_out(ps_out);
            auto per_path = [&](const std::vector<i64>& sites, double lv) {
                if (!os) return;
                std::string steps;
                for (size_t i = 1; i < sites.size(); ++i)
                    steps += sites[i] > sites[i - 1] ? '+' : '-';
                char buf[64];
                std::snprintf(buf, sizeof buf, ",%.17g\n", lv);
                *os << steps << buf;
            };
            if (os) *os << "path,log_value\n";
            auto r = truncated_path_sum(field, ps_t, ps_target, ps_maxlen, 10'000'000, per_path);
            json j;
            j["log_u_lower"] = r.log_u_lower;
            j["tail_bound"] = r.tail_bound;
            j["log_tail"] = r.log_tail;
            j["paths"] = r.paths;
            std::cout << j.dump() << "\n";
            return 0;
        }
        if (exp->parsed()) return run_experiment(ea);
        return run_verify();
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
