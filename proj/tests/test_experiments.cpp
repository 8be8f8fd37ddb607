#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "pam/io.hpp"

using namespace pam;

namespace {

std::string batch_bytes(const std::vector<ReplicateResult>& batch) {
    std::stringstream ss;
    dump_replicates_jsonl(batch, ss);
    return ss.str();
}

}  // namespace

TEST_CASE("replicates are deterministic") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::critical(3.0, 1.0);
    auto a = run_replicate(cfg, 5, 1e3);
    auto b = run_replicate(cfg, 5, 1e3);
    REQUIRE(a.ok);
    REQUIRE(replicate_time_to_json(a).dump() == replicate_time_to_json(b).dump());
}

TEST_CASE("thread count does not change batch output") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::critical(3.0, 1.0);
    cfg.t_grid = {1e3};
    cfg.replicates = 8;
    cfg.threads = 1;
    auto seq = run_batch(cfg);
    cfg.threads = 3;
    auto par = run_batch(cfg);
    REQUIRE(batch_bytes(seq) == batch_bytes(par));
}

TEST_CASE("fully duplicated profile gives an exactly balanced ratio") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::custom(3.0, [](i64) { return 0.0; });
    for (u64 seed = 1; seed <= 5; ++seed) {
        auto r = run_replicate(cfg, seed, 1e3);
        REQUIRE(r.ok);
        REQUIRE(r.ratio_finite);
        REQUIRE(std::abs(r.log_ratio) <= 1e-9);
        REQUIRE(r.k_plus == 0);
        REQUIRE(r.q_t == 0.0);
        auto h = heuristic_diagnostics(r);
        REQUIRE(h.q_t == 0.0);
        REQUIRE(h.taylor_proxy == 0.0);
        bool empty_e = false;
        auto scales = make_scales(1e3, 3.0);
        REQUIRE(zeta_statistic(r, scales, &empty_e) == 0.0);
        REQUIRE(empty_e);
    }
}

TEST_CASE("failure records do not abort a batch") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::critical(3.0, 1.0);
    cfg.t_grid = {1e3};
    cfg.replicates = 30;
    auto batch = run_batch(cfg);
    i64 failures = 0;
    for (const auto& rr : batch) failures += !rr.per_t[0].ok;
    REQUIRE(failures <= static_cast<i64>(0.05 * cfg.replicates) + 1);
}

TEST_CASE("config validation") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::critical(3.0, 1.0);
    cfg.t_grid = {1e4, 1e3};
    REQUIRE_THROWS_AS(validate_config(cfg), precondition_error);
    cfg.t_grid = {1e3, 1e4};
    cfg.replicates = 10;
    REQUIRE_THROWS_AS(validate_config(cfg), precondition_error);
    cfg.replicates = 30;
    REQUIRE_NOTHROW(validate_config(cfg));
}

TEST_CASE("suite regime consistency") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::critical(3.0, 1.0);
    cfg.t_grid = {1e3, 3e3, 1e4};
    cfg.replicates = 30;
    std::vector<ReplicateResult> dummy(30);
    REQUIRE_THROWS_AS(phase_suite(cfg, dummy), precondition_error);
    cfg.replicates = 100;
    REQUIRE_THROWS_AS(critical_suite(cfg, dummy), precondition_error);  // underpowered
}

TEST_CASE("degenerate constant trend is reported as a pass for the subcritical sense") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::custom(3.0, [](i64) { return 0.0; });
    cfg.t_grid = {1e3, 2e3, 4e3};
    cfg.replicates = 30;
    auto batch = run_batch(cfg);
    // a custom all-duplicated profile classifies as subcritical (eta = 0)
    auto v = phase_suite(cfg, batch);
    REQUIRE(v.pass);
    REQUIRE(v.details.find("degenerate") != std::string::npos);
}

TEST_CASE("localisation suite on a small critical batch") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::critical(3.0, 1.0);
    cfg.t_grid = {1e3, 1e4, 1e5};
    cfg.replicates = 40;
    auto batch = run_batch(cfg);
    auto v = localisation_suite(cfg, batch);
    REQUIRE(v.stats.count("median_two_site_t2") == 1);
    REQUIRE(v.stats["median_two_site_t2"] > 0.5);
    REQUIRE_THROWS_AS(localisation_suite(ExperimentConfig{cfg.profile, 1.0, {1e3, 1e4}, 40, 1},
                                         batch),
                      precondition_error);
}

TEST_CASE("clt suite") {
    auto v = clt_suite(3.0, 1e-3, 10000, 7, 2000);
    REQUIRE(v.pass);
    REQUIRE_THROWS_AS(clt_suite(3.0, 1e-3, 10, 7), precondition_error);
    REQUIRE_THROWS_AS(clt_suite(3.0, 0.5, 10000, 7), precondition_error);
}

TEST_CASE("critical reference scales as the square root of beta") {
    auto r1 = critical_reference(3.0, 1.0, 100, 9);
    auto r2 = critical_reference(3.0, 2.0, 100, 9);
    for (size_t i = 0; i < r1.size(); ++i)
        REQUIRE(r2[i] == Catch::Approx(std::sqrt(2.0) * r1[i]).margin(1e-12));
}

TEST_CASE("variance estimate and event flags are populated on critical replicates") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::critical(3.0, 1.0);
    auto r = run_replicate(cfg, 3, 1e4);
    REQUIRE(r.ok);
    REQUIRE(r.var_qt > 0.0);
    REQUIRE(r.events.ecr_applicable);
    REQUIRE(r.n_z1 > 0);
    auto h = heuristic_diagnostics(r);
    REQUIRE(std::isfinite(h.gap_q_taylor));
}

TEST_CASE("summary and replicate serialization round trip structurally") {
    ExperimentConfig cfg;
    cfg.profile = RegimeProfile::critical(3.0, 1.0);
    cfg.t_grid = {1e3};
    cfg.replicates = 3;
    auto batch = run_batch(cfg);
    std::stringstream ss;
    dump_replicates_jsonl(batch, ss);
    i64 lines = 0;
    std::string line;
    while (std::getline(ss, line)) {
        auto j = json::parse(line);
        REQUIRE(j.contains("seed"));
        REQUIRE(j["per_t"].size() == 1);
        ++lines;
    }
    REQUIRE(lines == 3);
    std::stringstream cs;
    dump_summary_csv(cfg, batch, cs);
    REQUIRE(cs.str().find("median_two_site_mass") != std::string::npos);
}
