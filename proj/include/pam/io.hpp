#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pam/experiments.hpp"
#include "pam/solver.hpp"

namespace pam {

using json = nlohmann::json;

// ---- field dump: JSONL, header {alpha, L, seed, profile} then {z, xi, dup}
// per site. Doubles round-trip bit-exactly through the serializer.

inline json profile_to_json(const RegimeProfile& p) {
    json j;
    j["alpha"] = p.alpha;
    j["kind"] = regime_name(p.kind);
    if (p.kind == RegimeKind::Critical) j["beta"] = p.beta;
    return j;
}

inline RegimeProfile profile_from_json(const json& j) {
    const double alpha = j.at("alpha").get<double>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "critical") return RegimeProfile::critical(alpha, j.value("beta", 1.0));
    if (kind == "subcritical") return RegimeProfile::subcritical(alpha);
    if (kind == "supercritical") return RegimeProfile::supercritical(alpha);
    throw precondition_error("profile_from_json: custom profiles cannot be loaded from file");
}

inline void dump_field(const PotentialField& field, std::ostream& os) {
    json header;
    header["alpha"] = field.alpha();
    header["L"] = field.window();
    header["seed"] = field.seed();
    header["profile"] = field.generated() ? profile_to_json(field.profile()) : json("explicit");
    os << header.dump() << "\n";
    for (i64 z = -field.window(); z <= field.window(); ++z) {
        json rec;
        rec["z"] = z;
        rec["xi"] = field.xi(z);
        rec["dup"] = field.is_dup(std::llabs(z));
        os << rec.dump() << "\n";
    }
}

inline PotentialField load_field(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw precondition_error("load_field: empty input");
    const json header = json::parse(line);
    const double alpha = header.at("alpha").get<double>();
    const i64 L = header.at("L").get<i64>();
    std::vector<double> xi(static_cast<size_t>(2 * L + 1), 0.0);
    std::vector<char> dup(static_cast<size_t>(L + 1), 0);
    i64 seen = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        const i64 z = rec.at("z").get<i64>();
        if (z < -L || z > L) throw precondition_error("load_field: site outside declared window");
        xi[static_cast<size_t>(L + z)] = rec.at("xi").get<double>();
        if (z >= 0) dup[static_cast<size_t>(z)] = rec.at("dup").get<bool>() ? 1 : 0;
        ++seen;
    }
    if (seen != 2 * L + 1) throw precondition_error("load_field: missing site records");
    return PotentialField::from_values(alpha, std::move(xi), std::move(dup));
}

// ---- solver state dump: CSV (t, z, v, log_mass)

inline void dump_states_csv(const std::vector<SolutionState>& states, std::ostream& os,
                            i64 top_k = 0) {
    os << "t,z,v,log_mass\n";
    char buf[128];
    for (const auto& st : states) {
        std::vector<i64> zs;
        if (top_k > 0) {
            std::vector<std::pair<double, i64>> byv;
            for (i64 z = -st.L; z <= st.L; ++z) byv.emplace_back(-st.at(z), z);
            std::sort(byv.begin(), byv.end());
            for (i64 k = 0; k < std::min<i64>(top_k, static_cast<i64>(byv.size())); ++k)
                zs.push_back(byv[static_cast<size_t>(k)].second);
            std::sort(zs.begin(), zs.end());
        } else {
            for (i64 z = -st.L; z <= st.L; ++z) zs.push_back(z);
        }
        for (i64 z : zs) {
            std::snprintf(buf, sizeof buf, "%.17g,%lld,%.17g,%.17g\n", st.t,
                          static_cast<long long>(z), st.at(z), st.log_mass);
            os << buf;
        }
    }
}

// ---- localisation report: one JSONL record

inline json event_flags_to_json(const EventFlags& ev) {
    json j;
    j["e1"] = ev.e1;
    j["e1_z1_window"] = ev.e1_z1_window;
    j["e1_xi_window"] = ev.e1_xi_window;
    j["e1_psi_gap"] = ev.e1_psi_gap;
    j["e1_e_below"] = ev.e1_e_below;
    j["e1_xi_gap"] = ev.e1_xi_gap;
    j["e2"] = ev.e2;
    j["e2_k_window"] = ev.e2_k_window;
    j["e2_dup_nbhd"] = ev.e2_dup_nbhd;
    j["e2_half_nbhd"] = ev.e2_half_nbhd;
    j["ecr"] = ev.ecr;
    j["ecr_applicable"] = ev.ecr_applicable;
    j["ecr_mbar"] = ev.ecr_mbar;
    j["ecr_mp"] = ev.ecr_mp;
    j["ecr_mm"] = ev.ecr_mm;
    j["ecr_sbar"] = ev.ecr_sbar;
    j["ecr_sp"] = ev.ecr_sp;
    j["ecr_sm"] = ev.ecr_sm;
    return j;
}

inline json replicate_time_to_json(const ReplicateTime& r) {
    json j;
    j["t"] = r.t;
    j["ok"] = r.ok;
    if (!r.ok) {
        j["error"] = r.error;
        return j;
    }
    j["log_ratio"] = r.ratio_finite ? json(r.log_ratio) : json(nullptr);
    j["ratio_finite"] = r.ratio_finite;
    j["two_site_mass"] = r.two_site_mass;
    j["top_site_mass"] = r.top_site_mass;
    j["log_mass"] = r.log_mass;
    j["modes_used"] = r.modes_used;
    j["z1"] = r.z1;
    j["z2"] = r.z2;
    j["z1_star"] = r.z1_star;
    j["xi_z1"] = r.xi_z1;
    j["psi_z1"] = r.psi_z1;
    j["stable"] = r.stable;
    j["theta_t"] = r.theta_t;
    j["k_plus"] = r.k_plus;
    j["k_minus"] = r.k_minus;
    j["n_z1"] = r.n_z1;
    j["zeta"] = r.zeta;
    j["sum_diff"] = r.sum_diff;
    j["m_plus"] = r.m_plus;
    j["m_minus"] = r.m_minus;
    j["sig2_plus"] = r.sig2_plus;
    j["sig2_minus"] = r.sig2_minus;
    j["m_bar"] = r.m_bar;
    j["s_bar_inv"] = std::isfinite(r.s_bar_inv) ? json(r.s_bar_inv) : json(nullptr);
    j["q_plus"] = r.q_plus;
    j["q_minus"] = r.q_minus;
    j["q_t"] = r.q_t;
    j["var_qt"] = r.var_qt;
    j["events"] = event_flags_to_json(r.events);
    return j;
}

inline void dump_replicates_jsonl(const std::vector<ReplicateResult>& batch, std::ostream& os) {
    for (const auto& rr : batch) {
        json j;
        j["seed"] = rr.seed;
        j["per_t"] = json::array();
        for (const auto& r : rr.per_t) j["per_t"].push_back(replicate_time_to_json(r));
        os << j.dump() << "\n";
    }
}

// ---- per-t aggregates: summary.csv

inline void dump_summary_csv(const ExperimentConfig& cfg, const std::vector<ReplicateResult>& batch,
                             std::ostream& os) {
    os << "t,n_ok,median_abs_log_ratio,median_two_site_mass,median_var_qt,"
          "freq_e1,freq_e2,freq_ecr\n";
    char buf[256];
    for (size_t i = 0; i < cfg.t_grid.size(); ++i) {
        auto alr = detail::column(batch, i, [](const ReplicateTime& r) {
            return r.ratio_finite ? std::abs(r.log_ratio) : kNaN;
        });
        auto tsm = detail::column(batch, i, [](const ReplicateTime& r) { return r.two_site_mass; });
        auto var = detail::column(batch, i, [](const ReplicateTime& r) { return r.var_qt; });
        i64 n_ok = 0, e1 = 0, e2 = 0, ecr = 0;
        for (const auto& rr : batch) {
            if (i >= rr.per_t.size() || !rr.per_t[i].ok) continue;
            ++n_ok;
            e1 += rr.per_t[i].events.e1;
            e2 += rr.per_t[i].events.e2;
            ecr += rr.per_t[i].events.ecr;
        }
        std::snprintf(buf, sizeof buf, "%.17g,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      cfg.t_grid[i], static_cast<long long>(n_ok),
                      alr.empty() ? kNaN : median(alr), tsm.empty() ? kNaN : median(tsm),
                      var.empty() ? kNaN : median(var),
                      n_ok ? double(e1) / n_ok : kNaN, n_ok ? double(e2) / n_ok : kNaN,
                      n_ok ? double(ecr) / n_ok : kNaN);
        os << buf;
    }
}

inline json verdict_to_json(const Verdict& v) {
    json j;
    j["suite"] = v.suite;
    j["verdict"] = v.pass ? "PASS" : "FAIL";
    j["details"] = v.details;
    j["stats"] = v.stats;
    j["notes"] = v.notes;
    return j;
}

inline json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["profile"] = profile_to_json(cfg.profile);
    j["beta"] = cfg.beta;
    j["t_grid"] = cfg.t_grid;
    j["replicates"] = cfg.replicates;
    j["base_seed"] = cfg.base_seed;
    j["threads"] = cfg.threads;
    j["trend_p"] = cfg.trend_p;
    j["gof_p"] = cfg.gof_p;
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << content;
}

}  // namespace pam
