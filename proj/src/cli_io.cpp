#include "kcs/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kcs/click_limit.hpp"
#include "kcs/dark_manifold.hpp"
#include "kcs/dtwa.hpp"
#include "kcs/entanglement.hpp"
#include "kcs/errors.hpp"

namespace kcs {

namespace {

using json = nlohmann::json;

const std::vector<std::pair<std::string, std::string>>& subcommand_table() {
    static const std::vector<std::pair<std::string, std::string>> t{
        {"rates", "effective decay and dispersive rates from cavity elimination"},
        {"raman", "effective parameters of the Raman-drive level scheme"},
        {"trajectories", "quantum-jump trajectory averages for the effective model"},
        {"full-cavity", "joint spin-cavity trajectory averages"},
        {"layers", "click-resolved layer norms, intensities, and the Boolean floor"},
        {"ode", "mean-field cascade density and the peak-time quadrature"},
        {"dark", "orthonormal dark-state basis with per-vector signatures"},
        {"fragments", "connected components of each magnetization sector"},
        {"negativity", "logarithmic negativity of the reconstructed state over time"},
        {"witness", "adjacent-pair entanglement witness on the stationary state"},
        {"dtwa", "semiclassical phase-space trajectory averages"},
    };
    return t;
}

bool known_subcommand(const std::string& name) {
    for (const auto& [n, d] : subcommand_table())
        if (n == name) return true;
    return false;
}

[[noreturn]] void bad_field(const std::string& path, const std::string& want, const json& got) {
    throw ConfigError("config field \"" + path + "\": expected " + want + ", got " + got.dump());
}

void check_keys(const json& j, const std::string& path, const std::vector<const char*>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) {
            const std::string full = path.empty() ? it.key() : path + "." + it.key();
            throw ConfigError("config: unknown key \"" + full + "\"");
        }
    }
}

double get_num(const json& j, const std::string& path) {
    if (!j.is_number()) bad_field(path, "a number", j);
    return j.get<double>();
}

std::int64_t get_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) bad_field(path, "an integer", j);
    return j.get<std::int64_t>();
}

bool get_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) bad_field(path, "a boolean", j);
    return j.get<bool>();
}

std::string get_str(const json& j, const std::string& path) {
    if (!j.is_string()) bad_field(path, "a string", j);
    return j.get<std::string>();
}

const char* kind_name(RuleKind k) {
    switch (k) {
    case RuleKind::dicke: return "dicke";
    case RuleKind::east: return "east";
    case RuleKind::and_rule: return "and";
    case RuleKind::or_rule: return "or";
    case RuleKind::custom: return "custom";
    }
    return "?";
}

ConstraintRule parse_rule(const json& j) {
    if (j.is_string()) {
        json obj = json::object();
        obj["kind"] = j;
        return parse_rule(obj);
    }
    if (!j.is_object()) bad_field("rule", "an object or a rule name", j);
    check_keys(j, "rule", {"kind", "w", "table", "boundary", "fill_occupied"});
    if (!j.contains("kind")) throw ConfigError("config: missing required key \"rule.kind\"");
    const std::string kind = get_str(j["kind"], "rule.kind");

    Boundary b = Boundary::periodic;
    if (j.contains("boundary")) {
        const std::string s = get_str(j["boundary"], "rule.boundary");
        if (s == "periodic")
            b = Boundary::periodic;
        else if (s == "open")
            b = Boundary::open;
        else
            bad_field("rule.boundary", "\"periodic\" or \"open\"", j["boundary"]);
    }
    const bool fill = j.contains("fill_occupied")
                          ? get_bool(j["fill_occupied"], "rule.fill_occupied")
                          : true;

    int w = -1;
    if (j.contains("w")) {
        w = static_cast<int>(get_int(j["w"], "rule.w"));
        if (w < 0) throw ConfigError("config field \"rule.w\": must be nonnegative");
    }
    std::vector<std::uint8_t> table;
    if (j.contains("table")) {
        if (!j["table"].is_array()) bad_field("rule.table", "an array of 0/1", j["table"]);
        for (std::size_t i = 0; i < j["table"].size(); ++i) {
            const auto& e = j["table"][i];
            if (!e.is_number_integer() || (e.get<int>() != 0 && e.get<int>() != 1))
                bad_field("rule.table[" + std::to_string(i) + "]", "0 or 1", e);
            table.push_back(static_cast<std::uint8_t>(e.get<int>()));
        }
    }

    auto expect_w = [&](int fixed) {
        if (w >= 0 && w != fixed)
            throw ConfigError("config field \"rule.w\": fixed to " + std::to_string(fixed) +
                              " for rule \"" + kind + "\"");
    };
    if (kind != "custom" && !table.empty())
        throw ConfigError("config field \"rule.table\": only custom rules take a table");

    if (kind == "dicke") {
        expect_w(0);
        return ConstraintRule::dicke();
    }
    if (kind == "east") {
        expect_w(1);
        return ConstraintRule::east(b);
    }
    if (kind == "and") {
        expect_w(1);
        return ConstraintRule::and_rule(b, fill);
    }
    if (kind == "or") {
        expect_w(1);
        return ConstraintRule::or_rule(b, fill);
    }
    if (kind == "custom") {
        if (w < 1) throw ConfigError("config field \"rule.w\": custom rules need w >= 1");
        const std::size_t want = std::size_t{1} << (2 * w);
        if (table.size() != want)
            throw ConfigError("config field \"rule.table\": rule with w = " + std::to_string(w) +
                              " needs 2^(2w) = " + std::to_string(want) + " entries, got " +
                              std::to_string(table.size()));
        return ConstraintRule::custom(w, table, b, fill);
    }
    bad_field("rule.kind", "one of dicke, east, and, or, custom", j["kind"]);
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// output plumbing

struct OutputSink {
    std::filesystem::path dir;
    std::string tag; // "<prefix>_<subcommand>"
    std::map<std::string, std::uint64_t> sums;
    std::vector<std::string> written;

    void write(const std::string& name, const std::string& bytes, bool checksum = true) {
        const auto path = dir / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw ResourceError("cannot open \"" + path.string() + "\" for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.flush();
        if (!f) throw ResourceError("short write to \"" + path.string() + "\"");
        if (checksum) sums[name] = fnv1a64(bytes);
        written.push_back(path.string());
    }
};

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

std::string trajectory_csv(const TrajectoryResult& res, const std::vector<std::string>& filter) {
    std::vector<std::string> cols;
    for (const auto& name : observable_names()) {
        if (!res.observables.count(name)) continue;
        if (!filter.empty() && std::find(filter.begin(), filter.end(), name) == filter.end())
            continue;
        cols.push_back(name);
    }
    for (const auto& f : filter)
        if (!res.observables.count(f))
            throw ConfigError("observable \"" + f + "\" is not produced by this subcommand");

    std::string out = "t";
    for (const auto& c : cols) out += "," + c + "_mean," + c + "_sem";
    out += "\n";
    const auto t = res.grid.times();
    for (int k = 0; k < res.grid.n_points; ++k) {
        out += format_double(t[k]);
        for (const auto& c : cols) {
            const auto& s = res.observables.at(c);
            out += "," + format_double(s.mean[k]) + "," + format_double(s.sem[k]);
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// subcommand handlers

void run_rates(const RunConfig& cfg, OutputSink& sink) {
    CavityParams cp;
    cp.g = cfg.g;
    cp.kappa = cfg.kappa;
    cp.delta = cfg.delta;
    cp.n_atoms = cfg.n_sites;
    const EffectiveRates er = eliminate_cavity(cp);
    bool warn = false;
    const double margin = validity_margin(cp, &warn);
    json out;
    out["gamma"] = er.gamma;
    out["chi"] = er.chi;
    out["validity_margin"] = finite_or_string(margin);
    out["validity_warn"] = warn;
    sink.write(sink.tag + ".json", dump_json(out));
}

void run_raman(const RunConfig& cfg, OutputSink& sink) {
    if (!cfg.has_raman)
        throw ConfigError("the raman subcommand needs a \"raman\" parameter block");
    const RamanRates rr = raman_reduce(cfg.raman);
    json out;
    out["g_eff"] = rr.g_eff;
    out["gamma_eff"] = rr.gamma_eff;
    out["cooperativity"] = finite_or_string(rr.cooperativity);
    out["loss_ratio"] = finite_or_string(rr.loss_ratio);
    out["light_shift"] = finite_or_string(rr.light_shift);
    sink.write(sink.tag + ".json", dump_json(out));
}

void run_trajectories(const RunConfig& cfg, OutputSink& sink) {
    JumpOptions opt;
    opt.dt = cfg.dt;
    const auto res = run_quantum_jumps(cfg.effective_model(), PureState::all_up(cfg.n_sites),
                                       cfg.grid, cfg.n_traj, cfg.seed, opt);
    sink.write(sink.tag + ".csv", trajectory_csv(res, cfg.observables));
}

void run_full_cavity_cmd(const RunConfig& cfg, OutputSink& sink) {
    JumpOptions opt;
    opt.dt = cfg.dt;
    const auto res =
        run_full_cavity(cfg.cavity_model(), cfg.n_sites, cfg.grid, cfg.n_traj, cfg.seed, opt);
    sink.write(sink.tag + ".csv", trajectory_csv(res, cfg.observables));
    json out;
    out["n_max_used"] = res.n_max_used;
    sink.write(sink.tag + ".json", dump_json(out));
}

void run_layers(const RunConfig& cfg, OutputSink& sink) {
    const LayerSpectrum spec = layer_spectrum(cfg.rule, cfg.n_sites, cfg.k_max);
    std::string csv = "k,logB,intensity,lower_bound\n";
    for (int k = 0; k <= spec.k_max; ++k) {
        const double inten =
            k < static_cast<int>(spec.intensities.size()) ? spec.intensities[k] : 0.0;
        csv += std::to_string(k) + "," + format_double(spec.log_norms[k]) + "," +
               format_double(inten) + "," +
               format_double(boolean_lower_bound(cfg.rule.range, cfg.n_sites, k)) + "\n";
    }
    sink.write(sink.tag + ".csv", csv);
}

void run_ode(const RunConfig& cfg, OutputSink& sink) {
    const double n0 = 1.0 - 1.0 / cfg.n_sites;
    const DensityTrajectory traj = ode_density_and(n0, cfg.grid.times());
    std::string csv = "tau,n\n";
    for (std::size_t i = 0; i < traj.tau.size(); ++i)
        csv += format_double(traj.tau[i]) + "," + format_double(traj.n[i]) + "\n";
    sink.write(sink.tag + ".csv", csv);

    const double n_star = g_and_maximizer();
    json out;
    out["n0"] = n0;
    out["n_star"] = n_star;
    out["t_star"] = quadrature_time(n_star, n0);
    sink.write(sink.tag + ".json", dump_json(out));
}

void run_dark(const RunConfig& cfg, OutputSink& sink) {
    const DarkBasis basis = kernel_basis(cfg.rule, cfg.n_sites);
    std::string csv = "idx,sector,class,nadj,ntri\n";
    std::map<int, int> sector_dims;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        csv += std::to_string(i) + "," + std::to_string(basis.sector[i]) + "," +
               dark_class_name(basis.labels[i]) + "," + format_double(basis.nadj[i]) + "," +
               format_double(basis.ntri[i]) + "\n";
        sector_dims[basis.sector[i]] += 1;
    }
    sink.write(sink.tag + ".csv", csv);

    json sectors = json::array();
    for (const auto& [m, d] : sector_dims) sectors.push_back({{"sector", m}, {"dim", d}});
    json out;
    out["kernel_dim"] = basis.size();
    out["sectors"] = sectors;
    sink.write(sink.tag + ".json", dump_json(out));
}

void run_fragments(const RunConfig& cfg, OutputSink& sink) {
    const FragmentationReport rep = fragmentation_report(cfg.rule, cfg.n_sites);
    std::string csv = "sector,dimension,n_components,largest\n";
    for (const auto& s : rep.sectors) {
        const std::size_t largest =
            s.size_histogram.empty() ? 0 : s.size_histogram.rbegin()->first;
        csv += std::to_string(s.sector) + "," + std::to_string(s.dimension) + "," +
               std::to_string(s.n_components) + "," + std::to_string(largest) + "\n";
    }
    sink.write(sink.tag + ".csv", csv);
}

void check_reconstruction_size(const RunConfig& cfg, int n_samples) {
    if (cfg.n_sites > 12)
        throw ConfigError("density reconstruction needs N <= 12");
    const double bytes = static_cast<double>(n_samples) * std::pow(4.0, cfg.n_sites) * 16.0 *
                         (cfg.n_batches + 1);
    if (bytes > 1.5e9)
        throw ResourceError("density series would need " + std::to_string(bytes / 1e9) +
                            " GB; reduce n_points, n_batches, or N");
}

void run_negativity(const RunConfig& cfg, OutputSink& sink) {
    check_reconstruction_size(cfg, cfg.grid.n_points);
    std::vector<int> idx(cfg.grid.n_points);
    for (int k = 0; k < cfg.grid.n_points; ++k) idx[k] = k;
    JumpOptions opt;
    opt.dt = cfg.dt;
    const DensitySeries ds =
        run_quantum_jumps_density(cfg.effective_model(), PureState::all_up(cfg.n_sites), cfg.grid,
                                  cfg.n_traj, cfg.seed, idx, cfg.n_batches, opt);
    const Bipartition half = Bipartition::half(cfg.n_sites);
    const auto t = cfg.grid.times();
    std::string csv = "t,EN\n";
    for (int k = 0; k < cfg.grid.n_points; ++k)
        csv += format_double(t[k]) + "," + format_double(log_negativity(ds.combined(k), half)) +
               "\n";
    sink.write(sink.tag + ".csv", csv);
}

void run_witness(const RunConfig& cfg, OutputSink& sink) {
    check_reconstruction_size(cfg, 1);
    JumpOptions opt;
    opt.dt = cfg.dt;
    const DensitySeries ds =
        run_quantum_jumps_density(cfg.effective_model(), PureState::all_up(cfg.n_sites), cfg.grid,
                                  cfg.n_traj, cfg.seed, {cfg.grid.n_points - 1}, cfg.n_batches,
                                  opt);
    const WitnessReport rep = witness(ds.combined(0), cfg.rule);
    json out;
    out["t"] = cfg.grid.t_end;
    out["dark_residual"] = rep.dark_residual;
    out["nadj"] = rep.nadj;
    out["verdict"] = witness_verdict_name(rep.verdict);
    sink.write(sink.tag + ".json", dump_json(out));
}

void run_dtwa_cmd(const RunConfig& cfg, OutputSink& sink) {
    const bool full_coef = cfg.dtwa.count("p0") && cfg.dtwa.count("alpha") &&
                           cfg.dtwa.count("beta") && cfg.dtwa.count("gamma");
    DtwaParams p = full_coef ? DtwaParams{} : DtwaParams::for_rule(cfg.rule);
    auto pick = [&](const char* key, double& slot) {
        auto it = cfg.dtwa.find(key);
        if (it != cfg.dtwa.end()) slot = it->second;
    };
    pick("p0", p.p0);
    pick("alpha", p.alpha);
    pick("beta", p.beta);
    pick("gamma", p.gamma);
    double a_re = p.alpha0.real(), a_im = p.alpha0.imag();
    pick("alpha0_re", a_re);
    pick("alpha0_im", a_im);
    p.alpha0 = cplx(a_re, a_im);
    p.n_sites = cfg.n_sites;
    p.g = cfg.g;
    p.kappa = cfg.kappa;
    p.delta = cfg.delta;
    p.dt = cfg.dt;
    p.n_traj = cfg.n_traj;
    p.seed = cfg.seed;

    const auto res = run_dtwa(p, cfg.grid);
    sink.write(sink.tag + ".csv", trajectory_csv(res, cfg.observables));
    json out;
    out["p0"] = p.p0;
    out["alpha"] = p.alpha;
    out["beta"] = p.beta;
    out["gamma"] = p.gamma;
    out["alpha0_re"] = p.alpha0.real();
    out["alpha0_im"] = p.alpha0.imag();
    sink.write(sink.tag + ".json", dump_json(out));
}

void dispatch(const RunConfig& cfg, OutputSink& sink) {
    if (cfg.subcommand == "rates") return run_rates(cfg, sink);
    if (cfg.subcommand == "raman") return run_raman(cfg, sink);
    if (cfg.subcommand == "trajectories") return run_trajectories(cfg, sink);
    if (cfg.subcommand == "full-cavity") return run_full_cavity_cmd(cfg, sink);
    if (cfg.subcommand == "layers") return run_layers(cfg, sink);
    if (cfg.subcommand == "ode") return run_ode(cfg, sink);
    if (cfg.subcommand == "dark") return run_dark(cfg, sink);
    if (cfg.subcommand == "fragments") return run_fragments(cfg, sink);
    if (cfg.subcommand == "negativity") return run_negativity(cfg, sink);
    if (cfg.subcommand == "witness") return run_witness(cfg, sink);
    if (cfg.subcommand == "dtwa") return run_dtwa_cmd(cfg, sink);
    throw ConfigError("unknown subcommand \"" + cfg.subcommand + "\"");
}

} // namespace

const std::vector<std::string>& observable_names() {
    static const std::vector<std::string> names{"n",    "Sz",    "Sperp2",  "Nadj",
                                                "Ntri", "FdagF", "photons", "EN"};
    return names;
}

EffectiveModel RunConfig::effective_model() const {
    EffectiveModel m;
    m.rule = rule;
    m.gamma = gamma;
    m.chi = chi;
    m.gamma_loss = gamma_loss;
    m.gamma_deph_ind = gamma_deph_ind;
    m.gamma_deph_common = gamma_deph_common;
    m.v_nnn = v_nnn;
    return m;
}

FullCavityModel RunConfig::cavity_model() const {
    FullCavityModel m;
    m.rule = rule;
    m.g = g;
    m.kappa = kappa;
    m.delta = delta;
    m.n_max = n_max;
    m.rwa = rwa;
    return m;
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: root must be an object");
    check_keys(j, "",
               {"subcommand", "rule", "N", "model", "cavity", "raman", "grid", "n_traj", "seed",
                "dt", "k_max", "n_batches", "observables", "dtwa", "out_prefix"});

    RunConfig c;
    if (!j.contains("subcommand")) throw ConfigError("config: missing required key \"subcommand\"");
    c.subcommand = get_str(j["subcommand"], "subcommand");
    if (!known_subcommand(c.subcommand))
        throw ConfigError("config field \"subcommand\": unknown subcommand \"" + c.subcommand +
                          "\"");

    if (!j.contains("rule")) throw ConfigError("config: missing required key \"rule\"");
    c.rule = parse_rule(j["rule"]);

    if (!j.contains("N")) throw ConfigError("config: missing required key \"N\"");
    c.n_sites = static_cast<int>(get_int(j["N"], "N"));
    if (c.n_sites < 1) throw ConfigError("config field \"N\": must be positive");

    if (j.contains("model")) {
        const auto& m = j["model"];
        if (!m.is_object()) bad_field("model", "an object", m);
        check_keys(m, "model",
                   {"gamma", "chi", "gamma_loss", "gamma_deph_ind", "gamma_deph_common", "v_nnn"});
        if (m.contains("gamma")) c.gamma = get_num(m["gamma"], "model.gamma");
        if (m.contains("chi")) c.chi = get_num(m["chi"], "model.chi");
        if (m.contains("gamma_loss")) c.gamma_loss = get_num(m["gamma_loss"], "model.gamma_loss");
        if (m.contains("gamma_deph_ind"))
            c.gamma_deph_ind = get_num(m["gamma_deph_ind"], "model.gamma_deph_ind");
        if (m.contains("gamma_deph_common"))
            c.gamma_deph_common = get_num(m["gamma_deph_common"], "model.gamma_deph_common");
        if (m.contains("v_nnn")) c.v_nnn = get_num(m["v_nnn"], "model.v_nnn");
    }

    if (j.contains("cavity")) {
        const auto& v = j["cavity"];
        if (!v.is_object()) bad_field("cavity", "an object", v);
        check_keys(v, "cavity", {"g", "kappa", "delta", "n_max", "rwa"});
        if (v.contains("g")) c.g = get_num(v["g"], "cavity.g");
        if (v.contains("kappa")) c.kappa = get_num(v["kappa"], "cavity.kappa");
        if (v.contains("delta")) c.delta = get_num(v["delta"], "cavity.delta");
        if (v.contains("n_max")) c.n_max = static_cast<int>(get_int(v["n_max"], "cavity.n_max"));
        if (v.contains("rwa")) c.rwa = get_bool(v["rwa"], "cavity.rwa");
    }

    if (j.contains("raman")) {
        const auto& r = j["raman"];
        if (!r.is_object()) bad_field("raman", "an object", r);
        check_keys(r, "raman", {"g", "omega", "delta_e", "gamma_e", "kappa"});
        c.has_raman = true;
        if (r.contains("g")) c.raman.g = get_num(r["g"], "raman.g");
        if (r.contains("omega")) c.raman.omega = get_num(r["omega"], "raman.omega");
        if (r.contains("delta_e")) c.raman.delta_e = get_num(r["delta_e"], "raman.delta_e");
        if (r.contains("gamma_e")) c.raman.gamma_e = get_num(r["gamma_e"], "raman.gamma_e");
        if (r.contains("kappa")) c.raman.kappa = get_num(r["kappa"], "raman.kappa");
    }

    c.grid.t_start = 0.0;
    c.grid.t_end = 10.0;
    c.grid.n_points = 101;
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        if (!g.is_object()) bad_field("grid", "an object", g);
        check_keys(g, "grid", {"t_start", "t_end", "n_points"});
        if (g.contains("t_start")) c.grid.t_start = get_num(g["t_start"], "grid.t_start");
        if (g.contains("t_end")) c.grid.t_end = get_num(g["t_end"], "grid.t_end");
        if (g.contains("n_points"))
            c.grid.n_points = static_cast<int>(get_int(g["n_points"], "grid.n_points"));
    }

    if (j.contains("n_traj")) {
        c.n_traj = static_cast<int>(get_int(j["n_traj"], "n_traj"));
        if (c.n_traj < 1) throw ConfigError("config field \"n_traj\": must be positive");
    }
    if (j.contains("seed")) {
        const auto& s = j["seed"];
        if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() &&
                                       s.get<std::int64_t>() < 0))
            bad_field("seed", "a nonnegative integer", s);
        c.seed = s.get<std::uint64_t>();
    }
    if (j.contains("dt")) {
        c.dt = get_num(j["dt"], "dt");
        if (c.dt < 0) throw ConfigError("config field \"dt\": must be nonnegative");
    }
    c.k_max = c.n_sites;
    if (j.contains("k_max")) {
        c.k_max = static_cast<int>(get_int(j["k_max"], "k_max"));
        if (c.k_max < 0) throw ConfigError("config field \"k_max\": must be nonnegative");
    }
    if (j.contains("n_batches")) {
        c.n_batches = static_cast<int>(get_int(j["n_batches"], "n_batches"));
        if (c.n_batches < 1) throw ConfigError("config field \"n_batches\": must be positive");
    }
    if (j.contains("observables")) {
        const auto& o = j["observables"];
        if (!o.is_array()) bad_field("observables", "an array of names", o);
        for (std::size_t i = 0; i < o.size(); ++i) {
            const std::string name =
                get_str(o[i], "observables[" + std::to_string(i) + "]");
            const auto& known = observable_names();
            if (std::find(known.begin(), known.end(), name) == known.end())
                throw ConfigError("config field \"observables\": unknown observable \"" + name +
                                  "\"");
            c.observables.push_back(name);
        }
    }
    if (j.contains("dtwa")) {
        const auto& d = j["dtwa"];
        if (!d.is_object()) bad_field("dtwa", "an object", d);
        check_keys(d, "dtwa", {"p0", "alpha", "beta", "gamma", "alpha0_re", "alpha0_im"});
        for (auto it = d.begin(); it != d.end(); ++it)
            c.dtwa[it.key()] = get_num(it.value(), "dtwa." + it.key());
    }
    if (j.contains("out_prefix")) {
        c.out_prefix = get_str(j["out_prefix"], "out_prefix");
        if (c.out_prefix.empty() || c.out_prefix.find('/') != std::string::npos)
            throw ConfigError("config field \"out_prefix\": must be a bare file name stem");
    }
    return c;
}

std::string serialize_config(const RunConfig& c) {
    json j;
    j["subcommand"] = c.subcommand;
    j["N"] = c.n_sites;

    json rule;
    rule["kind"] = kind_name(c.rule.kind);
    rule["boundary"] = c.rule.boundary == Boundary::periodic ? "periodic" : "open";
    rule["fill_occupied"] = c.rule.open_fill_occupied;
    rule["w"] = c.rule.range;
    json table = json::array();
    for (std::uint8_t v : c.rule.table) table.push_back(static_cast<int>(v));
    rule["table"] = table;
    j["rule"] = rule;

    j["model"] = {{"gamma", c.gamma},
                  {"chi", c.chi},
                  {"gamma_loss", c.gamma_loss},
                  {"gamma_deph_ind", c.gamma_deph_ind},
                  {"gamma_deph_common", c.gamma_deph_common},
                  {"v_nnn", c.v_nnn}};
    j["cavity"] = {{"g", c.g},
                   {"kappa", c.kappa},
                   {"delta", c.delta},
                   {"n_max", c.n_max},
                   {"rwa", c.rwa}};
    if (c.has_raman)
        j["raman"] = {{"g", c.raman.g},
                      {"omega", c.raman.omega},
                      {"delta_e", c.raman.delta_e},
                      {"gamma_e", c.raman.gamma_e},
                      {"kappa", c.raman.kappa}};
    j["grid"] = {{"t_start", c.grid.t_start},
                 {"t_end", c.grid.t_end},
                 {"n_points", c.grid.n_points}};
    j["n_traj"] = c.n_traj;
    j["seed"] = c.seed;
    j["dt"] = c.dt;
    j["k_max"] = c.k_max;
    j["n_batches"] = c.n_batches;
    j["observables"] = c.observables;
    j["out_prefix"] = c.out_prefix;
    if (!c.dtwa.empty()) j["dtwa"] = c.dtwa;
    return dump_json(j);
}

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"simulation and analysis toolkit for constrained collective emission"};
    app.set_version_flag("--version", kToolkitVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed_val = 0;
    int threads = 0;
    app.add_option("-c,--config", config_path, "JSON run configuration")->expected(1);
    auto* seed_opt = app.add_option("--seed", seed_val, "override the config seed");
    app.add_option("--threads", threads, "worker thread cap (0 = library default)");
    app.add_option("--out-dir", out_dir, "directory for emitted files");
    for (const auto& [name, desc] : subcommand_table())
        app.add_subcommand(name, desc)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (config_path.empty()) throw ConfigError("--config is required");
        std::ifstream f(config_path, std::ios::binary);
        if (!f) throw ResourceError("cannot read config file \"" + config_path + "\"");
        std::ostringstream ss;
        ss << f.rdbuf();

        RunConfig cfg = parse_config(ss.str());
        cfg.subcommand = app.get_subcommands().front()->get_name();
        if (seed_opt->count() > 0) cfg.seed = seed_val;

#ifdef _OPENMP
        if (threads > 0) omp_set_num_threads(threads);
#else
        (void)threads;
#endif

        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw ResourceError("cannot create output directory \"" + out_dir + "\"");

        OutputSink sink;
        sink.dir = out_dir;
        sink.tag = cfg.out_prefix + "_" + cfg.subcommand;

        const auto t0 = std::chrono::steady_clock::now();
        dispatch(cfg, sink);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        json manifest;
        manifest["version"] = kToolkitVersion;
        manifest["config"] = json::parse(serialize_config(cfg));
        manifest["wall_clock_seconds"] = wall;
        json sums = json::object();
        for (const auto& [name, sum] : sink.sums) sums[name] = hex16(sum);
        manifest["checksums"] = sums;
        sink.write(sink.tag + ".manifest.json", dump_json(manifest), false);

        for (const auto& p : sink.written) std::cout << "wrote " << p << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::bad_alloc&) {
        std::cerr << "resource error: out of memory\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace kcs
