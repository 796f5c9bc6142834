#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "nmoc/nmoc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nmoc;

namespace {

constexpr int exit_ok = 0, exit_parameter = 1, exit_solver = 2, exit_validation = 3;

struct Common {
    std::string preset;
    std::string config;
    std::string out;
    std::size_t grid_points{0};
    double t_max{0.0};
    std::vector<std::string> overrides;
};

struct SweepAxis {
    std::string key;
    double lo{0.0}, hi{0.0};
    std::size_t n{1};
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--preset", c.preset, "built-in scenario: fig2 or fig3");
    cmd->add_option("--config", c.config, "scenario file");
    cmd->add_option("--out", c.out, "output directory (default: $NMOC_OUT or ./out)");
    cmd->add_option("--grid-points", c.grid_points, "number of fine time steps");
    cmd->add_option("--t-max", c.t_max, "end of the time window, units of 1/omega_m");
    cmd->add_option("--override", c.overrides, "section.key=value, repeatable");
}

std::vector<Scenario> scenarios(const Common& c) {
    std::vector<Scenario> list;
    if (!c.preset.empty() && !c.config.empty()) throw ParameterError("give either --preset or --config, not both");
    if (!c.preset.empty()) list = preset(c.preset);
    else if (!c.config.empty()) list = {load_scenario(c.config)};
    else throw ParameterError("no scenario: pass --preset or --config");
    for (auto& s : list) {
        for (const auto& o : c.overrides) apply_override(s, o);
        if (c.grid_points > 0) s.points = c.grid_points;
        if (c.t_max > 0.0) s.t_max = c.t_max;
        s.resolve();
    }
    return list;
}

fs::path output_root(const Common& c) {
    if (!c.out.empty()) return c.out;
    if (const char* env = std::getenv("NMOC_OUT")) return env;
    return "out";
}

/// Collects everything one command consumed and produced.
struct Manifest {
    json doc;
    fs::path dir;

    Manifest(const fs::path& root, const Scenario& s, const std::string& command) : dir(root / s.name) {
        fs::create_directories(dir);
        doc["command"] = command;
        doc["units"] = "frequencies in omega_m, times in 1/omega_m";
        json params = json::object();
        for (const auto& [k, v] : scenario_entries(s)) params[k] = v;
        doc["parameters"] = params;
        doc["derived"] = {{"Delta_c", CsvWriter::number(s.system.Delta_c())},
                          {"Delta_m", CsvWriter::number(s.system.Delta_m)},
                          {"q_init", CsvWriter::number(s.system.q_init)},
                          {"omega_m", CsvWriter::number(s.system.omega_m)}};
        doc["solver"] = json::object();
        doc["outputs"] = json::array();
    }

    fs::path file(const std::string& name) {
        doc["outputs"].push_back(name);
        return dir / name;
    }

    void solver(const std::string& key, double v) { doc["solver"][key] = CsvWriter::number(v); }
    void solver(const std::string& key, const std::string& v) { doc["solver"][key] = v; }

    void write() const {
        std::ofstream f(dir / "manifest.json");
        f << doc.dump(2) << '\n';
    }
};

TimeGrid classical_grid(const Scenario& s, Manifest& m) {
    const auto bound = detect(s.system, s.cavity);
    const double nu = cavity_frame(s.system, s.cavity, bound);
    const TimeGrid g = scenario_grid(s, default_step(s.system, nu));
    m.solver("frame", nu);
    m.solver("dt", g.dt);
    m.solver("steps", static_cast<double>(g.size - 1));
    m.solver("memory_horizon_steps", static_cast<double>(horizon_steps(s, g.dt)));
    return g;
}

void cmd_kernels(const Scenario& s, Manifest& m) {
    const TimeGrid g = s.points > 0 ? TimeGrid{s.t_max / static_cast<double>(s.points), s.points + 1}
                                    : TimeGrid::covering(s.t_max, s.dt > 0.0 ? s.dt : s.t_max / 5000.0);
    m.solver("dt", g.dt);
    const auto fc = cavity_kernel(s.cavity, s.system.omega_0, g);
    const auto fm = mechanical_kernel(s.mechanical, g);
    CsvWriter csv(m.file("kernels.csv").string(), {"t", "re_f_c", "im_f_c", "re_f_m", "im_f_m"});
    for (std::size_t i = 0; i < g.size; ++i)
        csv.row(std::vector<double>{g.t(i), fc[i].real(), fc[i].imag(), fm[i].real(), fm[i].imag()});
}

void cmd_bound_state(const Scenario& s, Manifest& m) {
    const auto b = detect(s.system, s.cavity);
    CsvWriter csv(m.file("bound-state.csv").string(),
                  {"exists", "status", "omega_r", "residue", "threshold_margin", "pole_residual", "eta_threshold"});
    const char* status = b.status == BoundStatus::present ? "present"
                         : b.status == BoundStatus::absent ? "absent"
                                                           : "indeterminate";
    csv.row(std::vector<std::string>{b.exists ? "1" : "0", status, CsvWriter::number(b.omega_r),
                                     CsvWriter::number(b.residue), CsvWriter::number(b.threshold_margin),
                                     CsvWriter::number(b.pole_residual),
                                     CsvWriter::number(threshold_eta(s.system.omega_c, s.cavity))});
}

void write_map(const std::vector<MapCell>& cells, const fs::path& path) {
    CsvWriter csv(path.string(), {"eta_c", "cutoff_c", "alpha_max", "threshold_margin", "exists", "error"});
    for (const auto& c : cells)
        csv.row(std::vector<std::string>{CsvWriter::number(c.eta_c), CsvWriter::number(c.cutoff_c),
                                         CsvWriter::number(c.alpha_max), CsvWriter::number(c.threshold_margin),
                                         c.exists ? "1" : "0", "\"" + c.error + "\""});
}

int cmd_threshold_map(const Scenario& s, Manifest& m) {
    SystemParams sys = s.system;
    sys.E = s.map_drive;
    m.solver("map_drive", s.map_drive);
    m.solver("late_window", "final 10% of map.t_max");
    const auto cells = threshold_map(sys, s.cavity, s.map_eta_min, s.map_eta_max, s.map_eta_points, s.map_cutoff_min,
                                     s.map_cutoff_max, s.map_cutoff_points, s.map_t_max);
    write_map(cells, m.file("threshold-map.csv"));
    return exit_ok;
}

void cmd_classical(const Scenario& s, Manifest& m) {
    const TimeGrid g = classical_grid(s, m);
    SolverOptions opt;
    opt.dt = g.dt;
    opt.memory_horizon = horizon_steps(s, g.dt);
    const auto direct = direct_orbit(s.system, s.cavity, s.mechanical, g, opt);
    const auto pert = perturbative_orbit(s.system, s.cavity, s.mechanical, g, opt);
    {
        CsvWriter csv(m.file("classical.csv").string(), {"t", "re_alpha", "im_alpha", "q", "p"});
        for (std::size_t i = 0; i < g.size; ++i)
            csv.row(std::vector<double>{g.t(i), direct.alpha0[i].real(), direct.alpha0[i].imag(), direct.q0[i],
                                        direct.p0[i]});
    }
    {
        CsvWriter csv(m.file("classical_perturbative.csv").string(),
                      {"t", "re_alpha0", "im_alpha0", "q0", "p0", "re_alpha1", "im_alpha1", "q1"});
        for (std::size_t i = 0; i < g.size; ++i)
            csv.row(std::vector<double>{g.t(i), pert.alpha0[i].real(), pert.alpha0[i].imag(), pert.q0[i], pert.p0[i],
                                        pert.alpha1[i].real(), pert.alpha1[i].imag(), pert.q1[i]});
    }
    const auto det = effective_detuning(s.system, pert);
    m.doc["results"]["effective_detuning"] = CsvWriter::number(det.value);
    m.doc["results"]["q1_settled"] = det.settled;
    if (!det.settled) std::cerr << s.name << ": warning: q1 has not settled (drift " << det.drift << ")\n";
}

CovarianceRuns covariance_runs(const Scenario& s, Manifest& m) {
    auto r = run_covariance(s);
    for (const auto& [k, v] : r.settings) m.solver(k, v);
    return r;
}

void write_covariance(const CovarianceSeries& c, const fs::path& path) {
    CsvWriter csv(path.string(), {"t", "V11", "V12", "V13", "V14", "V22", "V23", "V24", "V33", "V34", "V44",
                                  "min_symplectic_eig"});
    for (std::size_t k = 0; k < c.t.size(); ++k) {
        std::vector<double> row{c.t[k]};
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) row.push_back(c.V[k](i, j));
        row.push_back(c.min_eig[k]);
        csv.row(row);
    }
}

void cmd_covariance(const Scenario& s, Manifest& m) {
    const auto r = covariance_runs(s, m);
    write_covariance(r.main, m.file("covariance.csv"));
    m.doc["results"]["worst_min_eig"] = CsvWriter::number(r.main.worst_min_eig());
    if (r.has_window) write_covariance(r.window, m.file("covariance_window.csv"));
}

void write_entanglement(const EntanglementSeries& e, const fs::path& path) {
    CsvWriter csv(path.string(), {"t", "s_minus", "E_p", "E_N", "is_entangled"});
    for (std::size_t i = 0; i < e.t.size(); ++i)
        csv.row(std::vector<double>{e.t[i], e.s_minus[i], e.E_p[i], e.E_N[i], e.entangled(i) ? 1.0 : 0.0});
}

void cmd_entanglement(const Scenario& s, Manifest& m) {
    const auto r = covariance_runs(s, m);
    const auto e = entanglement_series(r.main);
    write_entanglement(e, m.file("entanglement.csv"));
    json crossings = json::array();
    for (double t : e.crossings) crossings.push_back(CsvWriter::number(t));
    m.doc["results"]["E_p_zero_crossings"] = crossings;
    if (r.has_window) {
        const auto w = entanglement_series(r.window);
        write_entanglement(w, m.file("entanglement_window.csv"));
        double best = -std::numeric_limits<double>::infinity();
        for (double v : w.E_p) best = std::max(best, v);
        m.doc["results"]["window_max_E_p"] = CsvWriter::number(best);
    }
}

int cmd_validate(const Scenario& s, Manifest& m) {
    const auto checks = run_validation(s);
    CsvWriter csv(m.file("validation.csv").string(), {"check", "value", "tolerance", "passed", "note"});
    bool all = true;
    for (const auto& c : checks) {
        csv.row(std::vector<std::string>{c.name, CsvWriter::number(c.value), CsvWriter::number(c.tolerance),
                                         c.passed ? "1" : "0", "\"" + c.note + "\""});
        std::cout << (c.passed ? "PASS " : "FAIL ") << s.name << " " << c.name << " = " << c.value
                  << " (tolerance " << c.tolerance << ")\n";
        all = all && c.passed;
    }
    return all ? exit_ok : exit_validation;
}

SweepAxis parse_axis(const std::string& text) {
    // key=lo:hi:n
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParameterError("--axis '" + text + "': expected key=lo:hi:n");
    SweepAxis a;
    a.key = text.substr(0, eq);
    std::string rest = text.substr(eq + 1);
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= rest.size(); ++i)
        if (i == rest.size() || rest[i] == ':') {
            parts.push_back(rest.substr(start, i - start));
            start = i + 1;
        }
    if (parts.size() != 3) throw ParameterError("--axis '" + text + "': expected key=lo:hi:n");
    a.lo = detail::parse_number(a.key, parts[0]);
    a.hi = detail::parse_number(a.key, parts[1]);
    a.n = detail::parse_count(a.key, parts[2]);
    if (a.n < 1) throw ParameterError("--axis '" + text + "': need at least one point");
    if (a.n == 1 && a.hi != a.lo) throw ParameterError("--axis '" + text + "': a single point needs lo == hi");
    return a;
}

int cmd_sweep(const Scenario& base, Manifest& m, const std::vector<std::string>& axes_text, double en_time) {
    if (axes_text.empty() || axes_text.size() > 2) throw ParameterError("sweep: give one or two --axis options");
    std::vector<SweepAxis> axes;
    for (const auto& t : axes_text) axes.push_back(parse_axis(t));
    {
        Scenario probe = base;
        for (const auto& a : axes) apply_override(probe, a.key + "=" + CsvWriter::number(a.lo));
    }
    std::vector<std::string> header;
    for (const auto& a : axes) header.push_back(a.key);
    for (const char* h : {"alpha_max", "threshold_margin", "exists"}) header.emplace_back(h);
    if (en_time > 0.0) {
        header.emplace_back("E_N");
        m.solver("sweep_E_N_time", en_time);
    }
    header.emplace_back("error");
    CsvWriter csv(m.file("sweep.csv").string(), header);
    const std::size_t n0 = axes[0].n, n1 = axes.size() > 1 ? axes[1].n : 1;
    auto value = [](const SweepAxis& a, std::size_t i) {
        return a.n == 1 ? a.lo : a.lo + (a.hi - a.lo) * static_cast<double>(i) / static_cast<double>(a.n - 1);
    };
    struct Cell {
        std::vector<std::string> keys;
        double alpha_max{std::nan("")}, margin{std::nan("")}, en{std::nan("")};
        bool exists{false};
        std::string error;
    };
    std::vector<Cell> cells(n0 * n1);
    parallel_for(cells.size(), [&](std::size_t k) {
        Cell& c = cells[k];
        const std::size_t idx[2] = {k % n0, k / n0};
        Scenario s = base;
        for (std::size_t a = 0; a < axes.size(); ++a) c.keys.push_back(CsvWriter::number(value(axes[a], idx[a])));
        try {
            for (std::size_t a = 0; a < axes.size(); ++a) apply_override(s, axes[a].key + "=" + c.keys[a]);
            s.resolve();
            const auto b = detect(s.system, s.cavity);
            c.margin = b.threshold_margin;
            c.exists = b.exists;
            c.alpha_max = late_alpha_max(s.system, s.cavity, s.map_t_max);
            if (en_time > 0.0) {
                s.t_max = en_time;
                const auto e = entanglement_series(run_covariance(s, false).main);
                c.en = e.E_N.back();
            }
        } catch (const std::exception& e) {
            c.error = e.what();
        }
    });
    for (const auto& c : cells) {
        std::vector<std::string> row = c.keys;
        row.push_back(CsvWriter::number(c.alpha_max));
        row.push_back(CsvWriter::number(c.margin));
        row.push_back(c.exists ? "1" : "0");
        if (en_time > 0.0) row.push_back(CsvWriter::number(c.en));
        row.push_back("\"" + c.error + "\"");
        csv.row(row);
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-Markovian optomechanics: classical orbits, bound states, covariance and entanglement"};
    app.require_subcommand(1);
    Common common;
    std::string kind;
    std::vector<std::string> axes;
    double en_time = 0.0;

    const std::vector<std::string> names{"kernels", "bound-state", "threshold-map", "classical",
                                         "covariance", "entanglement", "validate"};
    const std::vector<std::string> blurbs{"tabulate f_c, f_m and thermal kernels", "bound-state pole and residue",
                                          "threshold margin over (eta, cutoff)", "classical orbit, full and perturbative",
                                          "covariance matrix series", "E_p and E_N series",
                                          "internal consistency checks"};
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& n = names[i];
        auto* c = app.add_subcommand(n, blurbs[i]);
        add_common(c, common);
        subs.push_back(c);
    }
    auto* sweep = app.add_subcommand("sweep", "scan one or two scenario keys");
    add_common(sweep, common);
    sweep->add_option("--axis", axes, "section.key=lo:hi:n")->required();
    sweep->add_option("--en-time", en_time, "also report E_N at this time");
    auto* run = app.add_subcommand("run", "run one kind by name");
    add_common(run, common);
    run->add_option("--kind", kind, "kind to run")->required()->check(CLI::IsMember(names));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_parameter;
    }

    std::string command;
    for (auto* c : app.get_subcommands()) command = c->get_name();
    if (command == "run") command = kind;

    try {
        std::vector<Scenario> list;
        if (command == "validate" && common.preset.empty() && common.config.empty()) list = preset("fig2");
        else list = scenarios(common);
        const fs::path root = output_root(common);
        int status = exit_ok;
        for (const auto& s : list) {
            Manifest m(root, s, command);
            int rc = exit_ok;
            if (command == "kernels") cmd_kernels(s, m);
            else if (command == "bound-state") cmd_bound_state(s, m);
            else if (command == "threshold-map") rc = cmd_threshold_map(s, m);
            else if (command == "classical") cmd_classical(s, m);
            else if (command == "covariance") cmd_covariance(s, m);
            else if (command == "entanglement") cmd_entanglement(s, m);
            else if (command == "validate") rc = cmd_validate(s, m);
            else if (command == "sweep") rc = cmd_sweep(s, m, axes, en_time);
            m.write();
            std::cout << s.name << ": wrote " << m.dir.string() << "\n";
            status = std::max(status, rc);
        }
        return status;
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return exit_parameter;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return exit_solver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_solver;
    }
}
