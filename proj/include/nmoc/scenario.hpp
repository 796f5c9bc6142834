#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nmoc/fluctuations.hpp"
#include "nmoc/params.hpp"
#include "nmoc/spectral.hpp"

namespace nmoc {

/// Everything a run consumes. Frequencies in units of omega_m.
struct Scenario {
    std::string name{"custom"};
    SystemParams system;
    bool link_q{true};  // q(0) = g0 |alpha(0)|^2 / omega_m
    SpectralParams cavity{0.0, 1.0, 1.0, BathKind::cavity};
    SpectralParams mechanical{0.0, 1.0, 1.0, BathKind::mechanical};
    double beta_c{std::numeric_limits<double>::infinity()};
    double beta_m{std::numeric_limits<double>::infinity()};

    double t_max{50.0};
    double dt{0.0};           // 0 selects the default step
    std::size_t points{0};    // fine steps; overrides dt when nonzero
    double horizon{0.0};      // memory horizon in time units; 0 keeps the full history

    std::size_t stride{4};
    std::array<double, 4> V0{0.5, 0.5, 0.5, 0.5};
    double window_begin{0.0}, window_end{0.0};  // long-time covariance window; empty when end <= begin
    double window_dt{0.05};
    std::size_t window_stride{2};

    double map_drive{10.0};
    double map_eta_min{0.0}, map_eta_max{0.1};
    std::size_t map_eta_points{21};
    double map_cutoff_min{200.0}, map_cutoff_max{2000.0};
    std::size_t map_cutoff_points{10};
    double map_t_max{200.0};

    /// Fills the derived quantities: renormalized Delta_m and the linked displacement.
    void resolve() {
        cavity.kind = BathKind::cavity;
        mechanical.kind = BathKind::mechanical;
        cavity.validate();
        mechanical.validate();
        system.Delta_m = SystemParams::renormalized_mechanical(system.omega_m, mechanical);
        if (link_q) system.link_displacement();
        require(t_max > 0.0 && std::isfinite(t_max), "grid: t_max must be positive");
        require(dt >= 0.0 && horizon >= 0.0, "grid: dt and horizon must be nonnegative");
        require(beta_c > 0.0 && beta_m > 0.0, "baths: beta must be positive (inf for vacuum)");
        require(stride >= 1 && window_stride >= 1, "covariance: stride must be positive");
        require(window_dt > 0.0, "covariance: window_dt must be positive");
        require(map_eta_points >= 2 && map_cutoff_points >= 2, "map: need at least 2 points per axis");
        require(map_cutoff_min > 0.0 && map_eta_min >= 0.0, "map: ranges must be positive");
        system.validate(mechanical);
    }

    [[nodiscard]] CovarianceSetup covariance_setup() const {
        CovarianceSetup s;
        s.sys = system;
        s.pc = cavity;
        s.pm = mechanical;
        s.beta_c = beta_c;
        s.beta_m = beta_m;
        s.V0 = RealMat4::Zero();
        for (int i = 0; i < 4; ++i) s.V0(i, i) = V0[i];
        return s;
    }
};

namespace detail {

inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_number(const std::string& key, const std::string& text) {
    std::string t = text;
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
    if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ParameterError(key + ": not a number: '" + text + "'");
    }
    if (used != t.size()) throw ParameterError(key + ": trailing characters in '" + text + "'");
    return v;
}

inline std::size_t parse_count(const std::string& key, const std::string& text) {
    const double v = parse_number(key, text);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e12) throw ParameterError(key + ": expected a nonnegative integer");
    return static_cast<std::size_t>(v);
}

/// One schema entry: a getter for serialization and a setter for parsing.
struct Field {
    std::string key;  // section.name
    bool required;
    std::function<std::string(const Scenario&)> get;
    std::function<void(Scenario&, const std::string&)> set;
};

inline std::vector<Field> schema() {
    std::vector<Field> f;
    auto num = [&f](std::string key, bool required, double Scenario::*m) {
        f.push_back({key, required, [m](const Scenario& s) { return format_number(s.*m); },
                     [m, key](Scenario& s, const std::string& v) { s.*m = parse_number(key, v); }});
    };
    auto count = [&f](std::string key, bool required, std::size_t Scenario::*m) {
        f.push_back({key, required, [m](const Scenario& s) { return std::to_string(s.*m); },
                     [m, key](Scenario& s, const std::string& v) { s.*m = parse_count(key, v); }});
    };
    auto sys = [&f](std::string key, double SystemParams::*m) {
        f.push_back({key, true, [m](const Scenario& s) { return format_number(s.system.*m); },
                     [m, key](Scenario& s, const std::string& v) { s.system.*m = parse_number(key, v); }});
    };
    auto bath = [&f](std::string key, SpectralParams Scenario::*b, double SpectralParams::*m) {
        f.push_back({key, true, [b, m](const Scenario& s) { return format_number((s.*b).*m); },
                     [b, m, key](Scenario& s, const std::string& v) { (s.*b).*m = parse_number(key, v); }});
    };
    f.push_back({"run.name", false, [](const Scenario& s) { return s.name; },
                 [](Scenario& s, const std::string& v) { s.name = v; }});
    sys("system.omega_c", &SystemParams::omega_c);
    sys("system.omega_0", &SystemParams::omega_0);
    sys("system.g0", &SystemParams::g0);
    sys("system.E", &SystemParams::E);
    f.push_back({"system.alpha_re", true, [](const Scenario& s) { return format_number(s.system.alpha_init.real()); },
                 [](Scenario& s, const std::string& v) {
                     s.system.alpha_init.real(parse_number("system.alpha_re", v));
                 }});
    f.push_back({"system.alpha_im", true, [](const Scenario& s) { return format_number(s.system.alpha_init.imag()); },
                 [](Scenario& s, const std::string& v) {
                     s.system.alpha_init.imag(parse_number("system.alpha_im", v));
                 }});
    f.push_back({"system.q_init", true,
                 [](const Scenario& s) { return s.link_q ? std::string("linked") : format_number(s.system.q_init); },
                 [](Scenario& s, const std::string& v) {
                     s.link_q = v == "linked";
                     if (!s.link_q) s.system.q_init = parse_number("system.q_init", v);
                 }});
    sys("system.p_init", &SystemParams::p_init);
    bath("cavity_bath.eta", &Scenario::cavity, &SpectralParams::eta);
    bath("cavity_bath.cutoff", &Scenario::cavity, &SpectralParams::cutoff);
    bath("cavity_bath.exponent", &Scenario::cavity, &SpectralParams::exponent);
    num("cavity_bath.beta", false, &Scenario::beta_c);
    bath("mechanical_bath.eta", &Scenario::mechanical, &SpectralParams::eta);
    bath("mechanical_bath.cutoff", &Scenario::mechanical, &SpectralParams::cutoff);
    bath("mechanical_bath.exponent", &Scenario::mechanical, &SpectralParams::exponent);
    num("mechanical_bath.beta", false, &Scenario::beta_m);
    num("grid.t_max", false, &Scenario::t_max);
    num("grid.dt", false, &Scenario::dt);
    count("grid.points", false, &Scenario::points);
    num("grid.horizon", false, &Scenario::horizon);
    count("covariance.stride", false, &Scenario::stride);
    f.push_back({"covariance.V0", false,
                 [](const Scenario& s) {
                     std::string out;
                     for (int i = 0; i < 4; ++i) out += (i ? " " : "") + format_number(s.V0[i]);
                     return out;
                 },
                 [](Scenario& s, const std::string& v) {
                     std::istringstream in(v);
                     std::string tok;
                     int i = 0;
                     while (in >> tok) {
                         if (i >= 4) throw ParameterError("covariance.V0: expected 4 diagonal entries");
                         s.V0[i++] = parse_number("covariance.V0", tok);
                     }
                     if (i != 4) throw ParameterError("covariance.V0: expected 4 diagonal entries");
                 }});
    num("covariance.window_begin", false, &Scenario::window_begin);
    num("covariance.window_end", false, &Scenario::window_end);
    num("covariance.window_dt", false, &Scenario::window_dt);
    count("covariance.window_stride", false, &Scenario::window_stride);
    num("map.drive", false, &Scenario::map_drive);
    num("map.eta_min", false, &Scenario::map_eta_min);
    num("map.eta_max", false, &Scenario::map_eta_max);
    count("map.eta_points", false, &Scenario::map_eta_points);
    num("map.cutoff_min", false, &Scenario::map_cutoff_min);
    num("map.cutoff_max", false, &Scenario::map_cutoff_max);
    count("map.cutoff_points", false, &Scenario::map_cutoff_points);
    num("map.t_max", false, &Scenario::map_t_max);
    return f;
}

inline const Field* find_field(const std::vector<Field>& fields, const std::string& key) {
    for (const auto& f : fields)
        if (f.key == key) return &f;
    return nullptr;
}

}  // namespace detail

/// Applies `section.key=value`.
inline void apply_override(Scenario& s, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ParameterError("override '" + assignment + "': expected key=value");
    const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
    const auto fields = detail::schema();
    const auto* f = detail::find_field(fields, key);
    if (!f) throw ParameterError("override: unknown key '" + key + "'");
    f->set(s, value);
}

/// Strict parse: unknown sections or keys are errors, and all missing required keys are listed.
inline Scenario parse_scenario(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    const auto fields = detail::schema();
    Scenario s;
    std::vector<std::string> unknown;
    std::map<std::string, bool> seen;
    for (const auto& section : tree) {
        if (section.second.empty() && !section.second.data().empty()) {
            unknown.push_back(section.first + " (outside any section)");
            continue;
        }
        for (const auto& kv : section.second) {
            const std::string key = section.first + "." + kv.first;
            const auto* f = detail::find_field(fields, key);
            if (!f) {
                unknown.push_back(key);
                continue;
            }
            f->set(s, kv.second.data());
            seen[key] = true;
        }
    }
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ParameterError(msg);
    }
    std::string missing;
    for (const auto& f : fields)
        if (f.required && !seen.count(f.key)) missing += " " + f.key;
    if (!missing.empty()) throw ParameterError("config: missing required keys:" + missing);
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("config: cannot open " + path);
    return parse_scenario(in);
}

/// Config text that parses back to the same scenario.
inline std::string serialize_scenario(const Scenario& s) {
    const auto fields = detail::schema();
    std::ostringstream out;
    std::string current;
    for (const auto& f : fields) {
        const auto dot = f.key.find('.');
        const std::string section = f.key.substr(0, dot);
        if (section != current) {
            out << (current.empty() ? "" : "\n") << "[" << section << "]\n";
            current = section;
        }
        out << f.key.substr(dot + 1) << " = " << f.get(s) << "\n";
    }
    return out.str();
}

/// Resolved key/value pairs, for the manifest.
inline std::vector<std::pair<std::string, std::string>> scenario_entries(const Scenario& s) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : detail::schema()) out.emplace_back(f.key, f.get(s));
    return out;
}

/// Fig. 2 caption parameters.
inline Scenario preset_fig2() {
    Scenario s;
    s.name = "fig2";
    s.system.omega_c = 100.0;
    s.system.omega_0 = 98.0;
    s.system.g0 = 6e-4;
    s.system.E = 0.0;
    s.system.alpha_init = 120.0;
    s.system.p_init = 0.0;
    s.link_q = true;
    s.cavity = {0.05, 1100.0, 3.0, BathKind::cavity};
    s.mechanical = {0.03, 11.0, 1.0, BathKind::mechanical};
    s.t_max = 50.0;
    s.map_drive = 10.0;
    return s;
}

/// Fig. 3: Fig. 2 with a thermal mirror bath, in the s_m = 1 and s_m = 3 variants.
inline std::vector<Scenario> preset_fig3() {
    Scenario a = preset_fig2();
    a.name = "fig3_sm1";
    a.beta_m = 2.5e-2;
    a.V0 = {0.5, 0.5, 40.5, 40.5};
    a.points = 2000;
    a.window_begin = 1035.0;
    a.window_end = 1045.0;
    Scenario b = a;
    b.name = "fig3_sm3";
    b.mechanical = {0.8, 5.0, 3.0, BathKind::mechanical};
    return {a, b};
}

/// Built-in scenarios, resolved.
inline std::vector<Scenario> preset(const std::string& name) {
    std::vector<Scenario> out;
    if (name == "fig2") out = {preset_fig2()};
    else if (name == "fig3") out = preset_fig3();
    else throw ParameterError("unknown preset '" + name + "' (expected fig2 or fig3)");
    for (auto& s : out) s.resolve();
    return out;
}

/// Fine grid of a scenario: `points` steps when set, else dt, else the default step.
inline TimeGrid scenario_grid(const Scenario& s, double default_dt) {
    if (s.points > 0) return TimeGrid{s.t_max / static_cast<double>(s.points), s.points + 1};
    return TimeGrid::covering(s.t_max, s.dt > 0.0 ? s.dt : default_dt);
}

inline std::size_t horizon_steps(const Scenario& s, double dt) {
    return s.horizon > 0.0 ? static_cast<std::size_t>(std::ceil(s.horizon / dt)) : 0;
}

}  // namespace nmoc
