// One PASS/FAIL line per acceptance criterion.
//
// Usage: acceptance [--expect-red NAME]...
// Exit status is 0 when the failing criteria are exactly the ones named with --expect-red.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nmoc/nmoc.hpp"

using namespace nmoc;

namespace {

struct Outcome {
    bool passed{false};
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// int_0^inf u^s e^{-u} {cos, sin}(k u) du by double-exponential Fourier quadrature.
struct FourierOracle {
    boost::math::quadrature::ooura_fourier_sin<double> sin_rule{1e-13};
    boost::math::quadrature::ooura_fourier_cos<double> cos_rule{1e-13};
    boost::math::quadrature::exp_sinh<double> half_line;

    Complex transform(double s, double k) {
        auto g = [s](double u) { return u > 700.0 ? 0.0 : std::pow(u, s) * std::exp(-u); };
        if (k == 0.0) return {half_line.integrate(g), 0.0};
        return {cos_rule.integrate(g, k).first, -sin_rule.integrate(g, k).first};
    }
};

Outcome kernel_closed_forms() {
    const std::vector<SpectralParams> sets{{0.05, 1100, 3}, {0.1, 1000, 1}, {0.03, 11, 1},
                                           {0.8, 5, 3},     {0.02, 200, 1}, {0.3, 50, 3}};
    const double omega0 = 98.0;
    std::vector<double> times;
    for (int i = 0; i <= 200; ++i) times.push_back(0.5 * i);
    for (int i = 0; i < 200; ++i) times.push_back(1e-5 * std::pow(1e7, i / 199.0));
    FourierOracle oracle;
    double worst = 0.0, slowest = 0.0;
    for (auto p : sets) {
        SpectralParams pm = p;
        pm.kind = BathKind::mechanical;
        const auto t0 = std::chrono::steady_clock::now();
        const TimeGrid grid = TimeGrid::covering(100.0, 1e-3);
        const auto fc = cavity_kernel(p, omega0, grid);
        const auto fm = mechanical_kernel(pm, grid);
        slowest = std::max(slowest, seconds_since(t0));
        (void)fc;
        (void)fm;
        double dc = 0.0, dm = 0.0, sc = 0.0, sm = 0.0;
        const double scale = p.eta * p.cutoff * p.cutoff;
        for (double t : times) {
            const Complex tr = oracle.transform(p.exponent, p.cutoff * t);
            const Complex rc = scale * std::polar(1.0, omega0 * t) * tr;
            const double rm = -scale * tr.imag();
            dc = std::max(dc, std::abs(cavity_kernel_value(p, omega0, t) - rc));
            dm = std::max(dm, std::abs(mechanical_kernel_value(pm, t) - rm));
            sc = std::max(sc, std::abs(rc));
            sm = std::max(sm, std::abs(rm));
        }
        worst = std::max({worst, dc / sc, dm / sm});
    }
    return {worst <= 1e-6 && slowest < 1.0,
            "6 sets, worst sup error / sup|f| " + fmt("%.2e", worst) + " (tol 1e-6), slowest tabulation of 1e5 points " +
                fmt("%.3f", slowest) + " s"};
}

// Smallest eta_c that detect() classifies as having a bound state, by bisection on its verdict.
double detected_threshold(SystemParams sys, SpectralParams pc) {
    const double guess = threshold_eta(sys.omega_c, pc);
    double lo = 0.5 * guess, hi = 2.0 * guess;
    for (int i = 0; i < 60 && hi - lo > 1e-12 * guess; ++i) {
        pc.eta = 0.5 * (lo + hi);
        const auto b = detect(sys, pc);
        if (b.status == BoundStatus::indeterminate) return pc.eta;
        (b.exists ? hi : lo) = pc.eta;
    }
    return 0.5 * (lo + hi);
}

Outcome threshold_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario fig2 = preset("fig2").front();
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        SpectralParams pc = fig2.cavity;
        pc.cutoff = 200.0 + 1800.0 * k / 19.0;
        const double closed = fig2.system.omega_c / (pc.cutoff * std::tgamma(pc.exponent));
        worst = std::max(worst, std::abs(detected_threshold(fig2.system, pc) - closed) / closed);
    }
    const double star = threshold_eta(fig2.system.omega_c, fig2.cavity);
    const bool above = detect(fig2.system, fig2.cavity).exists;
    const double elapsed = seconds_since(t0);
    return {worst <= 1e-6 && std::abs(star - 0.04545) < 1e-5 && above && elapsed < 60.0,
            "20 cutoffs, worst relative deviation " + fmt("%.2e", worst) + " (tol 1e-6); fig2 eta* = " +
                fmt("%.5f", star) + ", eta 0.05 " + (above ? "above" : "NOT above") + " threshold; " +
                fmt("%.1f", elapsed) + " s"};
}

Outcome greens_equivalence() {
    const Scenario fig2 = preset("fig2").front();
    std::string detail;
    bool ok = true;
    for (double factor : {1.0, 0.1}) {
        const auto t0 = std::chrono::steady_clock::now();
        SystemParams sys = fig2.system;
        SpectralParams pc = fig2.cavity;
        pc.eta *= factor;
        const auto bound = detect(sys, pc);
        const TimeGrid grid = TimeGrid::covering(50.0, default_step(sys, cavity_frame(sys, pc, bound)));
        const auto a = greens_alpha_time(pc, sys, grid);
        const auto b = greens_alpha_freq(pc, sys, grid);
        double sup = 0.0;
        for (std::size_t i = 0; i < grid.size; ++i) sup = std::max(sup, std::abs(a.values[i] - b.values[i]));
        const double elapsed = seconds_since(t0);
        ok = ok && sup <= 1e-3 && elapsed < 60.0;
        detail += std::string(detail.empty() ? "" : "; ") + (bound.exists ? "above" : "below") + " threshold sup " +
                  fmt("%.2e", sup) + " in " + fmt("%.1f", elapsed) + " s";
    }
    return {ok, detail + " (tol 1e-3)"};
}

Outcome markovian_limit() {
    SpectralParams pc{1e-3, 1e3, 1.0};
    SystemParams sys;
    const double rate = spectral_density(sys.omega_0, pc);
    const TimeGrid grid = TimeGrid::covering(5.0 / rate, 0.01 / rate);
    const auto a = greens_alpha_time(pc, sys, grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size; ++i) {
        const double t = grid.t(i);
        if (t * rate < 1.0 - 1e-9) continue;
        const double ref = std::exp(-0.5 * rate * t);
        worst = std::max(worst, std::abs(std::abs(a.values[i]) - ref) / ref);
    }
    return {worst <= 0.05, "s=1, cutoff 1000, eta 1e-3, J(omega_0) = " + fmt("%.4f", rate) +
                               ", worst relative deviation on 1-5 decay times " + fmt("%.4f", worst) + " (tol 0.05)"};
}

Outcome discrete_bath_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario fig2 = preset("fig2").front();
    SystemParams sys = fig2.system;
    sys.E = 0.0;
    sys.alpha_init = 1.0;
    std::string detail;
    bool ok = true;
    for (double factor : {1.0, 0.1}) {
        SpectralParams pc = fig2.cavity;
        pc.eta *= factor;
        const auto bath = DiscreteBath::sample(pc, 4000);
        const double horizon = 0.5 * bath.recurrence_time();
        const TimeGrid g = TimeGrid::spanning(horizon, 2001);
        const auto oracle = simulate_cavity(bath, sys, g);
        const auto ref = greens_alpha_time(pc, sys, g);
        double sup = 0.0;
        for (std::size_t i = 0; i < g.size; ++i) sup = std::max(sup, std::abs(std::abs(oracle[i]) - std::abs(ref.values[i])));
        ok = ok && sup <= 1e-2;
        const auto bound = detect(sys, pc);
        detail += std::string(detail.empty() ? "" : "; ") + (bound.exists ? "above" : "below") + " threshold sup " +
                  fmt("%.2e", sup) + " on [0, " + fmt("%.3f", horizon) + "]";
        if (bound.exists) {
            double plateau = 0.0;
            std::size_t n = 0;
            for (std::size_t i = g.size / 2; i < g.size; ++i, ++n) plateau += std::abs(oracle[i]);
            plateau /= static_cast<double>(n);
            const double rel = std::abs(plateau - bound.residue) / bound.residue;
            ok = ok && rel <= 0.03;
            detail += ", plateau " + fmt("%.6f", plateau) + " vs Z " + fmt("%.6f", bound.residue);
        }
    }
    const double elapsed = seconds_since(t0);
    return {ok && elapsed < 300.0, detail + "; " + fmt("%.1f", elapsed) + " s"};
}

Outcome perturbation_order() {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario fig2 = preset("fig2").front();
    std::vector<double> errors;
    for (double g0 : {1.2e-3, 6e-4, 3e-4}) {
        Scenario s = fig2;
        s.system.g0 = g0;
        s.resolve();
        const auto bound = detect(s.system, s.cavity);
        const TimeGrid grid = TimeGrid::covering(50.0, 0.5 * default_step(s.system, cavity_frame(s.system, s.cavity, bound)));
        SolverOptions opt;
        opt.dt = grid.dt;
        const auto d = direct_orbit(s.system, s.cavity, s.mechanical, grid, opt);
        const auto p = perturbative_orbit(s.system, s.cavity, s.mechanical, grid, opt);
        double e = 0.0;
        for (std::size_t i = 0; i < grid.size; ++i) {
            e = std::max(e, std::abs(d.alpha0[i] - p.alpha0[i] - g0 * p.alpha1[i]));
            e = std::max(e, std::abs(d.q0[i] - p.q0[i] - g0 * p.q1[i]));
        }
        errors.push_back(e);
    }
    const double r1 = errors[0] / errors[1], r2 = errors[1] / errors[2];
    const double elapsed = seconds_since(t0);
    const bool ok = std::abs(r1 - 4.0) <= 0.5 && std::abs(r2 - 4.0) <= 0.5 && elapsed < 300.0;
    return {ok, "g0 = 1.2e-3, 6e-4, 3e-4 on [0, 50]: errors " + fmt("%.3e", errors[0]) + ", " + fmt("%.3e", errors[1]) +
                    ", " + fmt("%.3e", errors[2]) + "; ratios " + fmt("%.3f", r1) + ", " + fmt("%.3f", r2) +
                    " (4 +- 0.5); " + fmt("%.1f", elapsed) + " s"};
}

struct Fig3Runs {
    std::vector<Scenario> scenarios;
    std::vector<CovarianceRuns> runs;
    std::vector<double> seconds;
};

double covariance_drift(const CovarianceSeries& c) {
    double d = 0.0;
    for (const auto& V : c.V) d = std::max(d, (V - c.V.front()).cwiseAbs().maxCoeff());
    return d;
}

Outcome covariance_physicality(const Fig3Runs& f) {
    std::string detail;
    bool ok = true;
    for (std::size_t k = 0; k < f.runs.size(); ++k) {
        const auto& c = f.runs[k].main;
        const double asym = c.worst_asymmetry(), eig = c.worst_min_eig();
        ok = ok && asym <= 1e-10 && eig >= -1e-6 && f.seconds[k] <= 1800.0;
        detail += f.scenarios[k].name + ": N = " + fmt("%.0f", f.runs[k].settings.at("steps")) + ", asymmetry " +
                  fmt("%.1e", asym) + ", min eig " + fmt("%.2e", eig) + ", " + fmt("%.1f", f.seconds[k]) + " s; ";
    }
    Scenario free = f.scenarios.front();
    free.system.g0 = 0.0;
    free.cavity.eta = 0.0;
    free.mechanical.eta = 0.0;
    free.resolve();
    const double drift = covariance_drift(run_covariance(free, false).main);
    ok = ok && drift <= 1e-10;
    return {ok, detail + "uncoupled drift " + fmt("%.1e", drift) + " (tol 1e-10)"};
}

double max_of(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (std::isfinite(x)) m = std::max(m, x);
    return m;
}

Outcome entanglement_phenomenology(const Fig3Runs& f) {
    std::string detail;
    bool rebirth = false, window_entangled = true;
    for (std::size_t k = 0; k < f.runs.size(); ++k) {
        const auto early = entanglement_series(f.runs[k].main);
        const auto late = entanglement_series(f.runs[k].window);
        rebirth = rebirth || early.crossings.size() >= 2;
        window_entangled = window_entangled && max_of(late.E_N) > 0.0;
        detail += f.scenarios[k].name + ": " + std::to_string(early.crossings.size()) + " crossings on [0, 50], max E_p " +
                  fmt("%.3g", max_of(early.E_p)) + ", window max E_p " + fmt("%.3g", max_of(late.E_p)) + "; ";
    }
    Scenario below = f.scenarios.front();
    below.name += "_below";
    below.cavity.eta *= 0.1;
    below.resolve();
    const auto bound = detect(below.system, below.cavity);
    const auto late = entanglement_series(run_covariance(below, true).window);
    const bool below_zero = !bound.exists && max_of(late.E_N) == 0.0;
    detail += "below threshold window max E_p " + fmt("%.3g", max_of(late.E_p));
    detail += std::string(" | (i) rebirth ") + (rebirth ? "yes" : "no") + ", (ii) window E_N > 0 " +
              (window_entangled ? "yes" : "no") + ", (iii) below-threshold E_N = 0 " + (below_zero ? "yes" : "no");
    return {rebirth && window_entangled && below_zero, detail};
}

Outcome entanglement_oracle() {
    double worst = 0.0;
    for (double r : {0.1, 0.5, 1.0}) {
        const double c = 0.5 * std::cosh(2.0 * r), s = 0.5 * std::sinh(2.0 * r);
        RealMat4 V = RealMat4::Zero();
        V.diagonal().setConstant(c);
        V(0, 2) = V(2, 0) = s;
        V(1, 3) = V(3, 1) = -s;
        worst = std::max(worst, std::abs(pseudo_entanglement(symplectic_min(V)) - 2.0 * r));
    }
    return {worst <= 1e-8, "two-mode squeezed r = 0.1, 0.5, 1.0: worst |E_N - 2r| " + fmt("%.1e", worst) + " (tol 1e-8)"};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> expect_red;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--expect-red" && i + 1 < argc) expect_red.insert(argv[++i]);
        else {
            std::fprintf(stderr, "usage: acceptance [--expect-red NAME]...\n");
            return 2;
        }
    }

    Fig3Runs fig3;
    auto ensure_fig3 = [&]() -> const Fig3Runs& {
        if (fig3.runs.empty())
            for (const auto& s : preset("fig3")) {
                const auto t0 = std::chrono::steady_clock::now();
                fig3.runs.push_back(run_covariance(s, true));
                fig3.seconds.push_back(seconds_since(t0));
                fig3.scenarios.push_back(s);
            }
        return fig3;
    };

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"kernel_closed_forms", kernel_closed_forms},
        {"threshold_exactness", threshold_exactness},
        {"greens_equivalence", greens_equivalence},
        {"markovian_limit", markovian_limit},
        {"discrete_bath_oracle", discrete_bath_oracle},
        {"perturbation_order", perturbation_order},
        {"covariance_physicality", [&] { return covariance_physicality(ensure_fig3()); }},
        {"entanglement_phenomenology", [&] { return entanglement_phenomenology(ensure_fig3()); }},
        {"entanglement_oracle", entanglement_oracle},
    };

    std::set<std::string> failed;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        if (!o.passed) failed.insert(name);
    }
    std::printf("%zu of %zu criteria pass\n", criteria.size() - failed.size(), criteria.size());
    for (const auto& n : expect_red)
        if (!failed.count(n)) std::printf("note: %s was expected to fail but passed\n", n.c_str());
    return failed == expect_red ? 0 : 1;
}
