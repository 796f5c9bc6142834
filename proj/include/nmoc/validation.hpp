#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nmoc/bound_state.hpp"
#include "nmoc/classical.hpp"
#include "nmoc/csv.hpp"
#include "nmoc/discrete_bath.hpp"
#include "nmoc/scenario.hpp"

namespace nmoc {

struct ValidationCheck {
    std::string name;
    double value{0.0};
    double tolerance{0.0};
    bool passed{false};
    std::string note;
};

namespace detail {

inline ValidationCheck check(std::string name, double value, double tol, std::string note = {}) {
    return {std::move(name), value, tol, std::isfinite(value) && value <= tol, std::move(note)};
}

inline double sup_abs_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace detail

/// Oracle comparisons for the cavity and mirror of a scenario (g0 = 0, E = 0).
inline std::vector<ValidationCheck> run_validation(const Scenario& s, std::size_t modes = 4000) {
    std::vector<ValidationCheck> out;
    SystemParams sys = s.system;
    sys.E = 0.0;
    sys.alpha_init = 1.0;
    const auto& pc = s.cavity;
    const auto& pm = s.mechanical;

    const double eta_star = threshold_eta(sys.omega_c, pc);
    {
        SpectralParams at = pc;
        at.eta = eta_star;
        const double margin = sys.omega_c + lamb_shift_cavity(-sys.omega_0, at, sys.omega_0);
        out.push_back(detail::check("threshold_margin_at_closed_form", std::abs(margin) / sys.omega_c, 1e-6));
    }

    const auto bound = detect(sys, pc);
    const double nu = cavity_frame(sys, pc, bound);
    const TimeGrid grid = TimeGrid::covering(s.t_max, default_step(sys, nu));
    const auto t_series = greens_alpha_time(pc, sys, grid);
    const auto f_series = greens_alpha_freq(pc, sys, grid);
    out.push_back(detail::check("greens_alpha_time_vs_freq", detail::sup_abs_diff(t_series.values, f_series.values), 1e-3,
                                bound.exists ? "bound state present" : "no bound state"));

    if (pc.eta > 0.0) {
        const auto bath = DiscreteBath::sample(pc, modes);
        const double horizon = std::min(s.t_max, 0.5 * bath.recurrence_time());
        const TimeGrid g = TimeGrid::spanning(horizon, 2001);
        const auto oracle = simulate_cavity(bath, sys, g);
        const auto ref = greens_alpha_time(pc, sys, g);
        double sup = 0.0;
        for (std::size_t i = 0; i < g.size; ++i) sup = std::max(sup, std::abs(std::abs(oracle[i]) - std::abs(ref.values[i])));
        out.push_back(detail::check("discrete_cavity_vs_dyson", sup, 1e-2,
                                    "window " + CsvWriter::number(horizon) + " (half the recurrence time)"));
        if (bound.exists) {
            double plateau = 0.0;
            std::size_t n = 0;
            for (std::size_t i = g.size / 2; i < g.size; ++i, ++n) plateau += std::abs(oracle[i]);
            plateau /= static_cast<double>(n);
            out.push_back(detail::check("discrete_cavity_plateau_vs_residue",
                                        std::abs(plateau - bound.residue) / bound.residue, 3e-2));
        }
    }

    if (pm.eta > 0.0) {
        SystemParams ms = s.system;
        const auto bath = DiscreteBath::sample(pm, modes);
        const double horizon = std::min(s.t_max, bath.recurrence_time());
        const TimeGrid g = TimeGrid::covering(horizon, 0.005);
        const auto oracle = simulate_mirror(bath, ms, g);
        const auto ref = greens_q_time(pm, ms, g, ms.q_init, ms.p_init);
        double sup = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < g.size; ++i) {
            sup = std::max(sup, std::abs(oracle[i] - ref.q[i]));
            scale = std::max(scale, std::abs(ref.q[i]));
        }
        out.push_back(detail::check("discrete_mirror_vs_dyson", scale > 0.0 ? sup / scale : sup, 1e-2,
                                    "relative to max|q|"));
    }
    return out;
}

}  // namespace nmoc
