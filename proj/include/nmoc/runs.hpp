#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "nmoc/bound_state.hpp"
#include "nmoc/classical.hpp"
#include "nmoc/fluctuations.hpp"
#include "nmoc/scenario.hpp"

namespace nmoc {

/// Kernel history kept by the long-time window when the scenario leaves grid.horizon at 0.
inline constexpr double window_history = 60.0;

struct CovarianceRuns {
    CovarianceSeries main;
    CovarianceSeries window;
    bool has_window{false};
    std::map<std::string, double> settings;
};

/// Fine steps for [0, t_max]: grid.points if set, else grid.dt, else the default step; rounded up to the stride.
inline std::size_t covariance_steps(const Scenario& s) {
    std::size_t steps = s.points;
    if (steps == 0) {
        const auto bound = detect(s.system, s.cavity);
        const double dt = s.dt > 0.0 ? s.dt : default_step(s.system, cavity_frame(s.system, s.cavity, bound));
        steps = static_cast<std::size_t>(std::ceil(s.t_max / dt - 1e-9));
    }
    return (steps + s.stride - 1) / s.stride * s.stride;
}

inline CovarianceRuns run_covariance(const Scenario& s, bool with_window = true) {
    CovarianceRuns r;
    const auto setup = s.covariance_setup();
    const std::size_t steps = covariance_steps(s);
    const double dt = s.t_max / static_cast<double>(steps);
    CovarianceOptions o;
    o.dt = dt;
    o.stride = s.stride;
    o.memory_horizon = horizon_steps(s, dt);
    r.settings["steps"] = static_cast<double>(steps);
    r.settings["dt"] = dt;
    r.settings["stride"] = static_cast<double>(s.stride);
    r.settings["memory_horizon_steps"] = static_cast<double>(o.memory_horizon);
    r.main = covariance_series(setup, s.t_max, steps, o);
    r.settings["frame"] = r.main.frame;
    if (with_window && s.window_end > s.window_begin) {
        CovarianceOptions w;
        w.dt = s.window_dt;
        w.stride = s.window_stride;
        const double history = s.horizon > 0.0 ? s.horizon : window_history;
        w.memory_horizon = static_cast<std::size_t>(std::ceil(history / s.window_dt));
        w.cavity_horizon = static_cast<std::size_t>(std::ceil(std::min(history, kernel_horizon(s.cavity)) / s.window_dt));
        const auto every = static_cast<std::size_t>(std::max(1.0, std::round(0.1 / (s.window_dt * w.stride))));
        r.settings["window_dt"] = s.window_dt;
        r.settings["window_stride"] = static_cast<double>(w.stride);
        r.settings["window_output_every"] = static_cast<double>(every);
        r.settings["window_memory_horizon_steps"] = static_cast<double>(w.memory_horizon);
        r.settings["window_cavity_horizon_steps"] = static_cast<double>(w.cavity_horizon);
        r.window = covariance_window(setup, s.window_begin, s.window_end, s.window_dt, every, w);
        r.has_window = true;
    }
    return r;
}

}  // namespace nmoc
