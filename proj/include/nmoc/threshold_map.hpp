#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "nmoc/bound_state.hpp"
#include "nmoc/classical.hpp"

namespace nmoc {

/// Runs task(i) for i in [0, n) on a pool of worker threads. Tasks must not throw.
template <typename F>
void parallel_for(std::size_t n, F&& task, unsigned workers = std::thread::hardware_concurrency()) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < n; i = next++) task(i);
    };
    if (workers == 1) {
        loop();
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
}

struct MapCell {
    double eta_c{0.0};
    double cutoff_c{0.0};
    double alpha_max{std::nan("")};
    double threshold_margin{std::nan("")};
    bool exists{false};
    std::string error;
};

/// max |alpha_0(t)| over the final 10% of [0, t_max], with the drive and alpha(0) of `sys`.
inline double late_alpha_max(const SystemParams& sys, const SpectralParams& pc, double t_max) {
    const auto bound = detect(sys, pc);
    const double nu = cavity_frame(sys, pc, bound);
    const double dt = default_step(sys, nu);
    const TimeGrid grid = TimeGrid::covering(t_max, dt);
    const auto horizon = static_cast<std::size_t>(std::ceil(kernel_horizon(pc) / dt));
    const auto a = detail::cavity_response(pc, sys, nu, grid, sys.alpha_init, sys.E, horizon);
    double m = 0.0;
    for (std::size_t i = grid.size - std::max<std::size_t>(1, grid.size / 10); i < grid.size; ++i)
        m = std::max(m, std::abs(a[i]));
    return m;
}

inline MapCell map_cell(const SystemParams& sys, SpectralParams pc, double eta, double cutoff, double t_max) {
    MapCell c;
    c.eta_c = eta;
    c.cutoff_c = cutoff;
    pc.eta = eta;
    pc.cutoff = cutoff;
    try {
        const auto bound = detect(sys, pc);
        c.threshold_margin = bound.threshold_margin;
        c.exists = bound.exists;
        c.alpha_max = late_alpha_max(sys, pc, t_max);
    } catch (const std::exception& e) {
        c.error = e.what();
    }
    return c;
}

/// Late-time field amplitude over a uniform (eta_c, cutoff_c) grid; failures are recorded per cell.
inline std::vector<MapCell> threshold_map(const SystemParams& sys, const SpectralParams& pc, double eta_min,
                                          double eta_max, std::size_t eta_points, double cutoff_min,
                                          double cutoff_max, std::size_t cutoff_points, double t_max = 200.0) {
    require(eta_points >= 2 && cutoff_points >= 2, "threshold_map: need at least 2 points per axis");
    require(eta_min >= 0.0 && eta_max > eta_min && cutoff_min > 0.0 && cutoff_max > cutoff_min,
            "threshold_map: ranges must be positive and increasing");
    std::vector<MapCell> out(eta_points * cutoff_points);
    parallel_for(out.size(), [&](std::size_t k) {
        const std::size_t i = k % eta_points, j = k / eta_points;
        const double w = cutoff_min + (cutoff_max - cutoff_min) * static_cast<double>(j) / (cutoff_points - 1);
        const double eta = eta_min + (eta_max - eta_min) * static_cast<double>(i) / (eta_points - 1);
        out[k] = map_cell(sys, pc, eta, w, t_max);
    });
    return out;
}

}  // namespace nmoc
