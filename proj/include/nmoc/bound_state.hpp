#pragma once

#include <cmath>
#include <string>

#include "nmoc/params.hpp"
#include "nmoc/quadrature.hpp"
#include "nmoc/spectral.hpp"

namespace nmoc {

enum class BoundStatus { absent, present, indeterminate };

struct BoundStateResult {
    bool exists{false};
    BoundStatus status{BoundStatus::absent};
    double omega_r{0.0};
    double residue{0.0};
    double threshold_margin{0.0};
    double pole_residual{0.0};
};

/// Coupling at which omega_c + K_c(-omega_0) = 0.
inline double threshold_eta(double omega_c, const SpectralParams& pc) {
    return omega_c / (pc.cutoff * std::tgamma(pc.exponent));
}

/// dK_c/dw below the continuum, -int dw'/2pi J(w')/(w + w0 - w')^2.
inline double lamb_shift_cavity_slope(double omega, const SpectralParams& pc, double omega0) {
    const double x = omega + omega0;
    require(x < 0.0, "lamb_shift_cavity_slope: frequency must lie below the continuum");
    if (pc.eta == 0.0) return 0.0;
    auto f = [&](double w) {
        const double d = x - w;
        return spectral_density(w, pc) / (d * d);
    };
    std::vector<double> cuts{0.0, pc.cutoff * pc.exponent, pc.omega_max()};
    return -quad::adaptive_pieces(f, cuts, 1e-14 * pc.eta, 1e-12).value / (2.0 * pi);
}

/// Pole of w - Delta_c - K_c(w) below the branch point -omega_0, with residue 1/(1 - K_c').
inline BoundStateResult detect(const SystemParams& sys, const SpectralParams& pc) {
    pc.validate();
    require(pc.kind == BathKind::cavity, "detect: expected cavity bath parameters");
    BoundStateResult out;
    const double w0 = sys.omega_0;
    out.threshold_margin = sys.omega_c + lamb_shift_cavity(-w0, pc, w0);
    if (out.threshold_margin > 0.0) return out;

    auto g = [&](double w) { return w - sys.Delta_c() - lamb_shift_cavity(w, pc, w0); };
    double lo = -w0 - 10.0 * pc.cutoff - std::abs(sys.Delta_c());
    double hi = -w0 - 1e-8;
    double glo = g(lo), ghi = g(hi);
    if (!(glo < 0.0 && ghi >= 0.0)) {
        out.status = BoundStatus::indeterminate;
        return out;
    }
    if (ghi == 0.0 || std::abs(out.threshold_margin) < 1e-8) {
        out.status = BoundStatus::indeterminate;
        return out;
    }
    double w = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double gw = g(w);
        if (gw < 0.0) lo = w; else hi = w;
        const double slope = 1.0 - lamb_shift_cavity_slope(w, pc, w0);
        double next = w - gw / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - w) <= 1e-13 * std::max(1.0, std::abs(w))) {
            w = next;
            break;
        }
        w = next;
    }
    out.exists = true;
    out.status = BoundStatus::present;
    out.omega_r = w;
    out.residue = 1.0 / (1.0 - lamb_shift_cavity_slope(w, pc, w0));
    out.pole_residual = g(w);
    return out;
}

}  // namespace nmoc
