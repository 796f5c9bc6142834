#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nmoc/params.hpp"
#include "nmoc/spectral.hpp"
#include "nmoc/types.hpp"

namespace nmoc {

/// Finite set of bath modes sampled at the midpoints of a uniform grid on (0, omega_max).
struct DiscreteBath {
    std::vector<double> frequencies;
    std::vector<double> couplings;  // g_k with g_k^2 = J(w_k) dw / 2pi
    double spacing{0.0};

    [[nodiscard]] std::size_t mode_count() const { return frequencies.size(); }

    /// 2pi / dw; infinite for an empty bath.
    [[nodiscard]] double recurrence_time() const {
        return spacing > 0.0 ? 2.0 * pi / spacing : std::numeric_limits<double>::infinity();
    }

    static DiscreteBath sample(const SpectralParams& p, std::size_t modes) {
        p.validate();
        DiscreteBath b;
        if (modes == 0 || p.eta == 0.0) return b;
        b.spacing = p.omega_max() / static_cast<double>(modes);
        b.frequencies.resize(modes);
        b.couplings.resize(modes);
        for (std::size_t k = 0; k < modes; ++k) {
            const double w = (static_cast<double>(k) + 0.5) * b.spacing;
            b.frequencies[k] = w;
            b.couplings[k] = std::sqrt(spectral_density(w, p) * b.spacing / (2.0 * pi));
        }
        return b;
    }
};

/// Spectrum of the symmetric arrowhead matrix [[d0, a^T], [a, diag(d)]] with d increasing:
/// eigenvalues and the squared first components of the eigenvectors.
struct ArrowheadSpectrum {
    std::vector<double> values;
    std::vector<double> weights;
    std::vector<std::size_t> origin;  // pole each value was located from
    std::vector<double> offset;       // value minus that pole, kept exactly

    /// lambda_j - d_k without cancellation next to the reference pole.
    [[nodiscard]] double gap(std::size_t j, std::size_t k, const std::vector<double>& d) const {
        return (d[origin[j]] - d[k]) + offset[j];
    }
};

inline ArrowheadSpectrum arrowhead_spectrum(double d0, const std::vector<double>& d, const std::vector<double>& a) {
    require(d.size() == a.size(), "arrowhead: size mismatch");
    for (std::size_t k = 1; k < d.size(); ++k) require(d[k] > d[k - 1], "arrowhead: poles must increase");
    ArrowheadSpectrum out;
    const std::size_t n = d.size();
    if (n == 0) {
        out.values = {d0};
        out.weights = {1.0};
        out.origin = {0};
        out.offset = {0.0};
        return out;
    }
    std::vector<double> a2(n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        a2[k] = a[k] * a[k];
        total += a2[k];
    }
    // lambda = origin + x keeps lambda - d_k accurate next to the pole at `origin`.
    auto secular = [&](double origin, double x, double& slope) {
        double s = 0.0, ds = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double gap = (origin - d[k]) + x;
            s += a2[k] / gap;
            ds += a2[k] / (gap * gap);
        }
        slope = 1.0 + ds;
        return origin + x - d0 - s;
    };
    out.values.resize(n + 1);
    out.weights.resize(n + 1);
    out.origin.resize(n + 1);
    out.offset.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        double origin, lo, hi;
        std::size_t pole;
        if (j == 0) {
            pole = 0;
            origin = d[0];
            lo = -(std::abs(d[0] - d0) + total + 1.0);
            hi = 0.0;
        } else if (j == n) {
            pole = n - 1;
            origin = d[n - 1];
            lo = 0.0;
            hi = std::abs(d0 - d[n - 1]) + total + 1.0;
        } else {
            pole = j - 1;
            origin = d[j - 1];
            lo = 0.0;
            hi = d[j] - d[j - 1];
        }
        double x = 0.5 * (lo + hi), slope = 1.0;
        for (int iter = 0; iter < 200; ++iter) {
            const double h = secular(origin, x, slope);
            if (h < 0.0) lo = x; else hi = x;
            double next = x - h / slope;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(x), hi - lo) ||
                hi - lo <= std::numeric_limits<double>::min()) {
                x = next;
                break;
            }
            x = next;
        }
        secular(origin, x, slope);
        out.values[j] = origin + x;
        out.weights[j] = 1.0 / slope;
        out.origin[j] = pole;
        out.offset[j] = x;
    }
    return out;
}

/// Cavity coupled to discrete modes, bath initially empty, in the frame of the drive.
struct CavityOracle {
    DiscreteBath bath;
    double Delta_c{0.0};
    double omega0{0.0};
    Complex alpha0{1.0, 0.0};
    ArrowheadSpectrum spectrum;
    std::vector<double> poles;  // w_k - omega_0

    [[nodiscard]] Complex alpha(double t) const {
        Complex s{};
        for (std::size_t j = 0; j < spectrum.values.size(); ++j)
            s += spectrum.weights[j] * std::polar(1.0, -spectrum.values[j] * t);
        return alpha0 * s;
    }

    /// Cavity amplitude followed by all bath amplitudes at time t.
    [[nodiscard]] std::vector<Complex> state(double t) const {
        const std::size_t n = bath.mode_count();
        std::vector<Complex> out(n + 1, Complex{});
        for (std::size_t j = 0; j < spectrum.values.size(); ++j) {
            const double lam = spectrum.values[j];
            const Complex c = alpha0 * spectrum.weights[j] * std::polar(1.0, -lam * t);
            out[0] += c;
            for (std::size_t k = 0; k < n; ++k) {
                const double gap = spectrum.gap(j, k, poles);
                if (gap != 0.0) out[k + 1] += c * bath.couplings[k] / gap;
            }
        }
        return out;
    }
};

inline void check_horizon(const DiscreteBath& bath, double t_max) {
    if (t_max > bath.recurrence_time())
        throw ParameterError("discrete bath: t_max " + std::to_string(t_max) + " exceeds the recurrence time " +
                             std::to_string(bath.recurrence_time()) + "; use more modes");
}

inline CavityOracle cavity_oracle(const DiscreteBath& bath, const SystemParams& sys) {
    CavityOracle o;
    o.bath = bath;
    o.Delta_c = sys.Delta_c();
    o.omega0 = sys.omega_0;
    o.alpha0 = sys.alpha_init;
    std::vector<double> d(bath.mode_count());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = bath.frequencies[k] - sys.omega_0;
    o.spectrum = arrowhead_spectrum(o.Delta_c, d, bath.couplings);
    o.poles = std::move(d);
    return o;
}

/// alpha(t) on the grid for the cavity with g0 = 0 and E = 0.
inline std::vector<Complex> simulate_cavity(const DiscreteBath& bath, const SystemParams& sys, const TimeGrid& grid) {
    check_horizon(bath, grid.t_max());
    const auto o = cavity_oracle(bath, sys);
    std::vector<Complex> out(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) out[i] = o.alpha(grid.t(i));
    return out;
}

/// Mirror coupled to discrete oscillators, H = w_m p^2/2 + Delta_m q^2/2 + sum w_l (q_l^2 + p_l^2)/2
/// - q sum w_l gamma_l q_l, bath initially at rest.
struct MirrorOracle {
    double omega_m{1.0};
    double q0{0.0}, p0{0.0};
    std::vector<double> frequencies;  // normal-mode frequencies
    std::vector<double> weights;

    [[nodiscard]] double q(double t) const {
        double s = 0.0;
        for (std::size_t j = 0; j < frequencies.size(); ++j) {
            const double w = frequencies[j];
            s += weights[j] * (q0 * std::cos(w * t) + omega_m * p0 * std::sin(w * t) / w);
        }
        return s;
    }
};

inline MirrorOracle mirror_oracle(const DiscreteBath& bath, const SystemParams& sys) {
    MirrorOracle o;
    o.omega_m = sys.omega_m;
    o.q0 = sys.q_init;
    o.p0 = sys.p_init;
    // Mass-weighted coordinates make q'' = -K q symmetric with an arrowhead K.
    const std::size_t n = bath.mode_count();
    std::vector<double> d(n), a(n);
    for (std::size_t l = 0; l < n; ++l) {
        const double w = bath.frequencies[l];
        const double gamma = bath.couplings[l] / w;  // gamma_l^2 = J dw / (2pi w^2)
        d[l] = w * w;
        a[l] = -std::sqrt(sys.omega_m * w) * w * gamma;
    }
    const auto spec = arrowhead_spectrum(sys.omega_m * sys.Delta_m, d, a);
    for (std::size_t j = 0; j < spec.values.size(); ++j) {
        if (!(spec.values[j] > 0.0)) throw SolverError("mirror oracle: unstable normal mode");
        o.frequencies.push_back(std::sqrt(spec.values[j]));
        o.weights.push_back(spec.weights[j]);
    }
    return o;
}

inline std::vector<double> simulate_mirror(const DiscreteBath& bath, const SystemParams& sys, const TimeGrid& grid) {
    check_horizon(bath, grid.t_max());
    const auto o = mirror_oracle(bath, sys);
    std::vector<double> out(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) out[i] = o.q(grid.t(i));
    return out;
}

}  // namespace nmoc
