#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nmoc/bound_state.hpp"
#include "nmoc/params.hpp"
#include "nmoc/quadrature.hpp"
#include "nmoc/spectral.hpp"
#include "nmoc/volterra.hpp"

namespace nmoc {

/// Solver settings shared by the time-domain routines.
struct SolverOptions {
    double dt{0.0};                 // 0 selects default_step
    std::size_t memory_horizon{0};  // steps; 0 keeps the full history
    bool estimate_error{false};
};

/// Frequency of the rotating frame for the cavity amplitude: the pole when a bound state
/// exists, otherwise the self-consistent shifted detuning nu = Delta_c + K_c(nu).
inline double cavity_frame(const SystemParams& sys, const SpectralParams& pc, const BoundStateResult& bound) {
    if (bound.exists) return bound.omega_r;
    double nu = sys.Delta_c();
    if (pc.eta == 0.0) return nu;
    for (int i = 0; i < 200; ++i) {
        const double next = sys.Delta_c() + lamb_shift_cavity(nu, pc, sys.omega_0);
        if (std::abs(next - nu) < 1e-12 * std::max(1.0, std::abs(nu))) return next;
        nu = 0.5 * (nu + next);
    }
    return nu;
}

/// 2pi / (40 * rate), with the rate taken from the slow dynamics in the rotating frame. Kernel
/// structure on the scale of the cutoff is integrated exactly by the product weights, and steps
/// comparable to 1/cutoff resolve the initial transient worst, so the cutoff is not a rate here.
inline double default_step(const SystemParams& sys, double nu) {
    const double frame_rate = std::min(std::abs(sys.omega_0 + nu), std::abs(sys.Delta_c() - nu));
    const double rate = std::max({sys.omega_m, std::sqrt(std::abs(sys.Delta_m)), std::abs(sys.Delta_c()), frame_rate});
    return 2.0 * pi / (40.0 * rate);
}

/// f_c(u) e^{i nu u} with its exact integral to infinity.
inline KernelSource rotated_cavity_kernel(const SpectralParams& pc, double omega0, double nu) {
    return KernelSource::analytic([pc, omega0, nu](double u) { return cavity_kernel_value(pc, omega0 + nu, u); },
                                  cavity_kernel_integral(pc, omega0, nu));
}

inline KernelSource mechanical_kernel_source(const SpectralParams& pm) {
    return KernelSource::analytic([pm](double u) { return Complex(mechanical_kernel_value(pm, u), 0.0); },
                                  Complex(mechanical_kernel_integral(pm), 0.0));
}

/// Complex time series in the lab frame together with the frame it was computed in.
struct GreensSeries {
    TimeGrid grid;
    std::vector<Complex> values;
    double frame{0.0};
    double error_estimate{0.0};

    /// Value multiplied by e^{i nu t}.
    [[nodiscard]] Complex rotated(std::size_t i, double nu) const { return values[i] * std::polar(1.0, nu * grid.t(i)); }
};

namespace detail {

/// Solves a' = -i Delta_c a - f_c * a + E (+ extra forcing) in the frame nu; returns frame values.
inline std::vector<Complex> cavity_response(const SpectralParams& pc, const SystemParams& sys, double nu,
                                            const TimeGrid& grid, Complex a0, double drive,
                                            std::size_t horizon, double* error_estimate = nullptr) {
    VolterraProblem p;
    p.dimension = 1;
    p.grid = grid;
    p.memory_horizon = horizon;
    Matrix A(1, 1);
    A(0, 0) = -I * (sys.Delta_c() - nu);
    p.drift = [A](double) { return A; };
    if (pc.eta > 0.0) p.memory.push_back({0, 0, rotated_cavity_kernel(pc, sys.omega_0, nu)});
    if (drive != 0.0) {
        p.forcing_increment = [drive, nu](double a, double b) {
            Vector v(1);
            if (nu == 0.0) {
                v(0) = drive * (b - a);
            } else {
                v(0) = drive * (std::polar(1.0, nu * b) - std::polar(1.0, nu * a)) / (I * nu);
            }
            return v;
        };
    }
    p.initial = Matrix::Constant(1, 1, a0);
    const auto sol = solve(p, error_estimate != nullptr);
    if (error_estimate) *error_estimate = sol.error_estimate;
    std::vector<Complex> out(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) out[i] = sol.states[i](0, 0);
    return out;
}

}  // namespace detail

/// Dyson-equation Green's function a' = -i Delta_c a - int f_c a, a(0) = 1, in the time domain.
inline GreensSeries greens_alpha_time(const SpectralParams& pc, const SystemParams& sys, const TimeGrid& grid,
                                      const SolverOptions& opt = {}) {
    pc.validate();
    const auto bound = detect(sys, pc);
    const double nu = cavity_frame(sys, pc, bound);
    GreensSeries out;
    out.grid = grid;
    out.frame = nu;
    double err = 0.0;
    auto rotated = detail::cavity_response(pc, sys, nu, grid, 1.0, 0.0, opt.memory_horizon,
                                           opt.estimate_error ? &err : nullptr);
    out.error_estimate = err;
    out.values.resize(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) out.values[i] = rotated[i] * std::polar(1.0, -nu * grid.t(i));
    return out;
}

/// Residue term plus branch-cut integral of the frequency-domain Green's function.
struct GreensFrequencyModel {
    BoundStateResult bound;
    quad::OscillatoryTable branch;

    [[nodiscard]] Complex operator()(double t) const {
        Complex v = branch.integrate(t);
        if (bound.exists) v += bound.residue * std::polar(1.0, -bound.omega_r * t);
        return v;
    }
};

inline GreensFrequencyModel greens_alpha_freq_model(const SpectralParams& pc, const SystemParams& sys,
                                                    double tol = 1e-10) {
    pc.validate();
    const auto bound = detect(sys, pc);
    const double w0 = sys.omega_0;
    auto density = [&](double w) {
        const double j = spectral_density(w + w0, pc);
        if (j == 0.0) return Complex{};
        const double d = w - sys.Delta_c() - lamb_shift_cavity(w, pc, w0);
        return Complex(2.0 / pi * j / (4.0 * d * d + j * j), 0.0);
    };
    const double top = pc.omega_max() - w0;
    std::vector<double> cuts;
    const int base = 256;
    for (int i = 0; i <= base; ++i) cuts.push_back(-w0 + (top + w0) * i / base);
    if (!bound.exists && pc.eta > 0.0) {
        // The resonance inside the continuum can be narrower than the base panels.
        const double nu = cavity_frame(sys, pc, bound);
        const double width = std::max(0.5 * spectral_density(nu + w0, pc), 1e-6);
        for (double k : {-20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0}) {
            const double w = nu + k * width;
            if (w > -w0 && w < top) cuts.push_back(w);
        }
    }
    quad::OscillatoryTable table(density, cuts, tol);
    if (!table.converged())
        throw SolverError("greens_alpha_freq: branch-cut table did not reach tolerance");
    return {bound, std::move(table)};
}

inline GreensSeries greens_alpha_freq(const SpectralParams& pc, const SystemParams& sys, const TimeGrid& grid) {
    const auto model = greens_alpha_freq_model(pc, sys);
    GreensSeries out;
    out.grid = grid;
    out.values.resize(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) out.values[i] = model(grid.t(i));
    return out;
}

/// Mechanical response q'' = -Delta_m q + int f_m q + b, returned as (q, p) series with q' = omega_m p.
struct MechanicalSeries {
    std::vector<double> q, p;
};

namespace detail {

inline MechanicalSeries mechanical_response(const SpectralParams& pm, const SystemParams& sys, const TimeGrid& grid,
                                            double q0, double p0, const std::vector<double>* drive,
                                            std::size_t horizon) {
    VolterraProblem pr;
    pr.dimension = 2;
    pr.grid = grid;
    pr.memory_horizon = horizon;
    Matrix A(2, 2);
    A << 0.0, sys.omega_m, -sys.Delta_m, 0.0;
    pr.drift = [A](double) { return A; };
    if (pm.eta > 0.0) pr.memory.push_back({1, 0, mechanical_kernel_source(pm), Complex(-1.0, 0.0)});
    if (drive) {
        const auto& d = *drive;
        const double dt = grid.dt;
        pr.forcing_increment = [&d, dt](double a, double b) {
            const auto i = static_cast<std::size_t>(std::llround(a / dt));
            Vector v = Vector::Zero(2);
            v(1) = 0.5 * (b - a) * (d[i] + d[i + 1]);
            return v;
        };
    }
    pr.initial = Matrix(2, 1);
    pr.initial << q0, p0;
    const auto sol = solve(pr);
    MechanicalSeries out;
    out.q.resize(grid.size);
    out.p.resize(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) {
        out.q[i] = sol.states[i](0, 0).real();
        out.p[i] = sol.states[i](1, 0).real();
    }
    return out;
}

}  // namespace detail

/// Homogeneous mechanical solution in the time domain.
inline MechanicalSeries greens_q_time(const SpectralParams& pm, const SystemParams& sys, const TimeGrid& grid,
                                     double q0, double p0, const SolverOptions& opt = {}) {
    pm.validate();
    return detail::mechanical_response(pm, sys, grid, q0, p0, nullptr, opt.memory_horizon);
}

struct FrequencyInversion {
    std::vector<double> values;
    double max_imaginary{0.0};
};

/// Fourier inversion of [i w q0 - p0] / (w^2 - Delta_m - K_m(w) - i J~(w)).
/// A damped reference oscillator with the same large-w behaviour is subtracted in the frequency
/// domain and added back in closed form.
inline FrequencyInversion greens_q_freq(const SpectralParams& pm, const SystemParams& sys, const TimeGrid& grid,
                                        double q0, double p0, double tol = 1e-8) {
    pm.validate();
    FrequencyInversion out;
    out.values.assign(grid.size, 0.0);
    if (q0 == 0.0 && p0 == 0.0) return out;
    const double omega2 = sys.Delta_m;
    const double gamma = 1.0;
    const double shifted = std::sqrt(omega2 - 0.25 * gamma * gamma);
    auto density = [&](double w) {
        const auto shift = lamb_shift_mech(w, pm);
        const Complex num(-p0, w * q0);
        const Complex d = w * w - sys.Delta_m - shift.K - I * shift.J_tilde;
        const Complex dref = Complex(w * w - omega2, gamma * w);
        const Complex num_ref = num - gamma * q0;
        return (num / d - num_ref / dref) / (2.0 * pi);
    };
    const double top = sys.Delta_m + pm.omega_max();
    std::vector<double> cuts;
    const int base = 512;
    for (int i = 0; i <= base; ++i) cuts.push_back(-top + 2.0 * top * i / base);
    quad::OscillatoryTable table(density, cuts, tol);
    if (!table.converged()) throw SolverError("greens_q_freq: inversion table did not reach tolerance");
    for (std::size_t i = 0; i < grid.size; ++i) {
        const double t = grid.t(i);
        const Complex v = table.integrate(t);
        const double ref = std::exp(-0.5 * gamma * t) *
                           (q0 * std::cos(shifted * t) + (p0 + 0.5 * gamma * q0) * std::sin(shifted * t) / shifted);
        out.values[i] = v.real() + ref;
        out.max_imaginary = std::max(out.max_imaginary, std::abs(v.imag()));
    }
    return out;
}

enum class OrbitMode { perturbative, direct };

struct ClassicalTrajectory {
    TimeGrid grid;
    OrbitMode mode{OrbitMode::perturbative};
    double frame{0.0};
    // perturbative: alpha0, alpha1, q0, p0, q1.  direct: alpha, q, p stored in alpha0, q0, p0.
    std::vector<Complex> alpha0, alpha1;
    std::vector<double> q0, p0, q1;
};

/// Zeroth and first order of the expansion in g0, each solved as its defining Volterra equation.
inline ClassicalTrajectory perturbative_orbit(const SystemParams& sys, const SpectralParams& pc,
                                              const SpectralParams& pm, const TimeGrid& grid,
                                              const SolverOptions& opt = {}) {
    sys.validate(pm);
    const auto bound = detect(sys, pc);
    const double nu = cavity_frame(sys, pc, bound);
    ClassicalTrajectory out;
    out.grid = grid;
    out.mode = OrbitMode::perturbative;
    out.frame = nu;

    const auto a0 = detail::cavity_response(pc, sys, nu, grid, sys.alpha_init, sys.E, opt.memory_horizon);
    const auto mech = detail::mechanical_response(pm, sys, grid, sys.q_init, sys.p_init, nullptr, opt.memory_horizon);

    // alpha1' = -i Delta_c alpha1 - f_c * alpha1 + i alpha0 q0, alpha1(0) = 0.
    VolterraProblem p;
    p.dimension = 1;
    p.grid = grid;
    p.memory_horizon = opt.memory_horizon;
    Matrix A(1, 1);
    A(0, 0) = -I * (sys.Delta_c() - nu);
    p.drift = [A](double) { return A; };
    if (pc.eta > 0.0) p.memory.push_back({0, 0, rotated_cavity_kernel(pc, sys.omega_0, nu)});
    const double dt = grid.dt;
    p.forcing_increment = [&](double a, double b) {
        const auto i = static_cast<std::size_t>(std::llround(a / dt));
        Vector v(1);
        v(0) = 0.5 * (b - a) * I * (a0[i] * mech.q[i] + a0[i + 1] * mech.q[i + 1]);
        return v;
    };
    p.initial = Matrix::Zero(1, 1);
    const auto a1 = solve(p);

    std::vector<double> intensity(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) intensity[i] = std::norm(a0[i]);
    const auto first = detail::mechanical_response(pm, sys, grid, 0.0, 0.0, &intensity, opt.memory_horizon);

    out.alpha0.resize(grid.size);
    out.alpha1.resize(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) {
        const Complex back = std::polar(1.0, -nu * grid.t(i));
        out.alpha0[i] = a0[i] * back;
        out.alpha1[i] = a1.states[i](0, 0) * back;
    }
    out.q0 = mech.q;
    out.p0 = mech.p;
    out.q1 = first.q;
    return out;
}

/// Full nonlinear mean-field equations for (alpha, q, p).
inline ClassicalTrajectory direct_orbit(const SystemParams& sys, const SpectralParams& pc, const SpectralParams& pm,
                                        const TimeGrid& grid, const SolverOptions& opt = {}) {
    sys.validate(pm);
    const auto bound = detect(sys, pc);
    const double nu = cavity_frame(sys, pc, bound);
    VolterraProblem p;
    p.dimension = 3;
    p.grid = grid;
    p.memory_horizon = opt.memory_horizon;
    Matrix A = Matrix::Zero(3, 3);
    A(0, 0) = -I * (sys.Delta_c() - nu);
    A(1, 2) = sys.omega_m;
    A(2, 1) = -sys.Delta_m;
    p.drift = [A](double) { return A; };
    if (pc.eta > 0.0) p.memory.push_back({0, 0, rotated_cavity_kernel(pc, sys.omega_0, nu)});
    if (pm.eta > 0.0) p.memory.push_back({2, 1, mechanical_kernel_source(pm), Complex(-1.0, 0.0)});
    const double g0 = sys.g0;
    p.nonlinear = [g0](double, const Matrix& y) {
        Matrix n = Matrix::Zero(3, 1);
        n(0, 0) = I * g0 * y(0, 0) * y(1, 0).real();
        n(2, 0) = g0 * std::norm(y(0, 0));
        return n;
    };
    if (sys.E != 0.0) {
        const double drive = sys.E;
        p.forcing_increment = [drive, nu](double a, double b) {
            Vector v = Vector::Zero(3);
            v(0) = nu == 0.0 ? Complex(drive * (b - a))
                             : drive * (std::polar(1.0, nu * b) - std::polar(1.0, nu * a)) / (I * nu);
            return v;
        };
    }
    p.initial = Matrix(3, 1);
    p.initial << sys.alpha_init, sys.q_init, sys.p_init;
    const auto sol = solve(p);
    ClassicalTrajectory out;
    out.grid = grid;
    out.mode = OrbitMode::direct;
    out.frame = nu;
    out.alpha0.resize(grid.size);
    out.q0.resize(grid.size);
    out.p0.resize(grid.size);
    for (std::size_t i = 0; i < grid.size; ++i) {
        out.alpha0[i] = sol.states[i](0, 0) * std::polar(1.0, -nu * grid.t(i));
        out.q0[i] = sol.states[i](1, 0).real();
        out.p0[i] = sol.states[i](2, 0).real();
    }
    return out;
}

/// Late-time amplitude: an oscillating bound-state part plus a constant driven part.
struct SteadyAmplitude {
    bool bound{false};
    double omega_r{0.0};
    Complex oscillating{};
    Complex driven{};

    [[nodiscard]] Complex at(double t) const { return oscillating * std::polar(1.0, -omega_r * t) + driven; }
};

inline SteadyAmplitude steady_amplitude(const SystemParams& sys, const SpectralParams& pc) {
    const auto bound = detect(sys, pc);
    SteadyAmplitude out;
    const double w0 = sys.omega_0;
    if (sys.E != 0.0) {
        const Complex denom(sys.Delta_c() + lamb_shift_cavity(0.0, pc, w0), -0.5 * spectral_density(w0, pc));
        if (std::abs(denom) == 0.0) throw SolverError("steady_amplitude: driven denominator vanishes");
        out.driven = -I * sys.E / denom;
    }
    if (bound.exists) {
        if (bound.omega_r == 0.0) throw SolverError("steady_amplitude: degenerate pole at w = 0");
        out.bound = true;
        out.omega_r = bound.omega_r;
        out.oscillating = (bound.omega_r * sys.alpha_init + I * sys.E) * bound.residue / bound.omega_r;
    }
    return out;
}

struct EffectiveDetuning {
    double value{0.0};
    double q1_late{0.0};
    double drift{0.0};
    bool settled{true};
};

/// Delta_c - g0^2 q1(inf), with q1(inf) the mean of q1 over the final 10% of the run.
inline EffectiveDetuning effective_detuning(const SystemParams& sys, const ClassicalTrajectory& traj) {
    EffectiveDetuning out;
    out.value = sys.Delta_c();
    if (traj.q1.empty()) return out;
    const std::size_t n = traj.q1.size();
    const std::size_t start = n - std::max<std::size_t>(1, n / 10);
    const std::size_t mid = start + (n - start) / 2;
    auto mean = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t i = a; i < b; ++i) s += traj.q1[i];
        return b > a ? s / static_cast<double>(b - a) : 0.0;
    };
    out.q1_late = mean(start, n);
    const double first = mean(start, std::max(mid, start + 1)), second = mean(mid, n);
    out.drift = out.q1_late != 0.0 ? std::abs(second - first) / std::abs(out.q1_late) : 0.0;
    out.settled = out.drift <= 1e-2;
    out.value = sys.Delta_c() - sys.g0 * sys.g0 * out.q1_late;
    return out;
}

}  // namespace nmoc
