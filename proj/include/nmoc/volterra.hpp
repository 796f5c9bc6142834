#pragma once

// Fixed-step solver for  y' = A(t) y - int_0^t F(t - s) y(s) ds + b(t) + N(t, y).
//
// The equation is integrated once in time. With F1(u) = int_0^u F the memory term becomes
//   int_0^t F1(t - s) y(s) ds = F1(inf) int_0^t y + int_0^t R(t - s) y(s) ds,   R = F1 - F1(inf),
// and the second piece is evaluated by product integration against piecewise-linear y, so
// kernels much narrower than dt are still integrated exactly. The local part uses the
// trapezoidal rule and is solved implicitly at every step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nmoc/quadrature.hpp"
#include "nmoc/spectral.hpp"
#include "nmoc/types.hpp"

namespace nmoc {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Product-integration weights of one scalar kernel for a fixed step.
struct KernelMoments {
    double dt{0.0};
    Complex total{};                  // F1(inf)
    std::vector<Complex> interior;    // weight of a node m steps back; [0] is the current node
    std::vector<Complex> endpoint;    // weight of y(0) after m steps
    double abs_integral{0.0};         // int |F| over the covered range

    [[nodiscard]] std::size_t intervals() const { return endpoint.empty() ? 0 : endpoint.size() - 1; }
};

namespace detail {

struct IntervalMoments {
    Complex I0, left, right;
};

inline KernelMoments assemble_moments(const std::vector<IntervalMoments>& m, double dt, std::optional<Complex> total,
                                      double abs_integral) {
    const std::size_t n = m.size();
    KernelMoments out;
    out.dt = dt;
    out.abs_integral = abs_integral;
    if (total) {
        out.total = *total;
    } else {
        for (const auto& x : m) out.total += x.I0;
    }
    std::vector<Complex> left(n + 1), right(n + 1);
    Complex R = -out.total;
    for (std::size_t k = 0; k < n; ++k) {
        right[k] = R * (0.5 * dt) + m[k].right;
        left[k + 1] = R * (0.5 * dt) + m[k].left;
        R += m[k].I0;
    }
    out.interior.assign(n + 1, Complex{});
    out.endpoint.assign(n + 1, Complex{});
    out.interior[0] = right[0];
    for (std::size_t k = 1; k <= n; ++k) {
        out.interior[k] = left[k] + (k < n ? right[k] : Complex{});
        out.endpoint[k] = left[k];
    }
    return out;
}

}  // namespace detail

/// Kernel given analytically or as a table; produces moments for any compatible step.
struct KernelSource {
    std::function<Complex(double)> function;
    std::vector<Complex> table;
    double table_dt{0.0};
    std::optional<Complex> total;

    static KernelSource analytic(std::function<Complex(double)> f, std::optional<Complex> total = std::nullopt) {
        KernelSource s;
        s.function = std::move(f);
        s.total = total;
        return s;
    }

    static KernelSource tabulated(std::vector<Complex> values, double dt) {
        KernelSource s;
        s.table = std::move(values);
        s.table_dt = dt;
        return s;
    }

    /// Uses the closed form when the kernel carries one.
    static KernelSource from_kernel(const Kernel& k) {
        if (k.has_closed_form()) return analytic(k.closed_form);
        return tabulated(k.values, k.grid.dt);
    }

    [[nodiscard]] KernelMoments moments(double dt, std::size_t intervals) const {
        std::vector<detail::IntervalMoments> m(intervals);
        double abs_integral = 0.0;
        if (function) {
            const double scale = std::abs(function(0.0)) + std::abs(function(dt));
            const double atol = 1e-16 * (scale > 0.0 ? scale : 1.0) * dt;
            for (std::size_t k = 0; k < intervals; ++k) {
                const double a = static_cast<double>(k) * dt, b = a + dt;
                const auto& f = function;
                m[k].I0 = quad::adaptive(f, a, b, atol, 1e-13).value;
                m[k].left = quad::adaptive(
                                [&](double w) { return f(w) * ((dt * dt - (w - a) * (w - a)) / (2.0 * dt)); }, a, b,
                                atol * dt, 1e-13)
                                .value;
                m[k].right =
                    quad::adaptive([&](double w) { return f(w) * ((b - w) * (b - w) / (2.0 * dt)); }, a, b,
                                   atol * dt, 1e-13)
                        .value;
                abs_integral += quad::adaptive([&](double w) { return std::abs(f(w)); }, a, b, atol, 1e-8).value;
            }
        } else {
            require(table_dt > 0.0, "KernelSource: empty kernel");
            const double ratio = dt / table_dt;
            const auto stride = static_cast<std::size_t>(std::llround(ratio));
            require(stride >= 1 && std::abs(ratio - static_cast<double>(stride)) < 1e-9,
                    "KernelSource: step must be a whole multiple of the table step");
            require(intervals * stride < table.size(), "KernelSource: table shorter than the solve");
            for (std::size_t k = 0; k < intervals; ++k) {
                const Complex f0 = table[k * stride], f1 = table[(k + 1) * stride], df = f1 - f0;
                m[k].I0 = 0.5 * dt * (f0 + f1);
                m[k].left = dt * dt * (f0 / 3.0 + df / 8.0);
                m[k].right = dt * dt * (f0 / 6.0 + df / 24.0);
                abs_integral += 0.5 * dt * (std::abs(f0) + std::abs(f1));
            }
        }
        return detail::assemble_moments(m, dt, total, abs_integral);
    }
};

/// One nonzero entry F(row, col) = factor * kernel.
struct MemoryEntry {
    std::size_t row{0}, col{0};
    KernelSource kernel;
    Complex factor{1.0, 0.0};
    std::size_t horizon{0};  // steps of history for this entry; 0 uses the solver's horizon
};

struct VolterraProblem {
    std::size_t dimension{1};
    std::function<Matrix(double)> drift;                      // A(t); empty means zero
    std::vector<MemoryEntry> memory;
    std::function<Vector(double)> forcing;                    // b(t); empty means zero
    std::function<Vector(double, double)> forcing_increment;  // exact int_a^b b, preferred when set
    std::function<Matrix(double, const Matrix&)> nonlinear;   // N(t, y); empty means linear
    Matrix initial;                                           // dimension x columns
    TimeGrid grid;
    std::size_t memory_horizon{0};                            // steps of history kept; 0 keeps all
};

struct SolutionSeries {
    TimeGrid grid;
    std::vector<Matrix> states;
    double error_estimate{0.0};
    std::vector<std::string> warnings;
};

/// Stepper with precomputed moments; reusable across solves that share kernels and step.
class VolterraIntegrator {
  public:
    struct Entry {
        std::size_t row, col;
        Complex factor;
        std::size_t moments;
        std::size_t horizon;
    };

    VolterraIntegrator(std::size_t dimension, double dt, std::size_t horizon = 0)
        : dim_(dimension), dt_(dt), horizon_(horizon) {
        require(dimension >= 1, "Volterra: dimension must be positive");
        require(dt > 0.0, "Volterra: dt must be positive");
    }

    /// Precomputes moments covering `steps` steps (or the horizon, if shorter).
    void set_memory(const std::vector<MemoryEntry>& entries, std::size_t steps) {
        owned_.clear();
        entries_.clear();
        steps_ = steps;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            require(e.row < dim_ && e.col < dim_, "Volterra: memory entry outside the state");
            const std::size_t h = e.horizon > 0 ? e.horizon : horizon_;
            const std::size_t span = h > 0 ? std::min(steps, h) : steps;
            owned_.push_back(e.kernel.moments(dt_, span));
            entries_.push_back({e.row, e.col, e.factor, i, h > 0 && h < steps ? h : 0});
        }
    }

    [[nodiscard]] double memory_abs_integral() const {
        double s = 0.0;
        for (const auto& e : entries_) s += std::abs(e.factor) * owned_[e.moments].abs_integral;
        return s;
    }

    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }

    /// Runs `steps` steps from y0. `drift` and the other callables receive local time.
    /// `observe(n, y_n)` is called for every node including n = 0.
    template <typename Observer>
    void run(const Matrix& y0, std::size_t steps, const std::function<Matrix(double)>& drift,
             const std::function<Vector(double, double)>& forcing_increment,
             const std::function<Matrix(double, const Matrix&)>& nonlinear, Observer&& observe) const {
        require(static_cast<std::size_t>(y0.rows()) == dim_, "Volterra: initial state has wrong dimension");
        require(steps <= steps_, "Volterra: memory moments do not cover the solve");
        const auto cols = static_cast<std::size_t>(y0.cols());
        const std::size_t ne = entries_.size();

        // Flat history of the rows read by the memory entries.
        std::vector<std::vector<Complex>> rows(ne);
        for (auto& r : rows) r.reserve((steps + 1) * cols);
        auto push_history = [&](const Matrix& y) {
            for (std::size_t e = 0; e < ne; ++e)
                for (std::size_t k = 0; k < cols; ++k) rows[e].push_back(y(entries_[e].col, k));
        };

        Matrix B = Matrix::Zero(dim_, dim_);
        for (const auto& e : entries_) B(e.row, e.col) += e.factor * (owned_[e.moments].total * (0.5 * dt_) + owned_[e.moments].interior[0]);

        auto local = [&](double t, const Matrix& y) -> Matrix {
            Matrix l = drift ? Matrix(drift(t) * y) : Matrix::Zero(dim_, cols);
            if (nonlinear) l += nonlinear(t, y);
            return l;
        };

        Matrix y = y0;
        Matrix y_prev = y0;
        Matrix P = local(0.0, y0) * (0.5 * dt_);  // dt * (L0/2 + L1 + ... + L_{n-1})
        Matrix Q = y0 * (0.5 * dt_);              // same for y
        Matrix forcing_total = Matrix::Zero(dim_, cols);
        push_history(y0);
        observe(std::size_t{0}, y0);

        std::vector<Complex> acc(cols);
        Eigen::PartialPivLU<Matrix> lu;
        for (std::size_t n = 1; n <= steps; ++n) {
            const double t = static_cast<double>(n) * dt_;
            if (forcing_increment) forcing_total.colwise() += forcing_increment(t - dt_, t);

            Matrix rhs = y0 + P + forcing_total;
            for (std::size_t e = 0; e < ne; ++e) {
                const auto& en = entries_[e];
                const std::size_t H = en.horizon;
                const std::size_t lo = (H > 0 && n > H) ? n - H : 1;
                const auto& mom = owned_[en.moments];
                std::fill(acc.begin(), acc.end(), Complex{});
                const Complex* h = rows[e].data();
                for (std::size_t j = lo; j < n; ++j) {
                    const Complex w = mom.interior[n - j];
                    const Complex* hj = h + j * cols;
                    for (std::size_t k = 0; k < cols; ++k) acc[k] += w * hj[k];
                }
                if (H == 0 || n <= H) {
                    const Complex w = mom.endpoint[n];
                    for (std::size_t k = 0; k < cols; ++k) acc[k] += w * h[k];
                }
                for (std::size_t k = 0; k < cols; ++k)
                    rhs(en.row, k) -= en.factor * (acc[k] + mom.total * Q(en.col, k));
            }

            Matrix system = Matrix::Identity(dim_, dim_) + B;
            if (drift) system -= drift(t) * (0.5 * dt_);
            lu.compute(system);
            if (nonlinear) {
                Matrix guess = n >= 2 ? Matrix(2.0 * y - y_prev) : y;
                bool converged = false;
                for (int iter = 0; iter < 100; ++iter) {
                    Matrix next = lu.solve(rhs + nonlinear(t, guess) * (0.5 * dt_));
                    const double change = (next - guess).norm();
                    guess = std::move(next);
                    if (change <= 1e-14 * (1.0 + guess.norm())) {
                        converged = true;
                        break;
                    }
                }
                if (!converged) throw SolverError("Volterra: nonlinear iteration failed at step " + std::to_string(n));
                y_prev = y;
                y = std::move(guess);
            } else {
                y_prev = y;
                y = lu.solve(rhs);
            }
            if (!y.allFinite()) throw SolverError("Volterra: non-finite state at step " + std::to_string(n));

            P += local(t, y) * dt_;
            Q += y * dt_;
            push_history(y);
            observe(n, y);
        }
    }

  private:
    std::size_t dim_;
    double dt_;
    std::size_t horizon_;
    std::size_t steps_{0};
    std::vector<KernelMoments> owned_;
    std::vector<Entry> entries_;
};

namespace detail {

inline SolutionSeries solve_on(const VolterraProblem& problem, const TimeGrid& grid) {
    VolterraIntegrator integrator(problem.dimension, grid.dt, problem.memory_horizon);
    const std::size_t steps = grid.size - 1;
    integrator.set_memory(problem.memory, steps);

    std::function<Vector(double, double)> increment = problem.forcing_increment;
    if (!increment && problem.forcing) {
        const auto& b = problem.forcing;
        increment = [&b](double a, double c) { return Vector(0.5 * (c - a) * (b(a) + b(c))); };
    }

    SolutionSeries out;
    out.grid = grid;
    out.states.resize(grid.size);
    integrator.run(problem.initial, steps, problem.drift, increment, problem.nonlinear,
                   [&](std::size_t n, const Matrix& y) { out.states[n] = y; });

    double drift_norm = 0.0;
    if (problem.drift) drift_norm = problem.drift(0.0).cwiseAbs().rowwise().sum().maxCoeff();
    const double heuristic = grid.dt * (drift_norm + integrator.memory_abs_integral());
    if (heuristic >= 1.0)
        out.warnings.push_back("stability heuristic dt*(|A| + int|F|) = " + std::to_string(heuristic) + " >= 1");
    return out;
}

}  // namespace detail

/// Solves the problem on its grid. With `estimate_error`, a second solve at step 2*dt gives a
/// Richardson estimate max|y_dt - y_2dt|/3 over the shared nodes.
inline SolutionSeries solve(const VolterraProblem& problem, bool estimate_error = false) {
    require(problem.dimension >= 1, "Volterra: dimension must be positive");
    require(static_cast<std::size_t>(problem.initial.rows()) == problem.dimension && problem.initial.cols() >= 1,
            "Volterra: initial state must be dimension x columns");
    require(problem.grid.size >= 1 && problem.grid.dt > 0.0, "Volterra: invalid grid");
    auto out = detail::solve_on(problem, problem.grid);
    if (estimate_error && problem.grid.size >= 5) {
        const auto coarse = detail::solve_on(problem, problem.grid.coarsened(2));
        double worst = 0.0;
        for (std::size_t i = 0; i < coarse.states.size(); ++i)
            worst = std::max(worst, (out.states[2 * i] - coarse.states[i]).cwiseAbs().maxCoeff());
        out.error_estimate = worst / 3.0;
    }
    return out;
}

/// y'' = c y + int_0^t f(t - s) y(s) ds + b(t), solved as the first-order system (y, y').
/// Returns states of shape 2 x 1 holding (y, y').
inline SolutionSeries solve_second_order(double c, const KernelSource& f, std::function<double(double)> b, double y0,
                                         double v0, const TimeGrid& grid, std::size_t horizon = 0,
                                         bool estimate_error = false) {
    VolterraProblem p;
    p.dimension = 2;
    Matrix A(2, 2);
    A << 0.0, 1.0, c, 0.0;
    p.drift = [A](double) { return A; };
    p.memory.push_back({1, 0, f, Complex(-1.0, 0.0)});
    if (b) {
        p.forcing = [b](double t) {
            Vector v(2);
            v << 0.0, b(t);
            return v;
        };
    }
    p.initial = Matrix(2, 1);
    p.initial << y0, v0;
    p.grid = grid;
    p.memory_horizon = horizon;
    return solve(p, estimate_error);
}

}  // namespace nmoc
