#pragma once

// Adaptive Gauss-Kronrod and fixed Gauss-Legendre rules for real and complex integrands.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <queue>
#include <type_traits>
#include <vector>

#include "nmoc/types.hpp"

namespace nmoc::quad {

template <typename T>
struct Result {
    T value{};
    double error{0.0};
    bool converged{true};
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_x{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_w{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_w{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename T>
struct Segment {
    double a, b;
    T value;
    double error;
    bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename T, typename F>
Segment<T> kronrod15(F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    T fc = f(center);
    T kronrod = fc * kronrod_w[7];
    T gauss = fc * gauss_w[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kronrod_x[j];
        const T sum = f(center - dx) + f(center + dx);
        kronrod += kronrod_w[j] * sum;
        if (j % 2 == 1) gauss += gauss_w[j / 2] * sum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive G7-K15 quadrature of f over [a, b].
/// Stops when the summed error estimate drops below max(abs_tol, rel_tol * |I|).
template <typename F, typename T = std::invoke_result_t<F&, double>>
Result<T> adaptive(F&& f, double a, double b, double abs_tol = 1e-13, double rel_tol = 1e-12,
                   int max_segments = 4000) {
    if (a == b) return {T{}, 0.0, true};
    std::priority_queue<detail::Segment<T>> queue;
    auto first = detail::kronrod15<T>(f, a, b);
    T total = first.value;
    double error = first.error;
    queue.push(first);
    int segments = 1;
    while (error > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (segments >= max_segments) return {total, error, false};
        auto worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) return {total, error, false};
        auto left = detail::kronrod15<T>(f, worst.a, mid);
        auto right = detail::kronrod15<T>(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
        ++segments;
    }
    return {total, error, true};
}

/// Adaptive quadrature over consecutive breakpoints; tolerances apply to each piece.
template <typename F, typename T = std::invoke_result_t<F&, double>>
Result<T> adaptive_pieces(F&& f, const std::vector<double>& breakpoints, double abs_tol = 1e-13,
                          double rel_tol = 1e-12, int max_segments = 4000) {
    Result<T> out{};
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        auto piece = adaptive(f, breakpoints[i], breakpoints[i + 1], abs_tol, rel_tol, max_segments);
        out.value += piece.value;
        out.error += piece.error;
        out.converged = out.converged && piece.converged;
    }
    return out;
}

/// n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n) : nodes(n), weights(n) {
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    template <typename F, typename T = std::invoke_result_t<F&, double>>
    T integrate(F&& f, double a, double b) const {
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        T sum{};
        for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(c + h * nodes[i]);
        return sum * h;
    }
};

/// I0 = int_0^1 e^{-i theta x} dx, I1 = int_0^1 x e^{-i theta x} dx.
inline void linear_moments(double theta, std::complex<double>& i0, std::complex<double>& i1) {
    const std::complex<double> c(0.0, -theta);
    if (std::abs(theta) < 0.5) {
        std::complex<double> term(1.0, 0.0);
        i0 = 0.0;
        i1 = 0.0;
        double fact = 1.0;
        for (int k = 0; k < 18; ++k) {
            if (k > 0) fact *= k;
            i0 += term / (fact * (k + 1));
            i1 += term / (fact * (k + 2));
            term *= c;
        }
        return;
    }
    const std::complex<double> e = std::exp(c);
    i0 = (e - 1.0) / c;
    i1 = (e * (c - 1.0) + 1.0) / (c * c);
}

/// Piecewise-linear model of a complex density on adaptively refined panels, integrated
/// exactly against e^{-i w t} (linear Filon rule).
class OscillatoryTable {
  public:
    /// Refines each panel until the midpoint deviation from linear interpolation, times
    /// the panel width, is below `tol`.
    template <typename F>
    OscillatoryTable(F&& density, std::vector<double> breakpoints, double tol, double min_width = 1e-9,
                     int max_nodes = 400000) {
        std::sort(breakpoints.begin(), breakpoints.end());
        breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
        if (breakpoints.size() < 2) throw ParameterError("OscillatoryTable: need an interval");
        nodes_.push_back(breakpoints.front());
        values_.push_back(density(breakpoints.front()));
        for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
            const double a = breakpoints[i], b = breakpoints[i + 1];
            refine(density, a, b, values_.back(), density(b), tol, min_width, max_nodes);
        }
    }

    [[nodiscard]] std::complex<double> integrate(double t) const {
        std::complex<double> sum{};
        for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
            const double a = nodes_[k], h = nodes_[k + 1] - a;
            const double theta = t * h;
            std::complex<double> i0, i1;
            linear_moments(theta, i0, i1);
            const std::complex<double> phase = std::polar(1.0, -a * t);
            sum += h * phase * (values_[k] * (i0 - i1) + values_[k + 1] * i1);
        }
        return sum;
    }

    [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<std::complex<double>>& values() const { return values_; }
    [[nodiscard]] bool converged() const { return converged_; }

  private:
    template <typename F>
    void refine(F& density, double a, double b, std::complex<double> fa, std::complex<double> fb, double tol,
                double min_width, int max_nodes) {
        struct Panel {
            double a, b;
            std::complex<double> fa, fb;
        };
        std::vector<Panel> stack{{a, b, fa, fb}};
        while (!stack.empty()) {
            Panel p = stack.back();
            stack.pop_back();
            const double m = 0.5 * (p.a + p.b);
            const std::complex<double> fm = density(m);
            const double dev = std::abs(fm - 0.5 * (p.fa + p.fb)) * (p.b - p.a);
            const bool too_many = static_cast<int>(nodes_.size()) >= max_nodes;
            if (dev <= tol || p.b - p.a <= min_width || too_many) {
                if (dev > tol) converged_ = false;
                nodes_.push_back(m);
                values_.push_back(fm);
                nodes_.push_back(p.b);
                values_.push_back(p.fb);
                continue;
            }
            stack.push_back({m, p.b, fm, p.fb});
            stack.push_back({p.a, m, p.fa, fm});
        }
    }

    std::vector<double> nodes_;
    std::vector<std::complex<double>> values_;
    bool converged_{true};
};

}  // namespace nmoc::quad
