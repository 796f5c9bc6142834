#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmoc {

using Complex = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr Complex I{0.0, 1.0};

/// Invalid physical or numerical parameters supplied by the caller.
class ParameterError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical method failed to converge or produced non-finite values.
class SolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Uniform time grid t_i = i * dt, i = 0 .. size-1.
struct TimeGrid {
    double dt{0.0};
    std::size_t size{0};

    TimeGrid() = default;
    TimeGrid(double step, std::size_t points) : dt(step), size(points) {
        if (!(step > 0.0) || !std::isfinite(step)) throw ParameterError("TimeGrid: dt must be positive");
        if (points < 1) throw ParameterError("TimeGrid: at least one point required");
    }

    /// Grid covering [0, t_max] with the given step (t_max rounded up to a whole step).
    static TimeGrid covering(double t_max, double step) {
        if (!(t_max >= 0.0)) throw ParameterError("TimeGrid: t_max must be non-negative");
        const auto steps = static_cast<std::size_t>(std::ceil(t_max / step - 1e-9));
        return TimeGrid(step, steps + 1);
    }

    /// Grid with exactly `points` points spanning [0, t_max].
    static TimeGrid spanning(double t_max, std::size_t points) {
        if (points < 2) throw ParameterError("TimeGrid: need at least two points to span an interval");
        return TimeGrid(t_max / static_cast<double>(points - 1), points);
    }

    [[nodiscard]] double t(std::size_t i) const noexcept { return static_cast<double>(i) * dt; }
    [[nodiscard]] double t_max() const noexcept { return t(size - 1); }

    /// Every `stride`-th point of this grid.
    [[nodiscard]] TimeGrid coarsened(std::size_t stride) const {
        if (stride == 0) throw ParameterError("TimeGrid: stride must be positive");
        return TimeGrid(dt * static_cast<double>(stride), (size - 1) / stride + 1);
    }
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ParameterError(message);
}

}  // namespace nmoc
