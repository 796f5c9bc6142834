#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nmoc/bound_state.hpp"
#include "nmoc/classical.hpp"
#include "nmoc/params.hpp"
#include "nmoc/quadrature.hpp"
#include "nmoc/spectral.hpp"
#include "nmoc/volterra.hpp"

namespace nmoc {

using Mat4 = Eigen::Matrix4cd;
using RealMat4 = Eigen::Matrix4d;

/// (da, da+, dq, dp) -> (dx_c, dp_c, dq, dp) with x = (a + a+)/sqrt2, p = (a - a+)/(i sqrt2).
inline Mat4 quadrature_map() {
    const double r = 1.0 / std::sqrt(2.0);
    Mat4 S = Mat4::Zero();
    S(0, 0) = r;
    S(0, 1) = r;
    S(1, 0) = -I * r;
    S(1, 1) = I * r;
    S(2, 2) = 1.0;
    S(3, 3) = 1.0;
    return S;
}

inline RealMat4 symplectic_form() {
    RealMat4 W = RealMat4::Zero();
    W(0, 1) = W(2, 3) = 1.0;
    W(1, 0) = W(3, 2) = -1.0;
    return W;
}

/// Smallest eigenvalue of V + i Omega/2; negative values signal an unphysical state.
inline double uncertainty_eigenvalue(const RealMat4& V) {
    Mat4 H = V.cast<Complex>() + 0.5 * I * symplectic_form().cast<Complex>();
    H = 0.5 * (H + H.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Mat4> es(H, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

/// Linearized drift M(t) in the cavity frame nu, sampled on the nodes of the classical orbit.
struct DriftMatrix {
    double g0{0.0}, Delta_c{0.0}, Delta_m{1.0}, omega_m{1.0}, nu{0.0};
    TimeGrid grid;
    std::vector<Complex> alpha;  // frame amplitude
    std::vector<double> q;

    static DriftMatrix from_orbit(const SystemParams& sys, const ClassicalTrajectory& orbit) {
        require(orbit.mode == OrbitMode::direct, "DriftMatrix: expected a direct orbit");
        DriftMatrix d;
        d.g0 = sys.g0;
        d.Delta_c = sys.Delta_c();
        d.Delta_m = sys.Delta_m;
        d.omega_m = sys.omega_m;
        d.nu = orbit.frame;
        d.grid = orbit.grid;
        d.alpha.resize(orbit.grid.size);
        for (std::size_t i = 0; i < orbit.grid.size; ++i)
            d.alpha[i] = orbit.alpha0[i] * std::polar(1.0, d.nu * orbit.grid.t(i));
        d.q = orbit.q0;
        return d;
    }

    [[nodiscard]] Mat4 at(std::size_t n) const {
        Mat4 M = Mat4::Zero();
        const Complex a = alpha[n];
        M(0, 0) = -I * (Delta_c - g0 * q[n] - nu);
        M(1, 1) = std::conj(M(0, 0));
        M(0, 2) = I * g0 * a;
        M(1, 2) = -I * g0 * std::conj(a);
        M(2, 3) = omega_m;
        M(3, 0) = g0 * std::conj(a);
        M(3, 1) = g0 * a;
        M(3, 2) = -Delta_m;
        return M;
    }
};

/// Memory matrix F(u): f_c e^{i nu u} and its conjugate on the cavity diagonal, -f_m in (p, q).
struct MemoryMatrix {
    SpectralParams pc, pm;
    double omega0{0.0}, nu{0.0};
    std::size_t cavity_horizon{0}, mechanical_horizon{0};

    /// Entries of F, or of F^T for the adjoint problem.
    [[nodiscard]] std::vector<MemoryEntry> entries(bool transposed = false) const {
        std::vector<MemoryEntry> out;
        if (pc.eta > 0.0) {
            const auto k = rotated_cavity_kernel(pc, omega0, nu);
            const Complex total = cavity_kernel_integral(pc, omega0, nu);
            const auto p = pc;
            const double shift = omega0 + nu;
            const auto kc = KernelSource::analytic(
                [p, shift](double u) { return std::conj(cavity_kernel_value(p, shift, u)); }, std::conj(total));
            out.push_back({0, 0, k, Complex(1.0, 0.0), cavity_horizon});
            out.push_back({1, 1, kc, Complex(1.0, 0.0), cavity_horizon});
        }
        if (pm.eta > 0.0) {
            if (transposed)
                out.push_back({2, 3, mechanical_kernel_source(pm), Complex(-1.0, 0.0), mechanical_horizon});
            else
                out.push_back({3, 2, mechanical_kernel_source(pm), Complex(-1.0, 0.0), mechanical_horizon});
        }
        return out;
    }
};

/// Bath state: inverse temperatures, inf for vacuum.
struct NoiseModel {
    SpectralParams pc, pm;
    double omega0{0.0}, nu{0.0};
    double beta_c{std::numeric_limits<double>::infinity()};
    double beta_m{std::numeric_limits<double>::infinity()};
};

/// Propagator U(t) of the homogeneous equation in the frame, U(0) = I, on every node.
inline std::vector<Mat4> propagator(const DriftMatrix& drift, const MemoryMatrix& memory, std::size_t horizon = 0) {
    const TimeGrid& grid = drift.grid;
    VolterraIntegrator integ(4, grid.dt, horizon);
    integ.set_memory(memory.entries(), grid.size - 1);
    std::vector<Mat4> out(grid.size);
    const double dt = grid.dt;
    integ.run(Matrix::Identity(4, 4), grid.size - 1,
              [&](double t) { return Matrix(drift.at(static_cast<std::size_t>(std::llround(t / dt)))); }, {}, {},
              [&](std::size_t n, const Matrix& y) { out[n] = y; });
    return out;
}

/// G(t_i, s_j) for subgrid nodes s_j <= t_i, stored as a lower triangle.
struct TwoTimePropagator {
    TimeGrid fine;
    std::size_t stride{1};
    std::size_t nodes{0};
    std::vector<Mat4> data;

    [[nodiscard]] const Mat4& operator()(std::size_t i, std::size_t j) const { return data[i * (i + 1) / 2 + j]; }
    Mat4& operator()(std::size_t i, std::size_t j) { return data[i * (i + 1) / 2 + j]; }

    /// Row i: G(t_i, s_j) for j = 0..i.
    [[nodiscard]] std::vector<Mat4> row(std::size_t i) const {
        return {data.begin() + static_cast<std::ptrdiff_t>(i * (i + 1) / 2),
                data.begin() + static_cast<std::ptrdiff_t>(i * (i + 1) / 2 + i + 1)};
    }
};

inline double two_time_storage_bytes(std::size_t sub_nodes) {
    return static_cast<double>(sub_nodes) * static_cast<double>(sub_nodes + 1) / 2.0 * sizeof(Mat4);
}

/// Forward solves from every subgrid source; refuses when storage would exceed `cap_bytes`.
inline TwoTimePropagator two_time_propagator(const DriftMatrix& drift, const MemoryMatrix& memory, std::size_t stride,
                                             double cap_bytes = 2e9, std::size_t horizon = 0) {
    const TimeGrid& grid = drift.grid;
    require(stride >= 1, "two_time_propagator: stride must be positive");
    require((grid.size - 1) % stride == 0, "two_time_propagator: grid steps must be a multiple of the stride");
    TwoTimePropagator G;
    G.fine = grid;
    G.stride = stride;
    G.nodes = (grid.size - 1) / stride + 1;
    const double need = two_time_storage_bytes(G.nodes);
    if (need > cap_bytes)
        throw SolverError("two_time_propagator: needs " + std::to_string(need / 1e9) +
                          " GB, above the cap; use a larger stride or adjoint rows");
    G.data.resize(G.nodes * (G.nodes + 1) / 2);

    VolterraIntegrator integ(4, grid.dt, horizon);
    integ.set_memory(memory.entries(), grid.size - 1);
    const double dt = grid.dt;
    for (std::size_t j = 0; j < G.nodes; ++j) {
        const std::size_t start = j * stride;
        const std::size_t steps = grid.size - 1 - start;
        integ.run(Matrix::Identity(4, 4), steps,
                  [&](double t) { return Matrix(drift.at(start + static_cast<std::size_t>(std::llround(t / dt)))); },
                  {}, {}, [&](std::size_t n, const Matrix& y) {
                      if (n % stride == 0) G(j + n / stride, j) = y;
                  });
    }
    return G;
}

/// Solver for the adjoint equation: K(tau) = G(t, t - tau)^T obeys a forward equation with
/// drift M(t - tau)^T and memory F^T.
class AdjointRows {
  public:
    AdjointRows(const DriftMatrix& drift, const MemoryMatrix& memory, std::size_t horizon = 0)
        : drift_(drift), integ_(4, drift.grid.dt, horizon) {
        integ_.set_memory(memory.entries(true), drift.grid.size - 1);
    }

    /// G(t_I, s_j) on s_j = j * stride * dt, j = 0..I/stride.
    [[nodiscard]] std::vector<Mat4> row(std::size_t fine_index, std::size_t stride) const {
        require(fine_index < drift_.grid.size, "AdjointRows: time outside the orbit");
        require(fine_index % stride == 0, "AdjointRows: time must lie on the subgrid");
        const double dt = drift_.grid.dt;
        std::vector<Mat4> out(fine_index / stride + 1);
        integ_.run(
            Matrix::Identity(4, 4), fine_index,
            [&](double tau) {
                const auto k = static_cast<std::size_t>(std::llround(tau / dt));
                return Matrix(drift_.at(fine_index - k).transpose());
            },
            {}, {},
            [&](std::size_t n, const Matrix& y) {
                const std::size_t s = fine_index - n;
                if (s % stride == 0) out[s / stride] = y.transpose();
            });
        return out;
    }

  private:
    const DriftMatrix& drift_;
    VolterraIntegrator integ_;
};

/// Product weights of a stationary correlation g(tau) = int S(w) e^{-i w tau} dw against the
/// hat functions on a grid of step h: P_pq(m) = int_0^h int_0^h l_p(x) l_q(y) g(mh + x - y) dx dy,
/// with l_0 = 1 - x/h and l_1 = x/h.
struct StationaryWeights {
    double h{0.0};
    long max_lag{0};
    std::array<std::vector<Complex>, 4> P;  // 00, 01, 10, 11; index m + max_lag

    [[nodiscard]] Complex at(int p, int q, long m) const { return P[2 * p + q][m + max_lag]; }
};

/// Folds the spectrum modulo 2pi/h and sums the lags with one FFT.
inline StationaryWeights stationary_weights(const NoiseSpectrum& S, double h, long max_lag) {
    StationaryWeights W;
    W.h = h;
    W.max_lag = max_lag;
    for (auto& v : W.P) v.assign(2 * max_lag + 1, Complex{});
    if (S.empty()) return W;
    const double period = 2.0 * pi / h;
    std::size_t K = 1024;
    while (K < 16 * static_cast<std::size_t>(2 * max_lag + 1)) K *= 2;
    // The spectrum must also be resolved on its own scale.
    while ((period / static_cast<double>(K)) * (S.hi - S.lo) > 4.0 * static_cast<double>(K) && K < (1u << 24)) K *= 2;
    const double dw = period / static_cast<double>(K);
    std::array<std::vector<Complex>, 4> phi;
    for (auto& v : phi) v.assign(K, Complex{});
    const long kmin = static_cast<long>(std::floor(S.lo / period)) - 1;
    const long kmax = static_cast<long>(std::ceil(S.hi / period)) + 1;
    for (std::size_t n = 0; n < K; ++n) {
        const double base = static_cast<double>(n) * dw;
        for (long k = kmin; k <= kmax; ++k) {
            const double w = base + static_cast<double>(k) * period;
            if (w < S.lo || w > S.hi) continue;
            const double s = S.density(w);
            if (s == 0.0) continue;
            Complex i0, i1;
            quad::linear_moments(w * h, i0, i1);
            const Complex L[2] = {h * (i0 - i1), h * i1};
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q) phi[2 * p + q][n] += s * L[p] * std::conj(L[q]);
        }
    }
    Eigen::FFT<double> fft;
    std::vector<Complex> out;
    for (int pq = 0; pq < 4; ++pq) {
        fft.fwd(out, phi[pq]);
        for (long m = -max_lag; m <= max_lag; ++m) {
            const std::size_t idx = static_cast<std::size_t>((m % static_cast<long>(K) + static_cast<long>(K)) %
                                                             static_cast<long>(K));
            W.P[pq][m + max_lag] = dw * out[idx];
        }
    }
    return W;
}

namespace detail {

/// y_a = sum_b c(a - b) x_b for a, b < n, by circular convolution on a fixed FFT length.
class ToeplitzProduct {
  public:
    ToeplitzProduct() = default;

    /// `kernel(m)` for |m| <= max_n - 1.
    template <typename F>
    ToeplitzProduct(F&& kernel, std::size_t max_n) : max_n_(max_n) {
        length_ = 2;
        while (length_ < 2 * max_n) length_ *= 2;
        std::vector<Complex> c(length_, Complex{});
        const long span = static_cast<long>(max_n) - 1;
        for (long m = -span; m <= span; ++m)
            c[static_cast<std::size_t>((m + static_cast<long>(length_)) % static_cast<long>(length_))] = kernel(m);
        fft_.fwd(spectrum_, c);
    }

    [[nodiscard]] std::size_t length() const { return length_; }
    [[nodiscard]] const std::vector<Complex>& spectrum() const { return spectrum_; }

    /// Zero-padded transform of x.
    [[nodiscard]] std::vector<Complex> transform(const std::vector<Complex>& x) const {
        require(x.size() <= max_n_, "ToeplitzProduct: vector longer than the kernel span");
        std::vector<Complex> in(length_, Complex{}), out;
        std::copy(x.begin(), x.end(), in.begin());
        fft_.fwd(out, in);
        return out;
    }

    [[nodiscard]] std::vector<Complex> inverse(const std::vector<Complex>& X, std::size_t n) const {
        std::vector<Complex> out;
        fft_.inv(out, X);
        out.resize(n);
        return out;
    }

  private:
    std::size_t max_n_{0}, length_{0};
    std::vector<Complex> spectrum_;
    mutable Eigen::FFT<double> fft_;
};

/// Sum over grid intervals a, b and hat indices p, q of P_pq(a - b) x_{a+p} y_{b+q}^T.
class StationaryForm {
  public:
    StationaryForm() = default;
    StationaryForm(const StationaryWeights& W, std::size_t max_nodes, bool conjugate = false) : active_(true) {
        const std::size_t n_int = max_nodes > 1 ? max_nodes - 1 : 1;
        require(static_cast<long>(n_int) - 1 <= W.max_lag, "StationaryForm: weights do not cover the lags");
        for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q) {
                auto k = [&](long m) { return conjugate ? std::conj(W.at(p, q, m)) : W.at(p, q, m); };
                T_[2 * p + q] = ToeplitzProduct(k, n_int);
            }
    }

    [[nodiscard]] bool active() const { return active_; }

    /// x[j], y[j] are 4-vectors on nodes j = 0..n-1.
    [[nodiscard]] Mat4 apply(const std::vector<Eigen::Vector4cd>& x, const std::vector<Eigen::Vector4cd>& y) const {
        Mat4 out = Mat4::Zero();
        const std::size_t n = x.size();
        if (!active_ || n < 2) return out;
        const std::size_t ni = n - 1;
        const std::size_t L = T_[0].length();
        for (int c = 0; c < 4; ++c) {
            std::vector<Complex> y0(ni), y1(ni);
            for (std::size_t b = 0; b < ni; ++b) {
                y0[b] = y[b](c);
                y1[b] = y[b + 1](c);
            }
            const auto Y0 = T_[0].transform(y0);
            const auto Y1 = T_[0].transform(y1);
            for (int p = 0; p < 2; ++p) {
                std::vector<Complex> Z(L);
                const auto& k0 = T_[2 * p].spectrum();
                const auto& k1 = T_[2 * p + 1].spectrum();
                for (std::size_t i = 0; i < L; ++i) Z[i] = k0[i] * Y0[i] + k1[i] * Y1[i];
                const auto z = T_[0].inverse(Z, ni);
                for (std::size_t a = 0; a < ni; ++a) out.col(c) += x[a + p] * z[a];
            }
        }
        return out;
    }

  private:
    bool active_{false};
    std::array<ToeplitzProduct, 4> T_;
};

}  // namespace detail

/// Ordered noise moment <zeta(t) zeta(t)^T> in the frame, zeta = int G(t, s) xi(s) ds, on subgrid rows.
///
/// The vacuum cavity noise is handled through the bare cavity: with a0 the bare Green's function,
/// xi_a filtered by the bare cavity equals N(s) with <N(s) N+(s')> = a0(s - s') - a0(s) a0*(s'),
/// and the dressed response adds int G(t, s) D(s) n(s) ds with D the coupling part of the drift.
class NoiseAssembler {
  public:
    NoiseAssembler(const NoiseModel& noise, const DriftMatrix& drift, std::vector<Complex> bare_cavity,
                   std::size_t stride, std::size_t max_nodes)
        : drift_(drift), stride_(stride), h_(drift.grid.dt * static_cast<double>(stride)) {
        require(bare_cavity.size() >= (max_nodes - 1) * stride + 1, "NoiseAssembler: bare cavity series too short");
        a0_.resize(max_nodes);
        for (std::size_t j = 0; j < max_nodes; ++j) a0_[j] = bare_cavity[j * stride];
        // Lag zero sits on the fast initial drop of a0; use the smooth continuation instead.
        const Complex lag0 = max_nodes > 2 ? (2.0 * a0_[1] - a0_[2]).real() : Complex(1.0, 0.0);
        const auto& a = a0_;
        auto ghat = [&a, lag0](long m) {
            if (m == 0) return lag0;
            return m > 0 ? a[static_cast<std::size_t>(m)] : std::conj(a[static_cast<std::size_t>(-m)]);
        };
        ghat_ = detail::ToeplitzProduct(ghat, max_nodes);
        lag0_ = lag0;
        const long lags = static_cast<long>(max_nodes);
        mech_ = detail::StationaryForm(stationary_weights(mechanical_noise_spectrum(noise.pm, noise.beta_m), h_, lags),
                                       max_nodes);
        const auto sc = cavity_thermal_spectrum(noise.pc, noise.omega0, noise.beta_c, noise.nu);
        if (!sc.empty()) {
            const auto Wc = stationary_weights(sc, h_, lags);
            cav_ = detail::StationaryForm(Wc, max_nodes);
            cav_conj_ = detail::StationaryForm(Wc, max_nodes, true);
        }
    }

    [[nodiscard]] double step() const { return h_; }

    /// `row[j]` = G(t_i, s_j) for j = 0..i.
    [[nodiscard]] Mat4 moment(const std::vector<Mat4>& row) const {
        const std::size_t n = row.size();
        const std::size_t i = n - 1;
        Mat4 N = Mat4::Zero();
        N(0, 1) = 1.0 - std::norm(a0_[i]);

        std::vector<Eigen::Vector4cd> e1(n), e2(n), e4(n);
        for (std::size_t j = 0; j < n; ++j) {
            e1[j] = row[j].col(0);
            e2[j] = row[j].col(1);
            e4[j] = row[j].col(3);
        }

        if (drift_.g0 != 0.0 && n > 1) {
            const double g0 = drift_.g0;
            std::vector<Eigen::Vector4cd> u(n), w(n);
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t k = j * stride_;
                const Complex al = drift_.alpha[k];
                const double q = drift_.q[k];
                const double tw = (j == 0 || j == i) ? 0.5 * h_ : h_;
                u[j] = tw * (I * g0 * q * e1[j] + g0 * std::conj(al) * e4[j]);
                w[j] = tw * (-I * g0 * q * e2[j] + g0 * al * e4[j]);
            }
            auto D = [&](std::size_t j, std::size_t k) {
                const Complex g = j == k ? lag0_ : (j > k ? a0_[j - k] : std::conj(a0_[k - j]));
                return g - a0_[j] * std::conj(a0_[k]);
            };
            Eigen::Vector4cd su = Eigen::Vector4cd::Zero(), sw = Eigen::Vector4cd::Zero();
            Eigen::Vector4cd ua = Eigen::Vector4cd::Zero(), wa = Eigen::Vector4cd::Zero();
            for (std::size_t j = 0; j < n; ++j) {
                su += u[j] * D(j, i);
                sw += w[j] * D(i, j);
                ua += u[j] * a0_[j];
                wa += w[j] * std::conj(a0_[j]);
            }
            N.col(1) += su;
            N.row(0) += sw.transpose();
            // Toeplitz part of the double integral.
            for (int c = 0; c < 4; ++c) {
                std::vector<Complex> wc(n);
                for (std::size_t k = 0; k < n; ++k) wc[k] = w[k](c);
                auto X = ghat_.transform(wc);
                const auto& K = ghat_.spectrum();
                for (std::size_t m = 0; m < X.size(); ++m) X[m] *= K[m];
                const auto y = ghat_.inverse(X, n);
                for (std::size_t j = 0; j < n; ++j) N.col(c) += u[j] * y[j];
            }
            N -= ua * wa.transpose();
        }

        N += mech_.apply(e4, e4);
        if (cav_.active()) N += cav_.apply(e1, e2) + cav_conj_.apply(e2, e1);
        return N;
    }

  private:
    const DriftMatrix& drift_;
    std::size_t stride_;
    double h_;
    std::vector<Complex> a0_;
    Complex lag0_{1.0, 0.0};
    detail::ToeplitzProduct ghat_;
    detail::StationaryForm mech_, cav_, cav_conj_;
};

/// Frame-free ordered initial moment S^-1 (V0 + i Omega/2) S^-T.
inline Mat4 initial_moment(const RealMat4& V0) {
    const Mat4 Si = quadrature_map().inverse();
    const Mat4 R = V0.cast<Complex>() + 0.5 * I * symplectic_form().cast<Complex>();
    return Si * R * Si.transpose();
}

/// Quadrature covariance from the ordered moment in the frame nu at time t.
inline RealMat4 covariance_from_moment(const Mat4& Q, double nu, double t) {
    Mat4 R = Mat4::Identity();
    R(0, 0) = std::polar(1.0, -nu * t);
    R(1, 1) = std::polar(1.0, nu * t);
    const Mat4 S = quadrature_map();
    const Mat4 C = S * R * Q * R * S.transpose();
    return (0.5 * (C + C.transpose())).real();
}

struct CovarianceSeries {
    std::vector<double> t;
    std::vector<RealMat4> V;
    std::vector<double> min_eig;  // smallest eigenvalue of V + i Omega/2
    double frame{0.0};
    std::vector<std::string> warnings;

    [[nodiscard]] double worst_asymmetry() const {
        double w = 0.0;
        for (const auto& v : V) w = std::max(w, (v - v.transpose()).cwiseAbs().maxCoeff());
        return w;
    }
    [[nodiscard]] double worst_min_eig() const {
        double w = std::numeric_limits<double>::infinity();
        for (double e : min_eig) w = std::min(w, e);
        return w;
    }
};

/// V(t) = Re sym S R (U Q0 U^T + N) R S^T for given frame propagator and noise moment.
inline RealMat4 covariance_at(const Mat4& U, const Mat4& noise, const Mat4& Q0, double nu, double t) {
    return covariance_from_moment(U * Q0 * U.transpose() + noise, nu, t);
}

struct CovarianceSetup {
    SystemParams sys;
    SpectralParams pc{0.0, 1.0, 1.0, BathKind::cavity};
    SpectralParams pm{0.0, 1.0, 1.0, BathKind::mechanical};
    double beta_c{std::numeric_limits<double>::infinity()};
    double beta_m{std::numeric_limits<double>::infinity()};
    RealMat4 V0{RealMat4::Identity() * 0.5};
};

struct CovarianceOptions {
    double dt{0.0};               // 0 selects default_step
    std::size_t stride{4};        // noise subgrid = every stride-th node
    std::size_t memory_horizon{0};
    std::size_t cavity_horizon{0};
    double storage_cap_bytes{2e9};
};

namespace detail {

struct FluctuationContext {
    DriftMatrix drift;
    MemoryMatrix memory;
    NoiseModel noise;
    std::vector<Complex> bare;  // bare cavity Green's function in the frame
};

inline FluctuationContext fluctuation_context(const CovarianceSetup& s, const TimeGrid& grid,
                                              const CovarianceOptions& opt) {
    s.sys.validate(s.pm);
    require(s.beta_c > 0.0 && s.beta_m > 0.0, "covariance: beta must be positive (use inf for vacuum)");
    require((s.V0 - s.V0.transpose()).cwiseAbs().maxCoeff() < 1e-12, "covariance: V0 must be symmetric");
    require(uncertainty_eigenvalue(s.V0) > -1e-12, "covariance: V0 violates the uncertainty relation");
    SolverOptions so;
    so.dt = grid.dt;
    so.memory_horizon = opt.memory_horizon;
    const auto orbit = direct_orbit(s.sys, s.pc, s.pm, grid, so);
    FluctuationContext c;
    c.drift = DriftMatrix::from_orbit(s.sys, orbit);
    c.memory = {s.pc, s.pm, s.sys.omega_0, orbit.frame, opt.cavity_horizon ? opt.cavity_horizon : opt.memory_horizon,
                opt.memory_horizon};
    c.noise = {s.pc, s.pm, s.sys.omega_0, orbit.frame, s.beta_c, s.beta_m};
    VolterraIntegrator integ(1, grid.dt, c.memory.cavity_horizon);
    std::vector<MemoryEntry> m;
    if (s.pc.eta > 0.0) m.push_back({0, 0, rotated_cavity_kernel(s.pc, s.sys.omega_0, orbit.frame)});
    integ.set_memory(m, grid.size - 1);
    Matrix A(1, 1);
    A(0, 0) = -I * (s.sys.Delta_c() - orbit.frame);
    c.bare.resize(grid.size);
    integ.run(Matrix::Identity(1, 1), grid.size - 1, [A](double) { return A; }, {}, {},
              [&](std::size_t n, const Matrix& y) { c.bare[n] = y(0, 0); });
    return c;
}

inline void finish(CovarianceSeries& out, const RealMat4& V, double t) {
    out.t.push_back(t);
    out.V.push_back(V);
    out.min_eig.push_back(uncertainty_eigenvalue(V));
}

}  // namespace detail

/// Covariance on [0, t_max] with `steps` fine steps, output on every stride-th node.
inline CovarianceSeries covariance_series(const CovarianceSetup& s, double t_max, std::size_t steps,
                                          const CovarianceOptions& opt = {}) {
    require(t_max > 0.0 && steps >= 1, "covariance: need a positive window and step count");
    require(steps % opt.stride == 0, "covariance: the step count must be a multiple of the stride");
    const TimeGrid grid{t_max / static_cast<double>(steps), steps + 1};
    const auto ctx = detail::fluctuation_context(s, grid, opt);
    const auto U = propagator(ctx.drift, ctx.memory, opt.memory_horizon);
    const auto G = two_time_propagator(ctx.drift, ctx.memory, opt.stride, opt.storage_cap_bytes, opt.memory_horizon);
    const NoiseAssembler noise(ctx.noise, ctx.drift, ctx.bare, opt.stride, G.nodes);
    const Mat4 Q0 = initial_moment(s.V0);
    CovarianceSeries out;
    out.frame = ctx.drift.nu;
    for (std::size_t i = 0; i < G.nodes; ++i) {
        const std::size_t k = i * opt.stride;
        detail::finish(out, covariance_at(U[k], noise.moment(G.row(i)), Q0, out.frame, grid.t(k)), grid.t(k));
    }
    return out;
}

/// Covariance at the subgrid times in [t_begin, t_end] through adjoint rows, for windows far
/// from t = 0 where the full two-time table would not fit.
inline CovarianceSeries covariance_window(const CovarianceSetup& s, double t_begin, double t_end, double dt,
                                          std::size_t output_every, const CovarianceOptions& opt = {}) {
    require(dt > 0.0 && t_end > t_begin && t_begin >= 0.0, "covariance_window: bad window");
    const auto last = static_cast<std::size_t>(std::ceil(t_end / dt / static_cast<double>(opt.stride))) * opt.stride;
    const TimeGrid grid{dt, last + 1};
    const auto ctx = detail::fluctuation_context(s, grid, opt);
    const auto U = propagator(ctx.drift, ctx.memory, opt.memory_horizon);
    const AdjointRows rows(ctx.drift, ctx.memory, opt.memory_horizon);
    const NoiseAssembler noise(ctx.noise, ctx.drift, ctx.bare, opt.stride, last / opt.stride + 1);
    const Mat4 Q0 = initial_moment(s.V0);
    CovarianceSeries out;
    out.frame = ctx.drift.nu;
    const std::size_t every = std::max<std::size_t>(1, output_every) * opt.stride;
    const auto first = static_cast<std::size_t>(std::ceil(t_begin / dt / static_cast<double>(every))) * every;
    for (std::size_t k = first; k <= last && grid.t(k) <= t_end + 0.5 * dt; k += every) {
        const auto row = rows.row(k, opt.stride);
        detail::finish(out, covariance_at(U[k], noise.moment(row), Q0, out.frame, grid.t(k)), grid.t(k));
    }
    return out;
}

}  // namespace nmoc
