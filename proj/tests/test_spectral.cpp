#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/special_functions/expint.hpp>

#include "nmoc/bound_state.hpp"
#include "nmoc/quadrature.hpp"
#include "nmoc/spectral.hpp"

using namespace nmoc;

namespace {

// int_0^inf u^s e^{-u} e^{-iku} du.
Complex laplace_oracle(double s, double k) {
    static boost::math::quadrature::ooura_fourier_sin<double> sin_rule(1e-13);
    static boost::math::quadrature::ooura_fourier_cos<double> cos_rule(1e-13);
    auto g = [s](double u) { return u > 700.0 ? 0.0 : std::pow(u, s) * std::exp(-u); };
    if (k == 0.0) return {boost::math::quadrature::exp_sinh<double>().integrate(g), 0.0};
    return {cos_rule.integrate(g, k).first, -sin_rule.integrate(g, k).first};
}

}  // namespace

TEST(SpectralDensity, ValueAtCutoff) {
    const SpectralParams p{0.05, 1100.0, 3.0};
    EXPECT_NEAR(spectral_density(1100.0, p), 2.0 * pi * 0.05 * 1100.0 * std::exp(-1.0), 1e-9);
    EXPECT_EQ(spectral_density(0.0, p), 0.0);
    EXPECT_EQ(spectral_density(-1.0, p), 0.0);
}

TEST(SpectralDensity, RejectsNegativeCoupling) {
    const SpectralParams p{-0.1, 10.0, 1.0};
    EXPECT_THROW(p.validate(), ParameterError);
}

TEST(Kernels, InitialValue) {
    const SpectralParams p{0.05, 1100.0, 3.0};
    EXPECT_NEAR(cavity_kernel_value(p, 98.0, 0.0).real(), 0.05 * 1100.0 * 1100.0 * 6.0, 1e-6);
    SpectralParams pm = p;
    pm.kind = BathKind::mechanical;
    EXPECT_EQ(mechanical_kernel_value(pm, 0.0), 0.0);
}

class KernelOracle : public ::testing::TestWithParam<SpectralParams> {};

TEST_P(KernelOracle, MatchesFourierQuadrature) {
    const SpectralParams p = GetParam();
    SpectralParams pm = p;
    pm.kind = BathKind::mechanical;
    const double w0 = 98.0, scale = p.eta * p.cutoff * p.cutoff;
    double dc = 0.0, dm = 0.0, sc = 0.0, sm = 0.0;
    for (int i = 0; i < 120; ++i) {
        const double t = i < 60 ? 100.0 * i / 59.0 : 1e-5 * std::pow(1e7, (i - 60) / 59.0);
        const Complex tr = laplace_oracle(p.exponent, p.cutoff * t);
        const Complex rc = scale * std::polar(1.0, w0 * t) * tr;
        const double rm = -scale * tr.imag();
        dc = std::max(dc, std::abs(cavity_kernel_value(p, w0, t) - rc));
        dm = std::max(dm, std::abs(mechanical_kernel_value(pm, t) - rm));
        sc = std::max(sc, std::abs(rc));
        sm = std::max(sm, std::abs(rm));
    }
    EXPECT_LT(dc / sc, 1e-6);
    EXPECT_LT(dm / sm, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Sets, KernelOracle,
                         ::testing::Values(SpectralParams{0.05, 1100, 3}, SpectralParams{0.1, 1000, 1},
                                           SpectralParams{0.03, 11, 1}, SpectralParams{0.8, 5, 3},
                                           SpectralParams{0.02, 200, 1}, SpectralParams{0.3, 50, 3}));

TEST(Kernels, TabulationMatchesClosedForm) {
    const SpectralParams p{0.05, 1100.0, 3.0};
    const auto k = cavity_kernel(p, 98.0, TimeGrid::covering(1.0, 1e-3));
    EXPECT_EQ(k.size(), 1001u);
    EXPECT_LT(k.consistency_error(), 1e-15);
}

TEST(Kernels, WrongBathKindRejected) {
    const SpectralParams p{0.05, 1100.0, 3.0};
    EXPECT_THROW(mechanical_kernel(p, TimeGrid(0.1, 3)), ParameterError);
}

TEST(Kernels, HorizonBoundsTail) {
    const SpectralParams p{0.03, 11.0, 1.0, BathKind::mechanical};
    const double T = kernel_horizon(p, 1e-8);
    const double tail = std::abs(std::pow(Complex(1.0, p.cutoff * T), -(p.exponent + 1.0)));
    EXPECT_LT(tail, 1e-8);
}

TEST(LambShift, ValueAtZeroIsClosedForm) {
    for (const auto& p : {SpectralParams{0.05, 1100, 3}, SpectralParams{0.03, 11, 1}, SpectralParams{0.8, 5, 3}}) {
        const double expected = -p.eta * p.cutoff * std::tgamma(p.exponent);
        EXPECT_NEAR(hilbert_transform(p, 0.0).value, expected, 1e-9 * std::abs(expected));
    }
}

TEST(LambShift, IntegerExponentClosedForm) {
    // P int dw/2pi J/(x-w) for s = 3 in terms of the exponential integral.
    const double eta = 0.05, w = 1100.0;
    const SpectralParams p{eta, w, 3.0};
    for (double x : {-9.5, 5.0, 98.0, 3300.0}) {
        double sum = 0.0, fact = 1.0;
        for (int k = 0; k < 3; ++k) {
            if (k > 0) fact *= k;
            sum += std::pow(x, 2 - k) * fact * std::pow(w, k + 1);
        }
        const double ei = boost::math::expint(x / w);
        const double expected = -eta * std::pow(w, -2.0) * (sum - std::pow(x, 3) * std::exp(-x / w) * ei);
        EXPECT_NEAR(hilbert_transform(p, x).value, expected, 1e-8 * std::abs(expected)) << "x = " << x;
    }
}

TEST(LambShift, MechanicalIntegralRenormalizesFrequency) {
    const SpectralParams pm{0.03, 11.0, 1.0, BathKind::mechanical};
    EXPECT_NEAR(mechanical_kernel_integral(pm), 0.33, 1e-12);
    const auto k = lamb_shift_mech(0.0, pm);
    EXPECT_NEAR(k.K, -0.33, 1e-9);
}

TEST(Threshold, ClosedFormForFig2) {
    const SpectralParams pc{0.05, 1100.0, 3.0};
    EXPECT_NEAR(threshold_eta(100.0, pc), 100.0 / (1100.0 * 2.0), 1e-15);
}

TEST(Bose, ZeroTemperatureAndLowFrequency) {
    EXPECT_EQ(bose(1.0, std::numeric_limits<double>::infinity()), 0.0);
    EXPECT_NEAR(bose(1.0, 0.025), 1.0 / std::expm1(0.025), 1e-12);
}

TEST(Quadrature, AdaptiveMatchesBoost) {
    auto f = [](double x) { return std::exp(-x) * std::cos(5.0 * x) / (1.0 + x * x); };
    const double ours = quad::adaptive(f, 0.0, 10.0, 1e-14, 1e-12).value;
    const double ref = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 10.0, 15, 1e-14);
    EXPECT_NEAR(ours, ref, 1e-12);
}

TEST(Quadrature, GaussLegendreExactOnPolynomials) {
    const quad::GaussLegendre rule(8);
    auto f = [](double x) { return std::pow(x, 15) + 3.0 * x * x; };
    EXPECT_NEAR(rule.integrate(f, 0.0, 2.0), std::pow(2.0, 16) / 16.0 + 8.0, 1e-9);
}

TEST(Quadrature, LinearMomentsContinuousAcrossSeriesSwitch) {
    for (double theta : {0.49999, 0.5, 0.50001, 3.0}) {
        Complex i0, i1;
        quad::linear_moments(theta, i0, i1);
        const quad::GaussLegendre rule(40);
        const Complex r0 = rule.integrate([&](double x) { return std::polar(1.0, -theta * x); }, 0.0, 1.0);
        const Complex r1 = rule.integrate([&](double x) { return x * std::polar(1.0, -theta * x); }, 0.0, 1.0);
        EXPECT_NEAR(std::abs(i0 - r0), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(i1 - r1), 0.0, 1e-14);
    }
}

TEST(Grid, CoveringRoundsUpAndSpanningIsExact) {
    const auto g = TimeGrid::covering(1.0, 0.3);
    EXPECT_EQ(g.size, 5u);
    EXPECT_NEAR(TimeGrid::spanning(2.0, 5).dt, 0.5, 0.0);
    EXPECT_THROW(TimeGrid(0.0, 3), ParameterError);
    EXPECT_EQ(TimeGrid(0.1, 9).coarsened(4).size, 3u);
}
