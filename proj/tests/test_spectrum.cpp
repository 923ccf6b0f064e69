#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "atomlaser/spectrum.hpp"

using namespace atomlaser;

namespace {

PhysicalParams reference_params() {
    PhysicalParams p;
    p.m = 5e-26;
    p.g = 9.8 * std::sin(0.18);
    p.omega0 = 2.0 * M_PI * 123.0;
    p.sigma_k = 4.4e5;
    p.gamma = 2.0e4;
    p.r = 2.0e4;
    p.n_s = 47.0;
    return p;
}

// synthetic correlation n exp((i omega0 - hw) tau) on a tau grid sized so
// the no-window precondition holds
ComplexSeries synthetic_correlation(double n_bar, double omega0, double hw) {
    double tau_max = std::log(1e3) / hw * 1.05;
    std::size_t n = 4001;
    ComplexSeries C(TimeGrid(tau_max / static_cast<double>(n - 1), n));
    for (std::size_t i = 0; i < n; ++i) {
        double tau = C.grid.t(i);
        C[i] = n_bar * std::exp(cplx(-hw * tau, omega0 * tau));
    }
    return C;
}

std::vector<double> window_grid(double center, double half, std::size_t n = 481) {
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k)
        w[k] = center - half + 2.0 * half * static_cast<double>(k) / static_cast<double>(n - 1);
    return w;
}

} // namespace

TEST_SUITE_BEGIN("spectrum");

TEST_CASE("kbar is finite, real-valued and peaks near omega0") {
    PhysicalParams p = reference_params();
    double k0 = coupling_strength_kbar(p.omega0, p);
    CHECK(std::isfinite(k0));
    CHECK(k0 != 0.0);
    PhysicalParams pg0 = p;
    pg0.g = 0.0;
    CHECK_THROWS_AS(coupling_strength_kbar(p.omega0, pg0), domain_error);
}

TEST_CASE("Airy-transform completeness: int |kbar|^2 domega = gamma within 1%") {
    PhysicalParams p = reference_params();
    KbarCompleteness kc = kbar_completeness(p);
    CHECK(std::fabs(kc.integral - p.gamma) < 0.01 * p.gamma);
}

TEST_CASE("|kbar|^2 varies by under 1% across any 10 rad/s window near omega0") {
    PhysicalParams p = reference_params();
    double k0 = coupling_strength_kbar(p.omega0, p);
    for (double d = -20.0; d <= 20.0; d += 4.0) {
        double a = coupling_strength_kbar(p.omega0 + d, p);
        double b = coupling_strength_kbar(p.omega0 + d + 10.0, p);
        CHECK(std::fabs(b * b - a * a) / (k0 * k0) < 0.01);
    }
}

TEST_CASE("two-route loss rate: time-domain kernel transform equals pi |kbar(omega0)|^2") {
    // Re int_0^inf conj(f) e^{-i omega0 t} dt and pi kbar(omega0)^2 compute
    // the same damping rate through entirely different machinery (memory
    // kernel in time vs Airy overlap in space)
    PhysicalParams p = reference_params();
    double dt = 1e-6;
    cplx acc(0.5 * dt * p.gamma, 0.0); // half weight at t = 0
    for (double t = dt; t < 0.05; t += dt)
        acc += std::conj(memory_kernel_f(t, p)) * std::exp(cplx(0.0, -p.omega0 * t)) * dt;
    double kb = coupling_strength_kbar(p.omega0, p);
    CHECK(acc.real() == doctest::Approx(M_PI * kb * kb).epsilon(1e-6));
}

TEST_CASE("synthetic exponential correlation transforms to the expected Lorentzian") {
    PhysicalParams p = reference_params();
    ComplexSeries C = synthetic_correlation(450.0, p.omega0, 1.05);
    std::vector<double> omega = window_grid(p.omega0, 25.0 * 2.1);
    SpectrumResult s = output_flux_spectrum(C, omega, p);
    double grid_step = omega[1] - omega[0];
    CHECK(std::fabs(s.gamma_fwhm - 2.1) < grid_step);
    CHECK(std::fabs(s.peak_omega - p.omega0) < grid_step);
    double peak = *std::max_element(s.flux.begin(), s.flux.end());
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
    // flux stays positive inside the FWHM window
    for (std::size_t k = 0; k < omega.size(); ++k)
        if (std::fabs(omega[k] - s.peak_omega) < 0.5 * s.gamma_fwhm) CHECK(s.flux[k] > 0.0);
    CHECK(s.kbar_variation >= 0.0);
    CHECK(s.kbar_variation < 0.01);
}

TEST_CASE("grid refinement moves the measured FWHM by under 1%") {
    PhysicalParams p = reference_params();
    ComplexSeries C = synthetic_correlation(450.0, p.omega0, 1.05);
    SpectrumResult s1 = output_flux_spectrum(C, window_grid(p.omega0, 52.5, 481), p);
    SpectrumResult s2 = output_flux_spectrum(C, window_grid(p.omega0, 52.5, 961), p);
    CHECK(std::fabs(s1.gamma_fwhm - s2.gamma_fwhm) / s2.gamma_fwhm < 0.01);
}

TEST_CASE("undecayed correlation is rejected with horizon advice") {
    PhysicalParams p = reference_params();
    std::size_t n = 512;
    ComplexSeries C(TimeGrid(1e-3, n));
    for (std::size_t i = 0; i < n; ++i)
        C[i] = 450.0 * std::exp(cplx(-0.01 * C.grid.t(i), p.omega0 * C.grid.t(i)));
    CHECK_THROWS_WITH_AS(output_flux_spectrum(C, window_grid(p.omega0, 50.0), p),
                         doctest::Contains("horizon"), numerical_error);
}

TEST_CASE("linewidth_fwhm: interpolated width of an analytic Lorentzian") {
    std::vector<double> omega = window_grid(0.0, 30.0, 2001);
    std::vector<double> flux(omega.size());
    for (std::size_t k = 0; k < omega.size(); ++k)
        flux[k] = 1.0 / (1.0 + std::pow(omega[k] / 1.05, 2.0));
    double peak = 0.0;
    double fwhm = linewidth_fwhm(omega, flux, &peak);
    CHECK(std::fabs(fwhm - 2.1) < omega[1] - omega[0]);
    CHECK(std::fabs(peak) < omega[1] - omega[0]);
}

TEST_CASE("linewidth_fwhm error paths: non-unimodal and unbracketed spectra") {
    std::vector<double> omega = window_grid(0.0, 10.0, 401);
    std::vector<double> two_bumps(omega.size());
    for (std::size_t k = 0; k < omega.size(); ++k)
        two_bumps[k] = 1.0 / (1.0 + std::pow((omega[k] + 5.0) / 0.5, 2.0)) +
                       0.9 / (1.0 + std::pow((omega[k] - 5.0) / 0.5, 2.0));
    CHECK_THROWS_AS(linewidth_fwhm(omega, two_bumps), numerical_error);

    std::vector<double> too_wide(omega.size());
    for (std::size_t k = 0; k < omega.size(); ++k)
        too_wide[k] = 1.0 / (1.0 + std::pow(omega[k] / 200.0, 2.0));
    CHECK_THROWS_AS(linewidth_fwhm(omega, too_wide), numerical_error);
}

TEST_CASE("linewidth_expfit recovers a constructed decay for any P") {
    for (double P : {0.0, 17.0}) {
        TimeGrid grid(1e-3, 4001);
        ComplexSeries N(grid);
        for (std::size_t i = 0; i < N.size(); ++i)
            N[i] = std::exp(cplx(-(P + 0.28) * grid.t(i), 0.3 * grid.t(i)));
        double shift = 0.0;
        double fwhm = linewidth_expfit(N, P, &shift);
        CHECK(fwhm == doctest::Approx(0.56).epsilon(1e-9));
        CHECK(shift == doctest::Approx(-0.3).epsilon(1e-6));
    }
}

TEST_CASE("linewidth_expfit rejects non-exponential tails") {
    TimeGrid grid(1e-3, 3001);
    ComplexSeries N(grid);
    for (std::size_t i = 0; i < N.size(); ++i) {
        double t = grid.t(i);
        N[i] = std::exp(-4.0 * t * t); // Gaussian: log|N| strongly curved
    }
    CHECK_THROWS_WITH_AS(linewidth_expfit(N, 0.0), doctest::Contains("non-exponential"),
                         numerical_error);
}

TEST_CASE("BMA baseline: tabulated widths and scaling laws") {
    std::vector<double> omega = window_grid(773.0, 1.0, 101);
    BmaBaseline b1 = bma_baseline(2e4, 450.0, 47.0, omega, 773.0);
    CHECK(std::fabs(b1.Gamma_bm - 0.025) < 0.05 * 0.025);
    CHECK(b1.gamma_bm == doctest::Approx(2e4 / 497.0).epsilon(1e-14));
    BmaBaseline b4 = bma_baseline(8e5, 1.8e4, 47.0, omega, 773.0);
    CHECK(std::fabs(b4.Gamma_bm - 0.00062) < 0.05 * 0.00062);
    // quartering at doubled n_bar, exact
    BmaBaseline a = bma_baseline(2e4, 450.0, 47.0, omega, 773.0);
    BmaBaseline b = bma_baseline(2e4, 900.0, 47.0, omega, 773.0);
    CHECK(b.Gamma_bm == doctest::Approx(a.Gamma_bm / 4.0).epsilon(1e-14));
    // unit peak at omega0
    double mx = *std::max_element(b1.lorentzian.begin(), b1.lorentzian.end());
    CHECK(mx == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(bma_baseline(2e4, 0.0, 47.0, omega, 773.0), domain_error);
}

TEST_CASE("Lorentzian least-squares fit recovers synthetic parameters") {
    std::vector<double> omega = window_grid(5.0, 12.0, 801);
    std::vector<double> flux(omega.size());
    for (std::size_t k = 0; k < omega.size(); ++k)
        flux[k] = 0.98 / (1.0 + std::pow((omega[k] - 5.3) / 1.7, 2.0));
    LorentzianFit fit = fit_lorentzian(omega, flux, 5.3 - 2 * 3.4, 5.3 + 2 * 3.4);
    CHECK(fit.valid);
    CHECK(fit.center == doctest::Approx(5.3).epsilon(1e-6));
    CHECK(fit.hwhm == doctest::Approx(1.7).epsilon(1e-6));
    CHECK(fit.max_residual < 1e-9);
}

TEST_SUITE_END();
