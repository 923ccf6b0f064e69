#include <doctest.h>

#include <cmath>

#include "atomlaser/kernel.hpp"
#include "atomlaser/quadrature.hpp"
#include "atomlaser/validate.hpp"

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

} // namespace

TEST_SUITE_BEGIN("kernel");

TEST_CASE("coupling profile: peak value, parity, normalization") {
    PhysicalParams p = reference_params();
    double k0 = std::sqrt(p.gamma) * std::pow(2.0 * p.sigma_k * p.sigma_k / M_PI, 0.25);
    CHECK(coupling_kappa(0.0, p) == doctest::Approx(k0).epsilon(1e-14));
    CHECK(coupling_kappa(0.0, p) == doctest::Approx(8.38e4).epsilon(1e-3));
    for (double x : {1e-7, 7.3e-7, 2.2e-6, 5e-6})
        CHECK(coupling_kappa(x, p) == doctest::Approx(coupling_kappa(-x, p)).epsilon(1e-15));
    // int |kappa|^2 dx = gamma exactly (Gaussian normalization)
    auto k2 = [&](double x) {
        double v = coupling_kappa(x, p);
        return cplx(v * v, 0.0);
    };
    QuadResult q = integrate_adaptive(k2, -8.0 / p.sigma_k, 8.0 / p.sigma_k, {0.0, 1e-12, 4000});
    CHECK(q.value.real() == doctest::Approx(p.gamma).epsilon(1e-10));
}

TEST_CASE("Green's function modulus and trivial phases") {
    PhysicalParams p = reference_params();
    double lambda = p.hbar / (2.0 * p.m);
    for (double dt : {1e-7, 1e-5, 1e-3}) {
        cplx g = greens_function(3e-7, -2e-7, dt, p);
        CHECK(std::abs(g) == doctest::Approx(1.0 / std::sqrt(4.0 * M_PI * lambda * dt))
                                 .epsilon(1e-12));
    }
    PhysicalParams p0 = p;
    p0.g = 0.0;
    cplx g0 = greens_function(4e-7, 4e-7, 1e-4, p0);
    cplx expect = std::sqrt(1.0 / (4.0 * M_PI * cplx(0.0, 1.0) * lambda * 1e-4));
    CHECK(g0.real() == doctest::Approx(expect.real()).epsilon(1e-12));
    CHECK(g0.imag() == doctest::Approx(expect.imag()).epsilon(1e-12));
    CHECK_THROWS_AS(greens_function(0.0, 0.0, 0.0, p), domain_error);
    CHECK_THROWS_AS(greens_function(0.0, 0.0, -1e-6, p), domain_error);
}

TEST_CASE("Green's function acts as a delta kernel for small dt") {
    // contour-rotated quadrature of int G(x,dt,y,0) exp(-y^2/w^2) dy vs the
    // dt -> 0 limit exp(-x^2/w^2); the rotation u = e^{i pi/4} v tames the
    // Fresnel chirp that makes the real-axis integral unusable at dt = 1e-7.
    PhysicalParams p = reference_params();
    double lambda = p.hbar / (2.0 * p.m);
    double w = 3.0 / p.sigma_k;
    double dt = 1e-7;
    double h = std::sqrt(4.0 * lambda * dt);
    cplx rot = std::exp(cplx(0.0, M_PI / 4.0));
    for (double x : {0.0, 0.5 * w, w}) {
        auto integrand = [&](double v) -> cplx {
            cplx y = x + rot * h * v;
            cplx phase = cplx(0.0, 1.0) *
                         (-p.g * dt * (x + y) / (4.0 * lambda) -
                          p.g * p.g * dt * dt * dt / (48.0 * lambda));
            return std::exp(-v * v) * std::exp(-y * y / (w * w)) * std::exp(phase);
        };
        cplx pref = std::sqrt(1.0 / (4.0 * M_PI * cplx(0.0, 1.0) * lambda * dt));
        cplx val = pref * rot * h * integrate_gauss(integrand, -7.5, 7.5, 120);
        CHECK(std::abs(val - std::exp(-x * x / (w * w))) < 1e-3);
    }
}

TEST_CASE("memory function: closed-form anchor values") {
    PhysicalParams p = reference_params();
    cplx f0 = memory_kernel_f(0.0, p);
    CHECK(f0.real() == doctest::Approx(p.gamma).epsilon(1e-15));
    CHECK(f0.imag() == 0.0);

    // g = 0 modulus at dt = 1/(2 lambda sigma_k^2): gamma / 2^(1/4)
    PhysicalParams pg0 = p;
    pg0.g = 0.0;
    double lambda = p.hbar / (2.0 * p.m);
    double dtc = 1.0 / (2.0 * lambda * p.sigma_k * p.sigma_k);
    CHECK(dtc == doctest::Approx(2.449e-3).epsilon(1e-3));
    CHECK(std::abs(memory_kernel_f(dtc, pg0)) ==
          doctest::Approx(p.gamma / std::pow(2.0, 0.25)).epsilon(1e-12));
    CHECK(std::abs(memory_kernel_f(dtc, pg0)) == doctest::Approx(1.682e4).epsilon(1e-3));
    CHECK_THROWS_AS(memory_kernel_f(-1e-9, p), domain_error);
}

TEST_CASE("closed form agrees with the double-integral oracle") {
    PhysicalParams p = reference_params();
    struct Pt {
        double dt, tol, oracle_tol;
    };
    // the full 5-point sweep including dt = 1e-5 runs in the acceptance suite
    for (Pt pt : {Pt{1e-4, 1e-6, 1e-8}, Pt{1e-3, 1e-4, 1e-7}, Pt{5e-3, 1e-4, 1e-7}}) {
        cplx fo = memory_kernel_f_oracle(pt.dt, p, pt.oracle_tol);
        cplx fc = memory_kernel_f(pt.dt, p);
        CHECK(std::abs(fo - fc) / std::abs(fc) < pt.tol);
    }
}

TEST_CASE("rotating-frame kernel identities") {
    PhysicalParams p = reference_params();
    CHECK(rotated_kernel_H(0.0, 20.0, p).real() == doctest::Approx(p.gamma).epsilon(1e-15));
    for (double dt : {1e-5, 3e-4, 2e-3}) {
        double P = 21.7;
        CHECK(std::abs(rotated_kernel_H(dt, P, p)) ==
              doctest::Approx(std::abs(memory_kernel_f(dt, p)) * std::exp(-P * dt))
                  .epsilon(1e-13));
    }
    PhysicalParams pw = p;
    pw.omega0 = 0.0;
    for (double dt : {1e-5, 7e-4}) {
        cplx h = rotated_kernel_H(dt, 0.0, pw);
        cplx fc = std::conj(memory_kernel_f(dt, pw));
        CHECK(h.real() == doctest::Approx(fc.real()).epsilon(1e-14));
        CHECK(h.imag() == doctest::Approx(fc.imag()).epsilon(1e-14));
    }
}

TEST_CASE("modulus of f is non-increasing and even in g") {
    PhysicalParams p = reference_params();
    double prev = std::abs(memory_kernel_f(0.0, p));
    for (int i = 1; i <= 2000; ++i) {
        double cur = std::abs(memory_kernel_f(i * 2e-5, p));
        CHECK(cur <= prev * (1.0 + 1e-14));
        prev = cur;
    }
    PhysicalParams pm = p;
    pm.g = -p.g;
    for (double dt : {1e-5, 1e-4, 1e-3, 4e-3}) {
        cplx a = memory_kernel_f(dt, p);
        cplx b = memory_kernel_f(dt, pm);
        CHECK(std::abs(a - b) <= 1e-14 * std::abs(a));
    }
}

TEST_CASE("square-root branch stays principal") {
    PhysicalParams p = reference_params();
    double lambda = p.hbar / (2.0 * p.m);
    double prev_arg = 0.0;
    for (double dt = 1e-6; dt < 0.5; dt *= 1.1) {
        cplx root = std::sqrt(cplx(1.0, 2.0 * lambda * dt * p.sigma_k * p.sigma_k));
        double a = std::arg(root);
        CHECK(a > 0.0);
        CHECK(a < 0.25 * M_PI);
        CHECK(a >= prev_arg - 1e-12);
        prev_arg = a;
    }
}

TEST_CASE("kernel support: reference scale, eps -> 1 limit, g = 0 failure") {
    PhysicalParams p = reference_params();
    double tm = kernel_support(1e-6, 20.0, p, 2e-5, 12.0);
    CHECK(tm >= 5e-3);
    CHECK(tm <= 3e-2);
    // eps -> 1: |H(dt)|/gamma = 0.9994 at this dt, so anything looser than
    // that collapses the support to a single step
    CHECK(kernel_support(0.9999, 20.0, p, 2e-5, 12.0) == doctest::Approx(2e-5).epsilon(1e-12));
    PhysicalParams pg0 = p;
    pg0.g = 0.0;
    CHECK_THROWS_WITH_AS(kernel_support(1e-9, 0.0, pg0, 1e-4, 5.0),
                         doctest::Contains("increase t_max"), numerical_error);
    CHECK_THROWS_AS(kernel_support(1.5, 0.0, p, 1e-4, 5.0), domain_error);
}

TEST_CASE("fault injection: a 1% tampered coupling constant trips the f(0) check") {
    PhysicalParams p = reference_params();
    CHECK(check_kernel_f0(p, p.gamma).pass);
    CHECK_FALSE(check_kernel_f0(p, 1.01 * p.gamma).pass);
}

TEST_CASE("kernel samples: f(0) anchor and |H| <= |f|") {
    PhysicalParams p = reference_params();
    KernelSamples ks = KernelSamples::build(p, 4e-5, 20.0, 1e-6, 1.0);
    CHECK(std::abs(ks.f_values[0] - cplx(p.gamma)) < 1e-12 * p.gamma);
    CHECK(ks.support_index > 10);
    for (std::size_t i = 0; i < ks.grid.n_steps; ++i)
        CHECK(std::abs(ks.H_values[i]) <= std::abs(ks.f_values[i]) * (1.0 + 1e-14));
}

TEST_SUITE_END();
