#pragma once

// Spatial coupling kappa(x), the free-fall Green's function, the memory
// function f(dt) it induces, and the rotating-frame kernel H(dt) that
// drives the amplitude equation.  An independent double-integral oracle
// (kappa * G * kappa) validates the closed form of f.

#include <cmath>
#include <complex>
#include <vector>

#include "atomlaser/core.hpp"
#include "atomlaser/quadrature.hpp"

namespace atomlaser {

// kappa(x) = sqrt(gamma) (2 sigma_k^2/pi)^(1/4) exp(-(sigma_k x)^2).
// Real and even: the output coupling carries no momentum kick.
inline double coupling_kappa(double x, const PhysicalParams& p) {
    p.validate();
    double u = p.sigma_k * x;
    return std::sqrt(p.gamma) * std::pow(2.0 * p.sigma_k * p.sigma_k / M_PI, 0.25) *
           std::exp(-u * u);
}

// Free-fall propagator G(x, dt, y, 0) for V = m g x.
inline cplx greens_function(double x, double y, double dt, const PhysicalParams& p) {
    p.validate();
    if (!(dt > 0.0))
        throw domain_error("greens_function: dt must be positive (dt -> 0 is distributional)");
    double lambda = p.hbar / (2.0 * p.m);
    cplx pref = std::sqrt(1.0 / (4.0 * M_PI * cplx(0.0, 1.0) * lambda * dt));
    double d = x - y;
    double phase = d * d / (4.0 * lambda * dt) - p.g * dt * (x + y) / (4.0 * lambda) -
                   p.g * p.g * dt * dt * dt / (48.0 * lambda);
    return pref * std::exp(cplx(0.0, phase));
}

// Memory function in closed form:
//   f(dt) = gamma exp(-g^2 dt^2/(32 lambda^2 sigma_k^2))
//                 exp(-i g^2 dt^3/(48 lambda)) / sqrt(1 + 2 i lambda dt sigma_k^2)
// (principal square root; its argument keeps positive real part, so the
// branch is never crossed).
inline cplx memory_kernel_f(double dt, const PhysicalParams& p) {
    if (!(dt >= 0.0)) throw domain_error("memory_kernel_f: dt must be non-negative");
    double lambda = p.hbar / (2.0 * p.m);
    double sk2 = p.sigma_k * p.sigma_k;
    double gauss = std::exp(-p.g * p.g * dt * dt / (32.0 * lambda * lambda * sk2));
    double cubic = -p.g * p.g * dt * dt * dt / (48.0 * lambda);
    cplx root = std::sqrt(cplx(1.0, 2.0 * lambda * dt * sk2));
    return p.gamma * gauss * std::exp(cplx(0.0, cubic)) / root;
}

// Rotating-frame kernel H(dt) = conj(f(dt)) exp(-(i omega0 + P) dt).
inline cplx rotated_kernel_H(double dt, double P, const PhysicalParams& p) {
    return std::conj(memory_kernel_f(dt, p)) * std::exp(cplx(-P * dt, -p.omega0 * dt));
}

// Smallest grid time beyond which |H| stays below eps*gamma over a 10x
// look-ahead window; used to truncate memory integrals.  t_scan_max bounds
// the search (typically the configured horizon).
inline double kernel_support(double eps, double P, const PhysicalParams& p, double dt,
                             double t_scan_max) {
    p.validate();
    if (!(eps > 0.0 && eps < 1.0)) throw domain_error("kernel_support: eps must lie in (0,1)");
    if (!(dt > 0.0)) throw domain_error("kernel_support: dt must be positive");
    double thr = eps * p.gamma;
    auto below = [&](std::size_t i) {
        return std::abs(rotated_kernel_H(static_cast<double>(i) * dt, P, p)) < thr;
    };
    std::size_t i_max = static_cast<std::size_t>(t_scan_max / dt);
    std::size_t run_start = 0;
    bool in_run = false;
    for (std::size_t i = 1; i <= i_max; ++i) {
        if (below(i)) {
            if (!in_run) {
                run_start = i;
                in_run = true;
            }
            if (i >= 10 * run_start) return static_cast<double>(run_start) * dt;
        } else {
            in_run = false;
        }
    }
    throw numerical_error(
        "kernel_support: |H| does not stay below eps*gamma within the scan horizon; "
        "increase t_max or loosen kernel_eps");
}

// Precomputed kernel samples used by the solvers. The sample grid covers
// the truncated support only, not the full run horizon.
struct KernelSamples {
    TimeGrid grid;
    std::vector<cplx> f_values; // f(i dt), s^-2
    std::vector<cplx> H_values; // H(i dt), s^-2
    std::size_t support_index = 0;
    double P = 0.0;

    static KernelSamples build(const PhysicalParams& p, double dt, double P, double eps,
                               double t_scan_max) {
        double t_mem = kernel_support(eps, P, p, dt, t_scan_max);
        std::size_t n_sup = static_cast<std::size_t>(std::llround(t_mem / dt));
        KernelSamples ks;
        ks.grid = TimeGrid(dt, n_sup + 2);
        ks.f_values.resize(ks.grid.n_steps);
        ks.H_values.resize(ks.grid.n_steps);
        for (std::size_t i = 0; i < ks.grid.n_steps; ++i) {
            double t = ks.grid.t(i);
            ks.f_values[i] = memory_kernel_f(t, p);
            ks.H_values[i] = rotated_kernel_H(t, P, p);
        }
        ks.support_index = n_sup;
        ks.P = P;
        return ks;
    }
};

// Numerical double integral  f(dt) = int int kappa(x) kappa(y) G(x,dt,y,0) dx dy
// over |x|,|y| <= 6/sigma_k.  Validation-only: the inner integral chirps with
// (x-y)^2/(4 lambda dt), so small dt is expensive.
inline cplx memory_kernel_f_oracle(double dt, const PhysicalParams& p,
                                   double rel_tol = 1e-9,
                                   std::size_t inner_panels = 60000) {
    p.validate();
    if (!(dt > 0.0)) throw domain_error("memory_kernel_f_oracle: dt must be positive");
    double L = 6.0 / p.sigma_k;
    // L1 scale of the integrand fixes meaningful absolute tolerances.
    double lambda = p.hbar / (2.0 * p.m);
    double g_mod = 1.0 / std::sqrt(4.0 * M_PI * lambda * dt);
    double l1 = p.gamma * std::sqrt(2.0 / M_PI) * p.sigma_k * (M_PI / (p.sigma_k * p.sigma_k)) *
                g_mod; // int |kappa kappa| dx dy * |G|
    // Budget split: inner-line errors enter the outer integral weighted by
    // kappa(x) over a 2L window, so the inner tolerance is referred to the
    // outer one through that factor.  Unbalanced budgets make the outer rule
    // chase inner jitter it can never resolve.
    double outer_abs = 0.5 * rel_tol * l1;
    QuadOptions inner_opt;
    inner_opt.abs_tol = 0.3 * outer_abs / (2.0 * L * coupling_kappa(0.0, p));
    inner_opt.rel_tol = 0.0;
    inner_opt.max_panels = inner_panels;
    QuadOptions outer_opt;
    outer_opt.abs_tol = outer_abs;
    outer_opt.rel_tol = 0.0;
    outer_opt.max_panels = 1500;

    auto inner = [&](double x) -> cplx {
        auto fy = [&](double y) -> cplx {
            return coupling_kappa(y, p) * greens_function(x, y, dt, p);
        };
        QuadResult r = integrate_adaptive(fy, -L, L, inner_opt);
        return coupling_kappa(x, p) * r.value;
    };
    QuadResult r = integrate_adaptive(inner, -L, L, outer_opt);
    if (!r.converged)
        throw numerical_error("memory_kernel_f_oracle: outer quadrature did not converge");
    return r.value;
}

} // namespace atomlaser
