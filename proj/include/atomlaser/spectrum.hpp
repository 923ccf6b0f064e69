#pragma once

// Output-side physics: Airy-eigenstate coupling weights kbar(omega), the
// one-sided transform of the two-time correlation into the energy-flux
// spectrum, linewidth extraction (FWHM and exponential fit), and the
// Born-Markov baseline.
//
// Width conventions: linewidth_fwhm returns the full width at half maximum
// of the flux spectrum; linewidth_expfit returns 2x the correlation decay
// rate, i.e. the same FWHM.  The reported half width (FWHM/2) equals the
// correlation decay rate, which is the width parameter the Born-Markov
// expression r/(4 n_bar^2) is quoted in.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "atomlaser/airy.hpp"
#include "atomlaser/core.hpp"
#include "atomlaser/kernel.hpp"
#include "atomlaser/laser.hpp"
#include "atomlaser/quadrature.hpp"

namespace atomlaser {

// Overlap of the coupling profile with the delta(omega)-normalized gravity
// eigenstate u_omega(x) = beta sqrt(hbar/(m g)) Ai[beta (x - hbar omega/(m g))].
inline double coupling_strength_kbar(double omega_p, const PhysicalParams& p) {
    p.validate();
    if (!(p.g > 0.0))
        throw domain_error("coupling_strength_kbar: requires g > 0 (free-space output modes "
                           "are out of scope)");
    DerivedConstants dc = derive_constants(p);
    double x_turn = p.hbar * omega_p / (p.m * p.g); // classical turning point
    double L = 6.0 / p.sigma_k;
    double norm = dc.beta * std::sqrt(p.hbar / (p.m * p.g));
    auto integrand = [&](double x) -> cplx {
        double z = dc.beta * (x - x_turn);
        if (std::fabs(z) > detail::airy_domain_max) return cplx(0.0);
        return cplx(airy_ai(z) * coupling_kappa(x, p), 0.0);
    };
    QuadOptions opt;
    opt.rel_tol = 1e-9;
    opt.abs_tol = 1e-13 * std::sqrt(p.gamma) / std::sqrt(p.sigma_k);
    QuadResult r = integrate_adaptive(integrand, -L, L, opt);
    return norm * r.value.real();
}

// Running integral int |kbar(omega)|^2 domega, expanded until it plateaus.
// Equals gamma when the eigenbasis is complete over the coupling's support.
struct KbarCompleteness {
    double integral = 0.0;
    double omega_lo = 0.0;
    double omega_hi = 0.0;
    std::size_t samples = 0;
};

inline KbarCompleteness kbar_completeness(const PhysicalParams& p, double rel_plateau = 1e-3) {
    p.validate();
    double omega_scale = 2.0 * (p.hbar / (2.0 * p.m)) * p.sigma_k * p.sigma_k; // 2 lambda sigma_k^2
    double d_omega = 0.02 * omega_scale;
    // start symmetric around the coupling's energy scale and grow outward
    double lo = -2.0 * omega_scale, hi = 6.0 * omega_scale;
    auto k2 = [&](double w) {
        double v = coupling_strength_kbar(w, p);
        return v * v;
    };
    // trapezoid accumulation with expansion until both tails are negligible
    std::vector<double> vals;
    KbarCompleteness out;
    for (int round = 0; round < 12; ++round) {
        std::size_t n = static_cast<std::size_t>((hi - lo) / d_omega) + 1;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double w = lo + static_cast<double>(i) * d_omega;
            double v = k2(w);
            sum += (i == 0 || i + 1 == n) ? 0.5 * v : v;
        }
        sum *= d_omega;
        double tail = std::max(k2(lo), k2(hi)) * 20.0 * omega_scale;
        out.integral = sum;
        out.omega_lo = lo;
        out.omega_hi = hi;
        out.samples = n;
        if (tail < rel_plateau * sum) return out;
        lo -= 2.0 * omega_scale;
        hi += 4.0 * omega_scale;
    }
    throw numerical_error("kbar_completeness: integral did not plateau");
}

enum class SpectrumMethod { fft_fwhm, exp_fit };

struct SpectrumResult {
    std::vector<double> omega;       // rad/s
    std::vector<double> flux;        // normalized to unit peak
    double gamma_fwhm = 0.0;         // FWHM (s^-1)
    double peak_omega = 0.0;         // rad/s
    SpectrumMethod method = SpectrumMethod::fft_fwhm;
    double kbar_variation = 0.0;     // max relative variation of |kbar|^2 over the FWHM window
    double raw_peak = 0.0;           // pre-normalization peak value
    std::vector<double> kbar2;       // the weighting actually applied per omega
};

// FWHM by linear interpolation at the half-maximum crossings of a sampled,
// unimodal spectrum.
inline double linewidth_fwhm(const std::vector<double>& omega, const std::vector<double>& flux,
                             double* peak_omega_out = nullptr) {
    if (omega.size() != flux.size() || omega.size() < 5)
        throw config_error("linewidth_fwhm: need matching arrays with >= 5 samples");
    std::size_t ipk = 0;
    for (std::size_t i = 1; i < flux.size(); ++i)
        if (flux[i] > flux[ipk]) ipk = i;
    double peak = flux[ipk];
    if (ipk == 0 || ipk + 1 == flux.size())
        throw numerical_error("linewidth_fwhm: peak not interior to the frequency window; "
                              "widen the grid");
    double half = 0.5 * peak;
    // walk outwards; demand exactly one crossing per side
    auto cross = [&](int dir) {
        std::size_t i = ipk;
        double x = 0.0;
        bool found = false;
        while (true) {
            std::size_t j = i + dir;
            if (j >= flux.size()) break; // unsigned wrap covers j < 0
            if (!found && flux[j] <= half && flux[i] > half) {
                double f = (flux[i] - half) / (flux[i] - flux[j]);
                x = omega[i] + f * (omega[j] - omega[i]);
                found = true;
            } else if (found && flux[j] > half && flux[i] <= half) {
                throw numerical_error("linewidth_fwhm: multiple half-maximum crossings "
                                      "(non-unimodal spectrum)");
            }
            i = j;
            if (i == 0 || i + 1 == flux.size()) break;
        }
        if (!found)
            throw numerical_error("linewidth_fwhm: half maximum not bracketed; "
                                  "frequency window too narrow");
        return x;
    };
    double wl = cross(-1);
    double wr = cross(+1);
    if (peak_omega_out) {
        // parabolic refinement of the peak location
        double y0 = flux[ipk - 1], y1 = flux[ipk], y2 = flux[ipk + 1];
        double denom = y0 - 2.0 * y1 + y2;
        double frac = std::fabs(denom) > 1e-300 ? 0.5 * (y0 - y2) / denom : 0.0;
        *peak_omega_out = omega[ipk] + frac * (omega[1] - omega[0]);
    }
    return wr - wl;
}

// One-sided transform of the correlation into the flux spectrum:
//   S(w) = 2 |kbar(w)|^2 Re int_0^taumax e^{-i w tau} C(tau) dtau.
// The carrier exp(i omega0 tau) inside C is divided out analytically so the
// trapezoid works on the slow envelope; the no-window precondition
// |C(taumax)| <= 1e-3 C(0) is enforced.
inline SpectrumResult output_flux_spectrum(const ComplexSeries& C,
                                           const std::vector<double>& omega_grid,
                                           const PhysicalParams& p) {
    p.validate();
    if (omega_grid.size() < 16)
        throw config_error("output_flux_spectrum: omega grid too coarse");
    double c0 = std::abs(C[0]);
    if (!(c0 > 0.0)) throw config_error("output_flux_spectrum: C(0) must be positive");
    if (std::abs(C.values.back()) > 1e-3 * c0)
        throw numerical_error("output_flux_spectrum: correlation has not decayed to 1e-3 of "
                              "C(0) by tau_max; extend the horizon");
    std::size_t n = C.size();
    double dtau = C.grid.dt;
    // slow envelope R(tau) = e^{-i omega0 tau} C(tau)
    std::vector<cplx> R(n);
    for (std::size_t m = 0; m < n; ++m)
        R[m] = C[m] * std::exp(cplx(0.0, -p.omega0 * C.grid.t(m)));

    SpectrumResult res;
    res.omega = omega_grid;
    res.flux.resize(omega_grid.size());
    // |kbar|^2 drifts by well under 1% per 10 rad/s here, so sample it on a
    // coarse subgrid and interpolate instead of one quadrature per omega.
    std::vector<double> kbar2(omega_grid.size());
    {
        double w_lo = omega_grid.front(), w_hi = omega_grid.back();
        double step = std::min(1.0, std::max((w_hi - w_lo) / 40.0, 1e-6));
        std::size_t n_coarse = static_cast<std::size_t>((w_hi - w_lo) / step) + 2;
        std::vector<double> cw(n_coarse), ck2(n_coarse);
        for (std::size_t i = 0; i < n_coarse; ++i) {
            cw[i] = w_lo + static_cast<double>(i) * step;
            double kb = coupling_strength_kbar(cw[i], p);
            ck2[i] = kb * kb;
        }
        for (std::size_t k = 0; k < omega_grid.size(); ++k) {
            double u = (omega_grid[k] - w_lo) / step;
            std::size_t i0 = std::min(static_cast<std::size_t>(u), n_coarse - 2);
            double fr = u - static_cast<double>(i0);
            kbar2[k] = (1.0 - fr) * ck2[i0] + fr * ck2[i0 + 1];
        }
    }
    for (std::size_t k = 0; k < omega_grid.size(); ++k) {
        double dw = omega_grid[k] - p.omega0;
        cplx acc(0.0);
        for (std::size_t m = 0; m < n; ++m) {
            double w = (m == 0 || m + 1 == n) ? 0.5 : 1.0;
            acc += w * R[m] * std::exp(cplx(0.0, -dw * C.grid.t(m)));
        }
        res.flux[k] = 2.0 * kbar2[k] * (acc * dtau).real();
    }
    double pk = 0.0;
    for (double v : res.flux) pk = std::max(pk, v);
    if (!(pk > 0.0))
        throw numerical_error("output_flux_spectrum: non-positive spectrum peak");
    res.raw_peak = pk;
    for (double& v : res.flux) v /= pk;
    res.gamma_fwhm = linewidth_fwhm(res.omega, res.flux, &res.peak_omega);
    // |kbar|^2 variation across the FWHM window around the peak
    double lo = res.peak_omega - 0.5 * res.gamma_fwhm;
    double hi = res.peak_omega + 0.5 * res.gamma_fwhm;
    double k2min = 1e300, k2max = 0.0;
    for (std::size_t k = 0; k < omega_grid.size(); ++k) {
        if (omega_grid[k] < lo || omega_grid[k] > hi) continue;
        k2min = std::min(k2min, kbar2[k]);
        k2max = std::max(k2max, kbar2[k]);
    }
    res.kbar_variation = (k2max > 0.0 && k2min < 1e300) ? (k2max - k2min) / k2max : 0.0;
    res.kbar2 = std::move(kbar2);
    return res;
}

// FWHM estimate from the amplitude decay: fit log|N| + P t on the final
// third of the horizon; Gamma = 2 |slope|.  Passing the gain-retaining
// envelope Ntilde with P = 0 is equivalent.
inline double linewidth_expfit(const ComplexSeries& N, double P, double* shift_out = nullptr) {
    ComplexSeries env = N;
    if (P != 0.0)
        for (std::size_t i = 0; i < env.size(); ++i)
            env[i] = N[i] * std::exp(P * env.grid.t(i));
    EnvelopeFit fit = fit_envelope_tail(env);
    if (!fit.valid)
        throw numerical_error("linewidth_expfit: no affine tail in log|N|; horizon too short "
                              "or non-exponential decay (residual " +
                              std::to_string(fit.residual) + ")");
    if (shift_out) *shift_out = fit.shift;
    return 2.0 * std::fabs(fit.decay_rate);
}

struct BmaBaseline {
    double gamma_bm = 0.0;  // r/(n_bar + n_s): BMA damping rate (s^-1)
    double Gamma_bm = 0.0;  // r/(4 n_bar^2): BMA width (s^-1)
    std::vector<double> lorentzian; // unit-peak reference centered at omega0
};

inline BmaBaseline bma_baseline(double r, double n_bar, double n_s,
                                const std::vector<double>& omega_grid, double omega0) {
    if (!(n_bar > 0.0)) throw domain_error("bma_baseline: n_bar must be positive");
    BmaBaseline b;
    b.gamma_bm = r / (n_bar + n_s);
    b.Gamma_bm = r / (4.0 * n_bar * n_bar);
    b.lorentzian.resize(omega_grid.size());
    for (std::size_t k = 0; k < omega_grid.size(); ++k) {
        double u = (omega_grid[k] - omega0) / b.Gamma_bm;
        b.lorentzian[k] = 1.0 / (1.0 + u * u);
    }
    return b;
}

// Weighted least-squares Lorentzian fit via the inverse-quadratic form
// 1/S = a (w - c)^2 + e; weights S^4 approximate unweighted residuals in S.
struct LorentzianFit {
    double amplitude = 0.0;
    double center = 0.0;
    double hwhm = 0.0;
    double max_residual = 0.0; // max |S - fit| over the fitted window, units of peak
    bool valid = false;
};

inline LorentzianFit fit_lorentzian(const std::vector<double>& omega,
                                    const std::vector<double>& flux, double window_lo,
                                    double window_hi) {
    // fit in w - w_mid: powers of the raw omega (~1e3) over a sub-rad/s
    // window make the normal equations singular in double precision
    double w_mid = 0.5 * (window_lo + window_hi);
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, b0 = 0, b1 = 0, b2 = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        double w = omega[i] - w_mid, S = flux[i];
        if (omega[i] < window_lo || omega[i] > window_hi || S <= 1e-6) continue;
        double y = 1.0 / S;
        double wt = S * S * S * S;
        s0 += wt;
        s1 += wt * w;
        s2 += wt * w * w;
        s3 += wt * w * w * w;
        s4 += wt * w * w * w * w;
        b0 += wt * y;
        b1 += wt * y * w;
        b2 += wt * y * w * w;
        ++used;
    }
    LorentzianFit fit;
    if (used < 8) return fit;
    // solve the 3x3 normal equations for y = A w^2 + B w + C
    double m[3][4] = {{s4, s3, s2, b2}, {s3, s2, s1, b1}, {s2, s1, s0, b0}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r2 = col + 1; r2 < 3; ++r2)
            if (std::fabs(m[r2][col]) > std::fabs(m[piv][col])) piv = r2;
        std::swap(m[col], m[piv]);
        if (std::fabs(m[col][col]) < 1e-300) return fit;
        for (int r2 = 0; r2 < 3; ++r2) {
            if (r2 == col) continue;
            double f = m[r2][col] / m[col][col];
            for (int cc = col; cc < 4; ++cc) m[r2][cc] -= f * m[col][cc];
        }
    }
    double A = m[0][3] / m[0][0], B = m[1][3] / m[1][1], Cc = m[2][3] / m[2][2];
    if (!(A > 0.0)) return fit;
    fit.center = w_mid - B / (2.0 * A);
    double e = Cc - B * B / (4.0 * A);
    if (!(e > 0.0)) return fit;
    fit.amplitude = 1.0 / e;
    fit.hwhm = std::sqrt(e / A);
    double peak = *std::max_element(flux.begin(), flux.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        double w = omega[i];
        if (w < window_lo || w > window_hi) continue;
        double u = (w - fit.center) / fit.hwhm;
        double model = fit.amplitude / (1.0 + u * u);
        worst = std::max(worst, std::fabs(flux[i] - model));
    }
    fit.max_residual = worst / peak;
    fit.valid = true;
    return fit;
}

} // namespace atomlaser
