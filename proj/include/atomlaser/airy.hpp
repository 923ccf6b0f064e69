#pragma once

// Airy functions Ai and Bi on [-40, 40].
//
// Evaluation strategy (crossover documented here):
//   |z| <= 10  : Maclaurin series Ai = c1*f(z) + c2*g(z), summed in
//                double-double arithmetic.  The series suffers cancellation
//                growing like exp(2/3*2*|z|^{3/2}); at |z| = 10 that eats
//                ~18 digits, which double-double absorbs with ~13 digits to
//                spare.
//   |z| >  10  : Poincare asymptotic expansions (exponential form for
//                z > 0, oscillatory sin/cos form for z < 0).  At |z| = 10
//                the optimally truncated series reaches ~1e-14 relative.
//
// The anchor values Ai(0), Ai'(0), Bi(0), Bi'(0) are derived at startup by
// evaluating the asymptotic expansion at z = 20 in double-double precision
// (where it terminates below 1e-50) and Taylor-stepping the ODE y'' = z y
// down to the origin; no hand-typed long constants are involved.
//
// airy_oracle_* evaluate the same functions by pure Taylor marching of the
// ODE from the origin and share nothing with the product path except the
// anchors.  They exist for validation.

#include <cmath>
#include <utility>

#include "atomlaser/dd.hpp"
#include "atomlaser/errors.hpp"

namespace atomlaser {

namespace detail {

inline constexpr double airy_domain_max = 40.0;
inline constexpr double airy_series_cut = 10.0;

// Asymptotic coefficients u_k (value series) and v_k (derivative series).
// u_0 = 1, u_{k+1} = u_k (6k+1)(6k+3)(6k+5) / (216 (k+1)(2k+1) * ... ),
// v_k = u_k (6k+1)/(1-6k).
struct airy_asym_coeffs {
    static constexpr int count = 40;
    double u[count];
    double v[count];
    airy_asym_coeffs() {
        u[0] = 1.0;
        v[0] = 1.0;
        for (int k = 0; k + 1 < count; ++k) {
            double kk = static_cast<double>(k);
            u[k + 1] = u[k] * (6 * kk + 1) * (6 * kk + 3) * (6 * kk + 5) /
                       (216.0 * (kk + 1) * (2 * kk + 1));
            v[k + 1] = u[k + 1] * (6 * (kk + 1) + 1) / (1.0 - 6 * (kk + 1));
        }
    }
};

inline const airy_asym_coeffs& airy_uk() {
    static const airy_asym_coeffs c;
    return c;
}

// dd asymptotic evaluation of Ai and Ai' at large positive z. Only used to
// derive the origin anchors, so it prioritises precision over speed.
inline std::pair<dd, dd> airy_ai_asym_dd(double z) {
    const auto& C = airy_uk();
    dd zdd{z};
    dd sq = sqrt(zdd);                                // z^(1/2)
    dd zeta = div(mul(mul(sq, zdd), 2.0), 3.0);       // (2/3) z^(3/2), division kept in dd:
                                                      // exp(-zeta) amplifies any zeta rounding by zeta itself
    dd inv_zeta = div(dd{1.0}, zeta);
    dd su{0.0}, sv{0.0}, pw{1.0};
    for (int k = 0; k < airy_asym_coeffs::count; ++k) {
        double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        su = add(su, mul(pw, sgn * C.u[k]));
        sv = add(sv, mul(pw, sgn * C.v[k]));
        pw = mul(pw, inv_zeta);
        if (std::fabs(pw.hi) * C.u[k] < 1e-60) break;
    }
    dd z14 = sqrt(sq);                        // z^(1/4)
    dd emz = exp(dd{-zeta.hi, -zeta.lo});
    dd spi2 = mul(sqrt(dd_pi()), 2.0);        // 2 sqrt(pi)
    dd ai = div(mul(emz, su), mul(spi2, z14));
    dd aip = div(mul(emz, sv), spi2);
    aip = mul(mul(aip, z14), -1.0);
    return {ai, aip};
}

// One Taylor step of y'' = z y: given (y, y') at z0, advance to z0 + h.
// Coefficient recurrence: c_{n+2} = (z0 c_n + c_{n-1}) / ((n+1)(n+2)).
inline void airy_taylor_step_dd(dd& y, dd& yp, dd z0, double h, int order = 46) {
    dd cm1{0.0};   // c_{n-1}
    dd a = y;      // c_n
    dd b = yp;     // c_{n+1}
    dd val = add(y, mul(yp, h));
    dd der = yp;
    dd h_np1{h};   // h^{n+1}
    int tiny_run = 0; // individual coefficients may vanish (Ai''(0) = 0)
    for (int n = 0; n + 2 <= order; ++n) {
        dd c_next = div(add(mul(z0, a), cm1), static_cast<double>((n + 1) * (n + 2)));
        dd h_np2 = mul(h_np1, h);
        val = add(val, mul(c_next, h_np2));
        der = add(der, mul(mul(c_next, static_cast<double>(n + 2)), h_np1));
        cm1 = a;
        a = b;
        b = c_next;
        h_np1 = h_np2;
        if (std::fabs(c_next.hi * h_np2.hi) < 1e-55 * (std::fabs(val.hi) + 1e-300)) {
            if (++tiny_run >= 2) break;
        } else {
            tiny_run = 0;
        }
    }
    y = val;
    yp = der;
}

// March (y, y') of y'' = z y from z_from to z_to in steps of at most 0.5.
inline void airy_march_dd(dd& y, dd& yp, double z_from, double z_to) {
    double z = z_from;
    const double hmax = 0.5;
    while (z != z_to) {
        double h = z_to - z;
        if (h > hmax) h = hmax;
        if (h < -hmax) h = -hmax;
        airy_taylor_step_dd(y, yp, dd{z}, h);
        z += h;
        if (std::fabs(z - z_to) < 1e-14) z = z_to;
    }
}

struct airy_anchors {
    dd ai0, aip0; // Ai(0), Ai'(0)
    dd bi0, bip0; // Bi(0), Bi'(0)
    airy_anchors() {
        auto [ai, aip] = airy_ai_asym_dd(20.0);
        airy_march_dd(ai, aip, 20.0, 0.0);
        ai0 = ai;
        aip0 = aip;
        // Bi(0) = sqrt(3) Ai(0), Bi'(0) = sqrt(3) |Ai'(0)|.
        dd s3 = sqrt(dd{3.0});
        bi0 = mul(ai0, s3);
        bip0 = mul(mul(aip0, s3), -1.0);
    }
};

inline const airy_anchors& airy_origin() {
    static const airy_anchors a;
    return a;
}

// Maclaurin series in dd: returns (value, derivative) of c1*f + c2*g.
inline std::pair<double, double> airy_series_dd(double z, const dd& c1, const dd& c2) {
    // f = sum t_k, t_0 = 1, t_{k+1} = t_k z^3 / ((3k+2)(3k+3))
    // g = sum s_k, s_0 = z, s_{k+1} = s_k z^3 / ((3k+3)(3k+4))
    // f' and g' have matching closed recurrences; accumulate all four.
    dd z3 = mul(mul(dd{z}, dd{z}), dd{z});
    dd tf{1.0}, tg{z};
    dd f = tf, g = tg;
    // derivatives: f' = sum_{k>=1} t_k * 3k / z ... safer to use separate
    // series: f'(z) = sum a_k, a_1 = z^2/2, a_{k+1} = a_k z^3/((3k+2)(3k+4)) ...
    // Use direct term-by-term differentiated recurrences instead:
    // d/dz z^{3k} = 3k z^{3k-1}; build them with independent accumulators.
    dd tfp{0.0}, tgp{1.0};
    dd fp = tfp, gp = tgp;
    dd tf_d = tf, tg_d = tg; // value terms reused to derive derivative terms
    for (int k = 0; k < 120; ++k) {
        double dk = static_cast<double>(k);
        tf_d = div(mul(tf_d, z3), (3 * dk + 2) * (3 * dk + 3));
        tg_d = div(mul(tg_d, z3), (3 * dk + 3) * (3 * dk + 4));
        f = add(f, tf_d);
        g = add(g, tg_d);
        // derivative terms: d/dz [z^{3k}] pattern
        // f term k+1 is z^{3(k+1)} * coeff -> derivative 3(k+1) z^{3k+2} * coeff
        dd dfterm = mul(tf_d, 3 * (dk + 1));
        if (z != 0.0) dfterm = div(dfterm, z);
        fp = add(fp, dfterm);
        dd dgterm = mul(tg_d, 3 * (dk + 1) + 1);
        if (z != 0.0) dgterm = div(dgterm, z);
        gp = add(gp, dgterm);
        if (std::fabs(tf_d.hi) + std::fabs(tg_d.hi) <
            1e-36 * (std::fabs(f.hi) + std::fabs(g.hi) + 1.0))
            break;
    }
    if (z == 0.0) { fp = dd{0.0}; gp = dd{1.0}; }
    dd val = add(mul(f, c1), mul(g, c2));
    dd der = add(mul(fp, c1), mul(gp, c2));
    return {val.to_double(), der.to_double()};
}

// Double-precision asymptotics for z > airy_series_cut. Returns
// {Ai, Ai', Bi, Bi'}; Bi overflows double around z = 110, irrelevant here.
struct airy_quad { double ai, aip, bi, bip; };

inline airy_quad airy_asym_pos(double z) {
    const auto& C = airy_uk();
    double zeta = (2.0 / 3.0) * z * std::sqrt(z);
    double iz = 1.0 / zeta;
    double su_m = 0, sv_m = 0, su_p = 0, sv_p = 0, pw = 1.0;
    double prev = 1e300;
    for (int k = 0; k < airy_asym_coeffs::count; ++k) {
        double tu = C.u[k] * pw;
        if (std::fabs(tu) > prev) break; // divergent tail reached
        prev = std::fabs(tu);
        double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        su_m += sgn * C.u[k] * pw;
        sv_m += sgn * C.v[k] * pw;
        su_p += C.u[k] * pw;
        sv_p += C.v[k] * pw;
        pw *= iz;
    }
    double z14 = std::pow(z, 0.25);
    double sp = std::sqrt(M_PI);
    double e = std::exp(-zeta);
    double ep = std::exp(zeta);
    airy_quad q;
    q.ai = e * su_m / (2.0 * sp * z14);
    q.aip = -e * z14 * sv_m / (2.0 * sp);
    q.bi = ep * su_p / (sp * z14);
    q.bip = ep * z14 * sv_p / sp;
    return q;
}

inline airy_quad airy_asym_neg(double zneg) {
    // z = -x, x > airy_series_cut. DLMF 9.7.9-9.7.12 with w = zeta - pi/4.
    const auto& C = airy_uk();
    double x = -zneg;
    double zeta = (2.0 / 3.0) * x * std::sqrt(x);
    double iz2 = 1.0 / (zeta * zeta);
    double Pu = 0, Qu = 0, Pv = 0, Qv = 0; // even/odd u and v sums
    double pw = 1.0;
    double prev = 1e300;
    for (int k = 0; 2 * k + 1 < airy_asym_coeffs::count; ++k) {
        double t_even = C.u[2 * k] * pw;
        if (std::fabs(t_even) > prev) break; // optimal truncation reached
        prev = std::fabs(t_even);
        double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        Pu += sgn * t_even;
        Pv += sgn * C.v[2 * k] * pw;
        double pw_odd = pw / zeta;
        Qu += sgn * C.u[2 * k + 1] * pw_odd;
        Qv += sgn * C.v[2 * k + 1] * pw_odd;
        pw *= iz2;
    }
    double w = zeta - 0.25 * M_PI;
    double cw = std::cos(w), sw = std::sin(w);
    double z14 = std::pow(x, 0.25);
    double sp = std::sqrt(M_PI);
    airy_quad q;
    q.ai = (cw * Pu + sw * Qu) / (sp * z14);
    q.bi = (-sw * Pu + cw * Qu) / (sp * z14);
    q.aip = z14 * (sw * Pv - cw * Qv) / sp;
    q.bip = z14 * (cw * Pv + sw * Qv) / sp;
    return q;
}

inline airy_quad airy_eval(double z) {
    if (std::fabs(z) <= airy_series_cut) {
        const auto& A = airy_origin();
        auto [ai, aip] = airy_series_dd(z, A.ai0, A.aip0);
        auto [bi, bip] = airy_series_dd(z, A.bi0, A.bip0);
        return {ai, aip, bi, bip};
    }
    return z > 0 ? airy_asym_pos(z) : airy_asym_neg(z);
}

} // namespace detail

inline void airy_check_domain(double z) {
    if (!(std::fabs(z) <= detail::airy_domain_max))
        throw domain_error("airy: |z| must not exceed 40");
}

inline double airy_ai(double z) {
    airy_check_domain(z);
    return detail::airy_eval(z).ai;
}

inline double airy_ai_prime(double z) {
    airy_check_domain(z);
    return detail::airy_eval(z).aip;
}

// Bi and Bi' are exposed for validation (Wronskian checks); they are not
// part of the physics pipeline.
inline double airy_bi(double z) {
    airy_check_domain(z);
    return detail::airy_eval(z).bi;
}

inline double airy_bi_prime(double z) {
    airy_check_domain(z);
    return detail::airy_eval(z).bip;
}

// Independent oracle: Taylor-march the ODE from the origin. Valid for
// z in [-40, 8]; above that the growing solution contaminates the march.
inline std::pair<double, double> airy_oracle_ai(double z) {
    if (z > 8.0 || z < -detail::airy_domain_max)
        throw domain_error("airy oracle: z must lie in [-40, 8]");
    const auto& A = detail::airy_origin();
    detail::dd y = A.ai0, yp = A.aip0;
    detail::airy_march_dd(y, yp, 0.0, z);
    return {y.to_double(), yp.to_double()};
}

inline std::pair<double, double> airy_oracle_bi(double z) {
    if (z > 8.0 || z < -detail::airy_domain_max)
        throw domain_error("airy oracle: z must lie in [-40, 8]");
    const auto& A = detail::airy_origin();
    detail::dd y = A.bi0, yp = A.bip0;
    detail::airy_march_dd(y, yp, 0.0, z);
    return {y.to_double(), yp.to_double()};
}

} // namespace atomlaser
