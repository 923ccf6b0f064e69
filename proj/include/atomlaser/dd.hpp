#pragma once

// Minimal double-double arithmetic (~31 significant digits).  Used to tame
// the cancellation of the Airy power series at moderate |z| and to anchor
// the series/asymptotic constants; not a general-purpose extended type.

#include <cmath>

namespace atomlaser::detail {

struct dd {
    double hi = 0.0;
    double lo = 0.0;

    dd() = default;
    dd(double h) : hi(h), lo(0.0) {}
    dd(double h, double l) : hi(h), lo(l) {}

    double to_double() const { return hi + lo; }
};

inline dd two_sum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

inline dd quick_two_sum(double a, double b) {
    double s = a + b;
    return {s, b - (s - a)};
}

inline dd two_prod(double a, double b) {
    double p = a * b;
    return {p, std::fma(a, b, -p)};
}

inline dd add(const dd& a, const dd& b) {
    // Accurate (Knuth) variant: the sloppy one drops to double precision
    // under the sign-alternating cancellation the Airy series produces.
    dd s = two_sum(a.hi, b.hi);
    dd t = two_sum(a.lo, b.lo);
    s.lo += t.hi;
    s = quick_two_sum(s.hi, s.lo);
    s.lo += t.lo;
    return quick_two_sum(s.hi, s.lo);
}

inline dd sub(const dd& a, const dd& b) { return add(a, dd{-b.hi, -b.lo}); }

inline dd mul(const dd& a, const dd& b) {
    dd p = two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    return quick_two_sum(p.hi, p.lo);
}

inline dd mul(const dd& a, double b) {
    dd p = two_prod(a.hi, b);
    p.lo += a.lo * b;
    return quick_two_sum(p.hi, p.lo);
}

inline dd div(const dd& a, const dd& b) {
    double q1 = a.hi / b.hi;
    dd r = sub(a, mul(b, q1));
    double q2 = r.hi / b.hi;
    r = sub(r, mul(b, q2));
    double q3 = r.hi / b.hi;
    dd q = quick_two_sum(q1, q2);
    return add(q, dd{q3});
}

inline dd div(const dd& a, double b) { return div(a, dd{b}); }

inline dd sqrt(const dd& a) {
    // One Newton step on top of the double estimate doubles the precision.
    double x = std::sqrt(a.hi);
    dd x2 = two_prod(x, x);
    dd diff = sub(a, x2);
    double corr = diff.to_double() / (2.0 * x);
    return quick_two_sum(x, corr);
}

inline bool less_abs(const dd& a, double b) { return std::fabs(a.hi) < b; }

// pi to double-double precision (hi = nearest double, lo = residual).
inline dd dd_pi() { return {3.141592653589793116, 1.2246467991473532e-16}; }
// ln 2 to double-double precision.
inline dd dd_ln2() { return {0.6931471805599453094, 2.3190468138462996e-17}; }

// exp(a) for |a| up to ~700, accurate to ~1e-30 relative.
inline dd exp(const dd& a) {
    // a = k ln2 + r with |r| <= ln2/2, then exp(r) by Taylor in dd.
    double k = std::round(a.to_double() / 0.6931471805599453);
    dd r = sub(a, mul(dd_ln2(), k));
    dd sum{1.0};
    dd term{1.0};
    for (int n = 1; n < 40; ++n) {
        term = div(mul(term, r), static_cast<double>(n));
        sum = add(sum, term);
        if (std::fabs(term.hi) < 1e-35 * std::fabs(sum.hi)) break;
    }
    return mul(sum, std::ldexp(1.0, static_cast<int>(k)));
}

} // namespace atomlaser::detail
