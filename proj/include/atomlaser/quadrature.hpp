#pragma once

// Adaptive quadrature on top of runtime-generated Gauss-Legendre rules.
// Error estimation pairs a 15-point rule with its 7-point sibling on each
// panel; panels are bisected worst-first until the global tolerance holds.
// Nodes come from Newton iteration on P_n, so no literal node tables.

#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <vector>

#include "atomlaser/errors.hpp"

namespace atomlaser {

namespace detail {

struct gauss_rule {
    std::vector<double> x; // nodes on [-1, 1]
    std::vector<double> w;
};

// Legendre polynomial value and derivative via the three-term recurrence.
inline std::pair<double, double> legendre_pd(int n, double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

inline gauss_rule make_gauss_rule(int n) {
    gauss_rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        // Tricomi-style initial guess, then Newton.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 60; ++it) {
            auto [p, dp] = legendre_pd(n, x);
            double dx = p / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        auto [p, dp] = legendre_pd(n, x);
        (void)p;
        r.x[i] = x;
        r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

inline const gauss_rule& gauss15() {
    static const gauss_rule r = make_gauss_rule(15);
    return r;
}
inline const gauss_rule& gauss7() {
    static const gauss_rule r = make_gauss_rule(7);
    return r;
}

} // namespace detail

struct QuadResult {
    std::complex<double> value{0.0, 0.0};
    double error = 0.0;       // estimated absolute error
    std::size_t evaluations = 0;
    bool converged = false;
};

struct QuadOptions {
    double abs_tol = 0.0;
    double rel_tol = 1e-10;
    std::size_t max_panels = 20000;
};

// Integrate f over [a, b]. f returns complex (real integrands simply carry
// zero imaginary part).
template <typename F>
QuadResult integrate_adaptive(F&& f, double a, double b, const QuadOptions& opt = {}) {
    if (!(b > a)) throw domain_error("integrate_adaptive: requires b > a");
    const auto& g15 = detail::gauss15();
    const auto& g7 = detail::gauss7();

    struct Panel {
        double a, b, err;
        std::complex<double> val;
        bool operator<(const Panel& o) const { return err < o.err; }
    };

    std::size_t evals = 0;
    auto eval_panel = [&](double lo, double hi) {
        double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        std::complex<double> s15{0.0, 0.0}, s7{0.0, 0.0};
        for (int i = 0; i < 15; ++i) s15 += g15.w[i] * f(c + h * g15.x[i]);
        for (int i = 0; i < 7; ++i) s7 += g7.w[i] * f(c + h * g7.x[i]);
        evals += 22;
        s15 *= h;
        s7 *= h;
        return Panel{lo, hi, std::abs(s15 - s7), s15};
    };

    std::priority_queue<Panel> q;
    q.push(eval_panel(a, b));
    std::complex<double> total = q.top().val;
    double total_err = q.top().err;

    std::size_t panels = 1;
    while (panels < opt.max_panels) {
        double goal = std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
        // a single panel can fool the embedded estimate on symmetric
        // oscillations, so always refine a few times
        if (total_err <= goal && panels >= 4) break;
        Panel worst = q.top();
        q.pop();
        double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) { // interval exhausted
            q.push(worst);
            break;
        }
        Panel left = eval_panel(worst.a, mid);
        Panel right = eval_panel(mid, worst.b);
        total += left.val + right.val - worst.val;
        total_err += left.err + right.err - worst.err;
        q.push(left);
        q.push(right);
        ++panels;
    }

    QuadResult res;
    res.value = total;
    res.error = total_err;
    res.evaluations = evals;
    res.converged = total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
    return res;
}

// Fixed-order Gauss-Legendre on [a, b]; no adaptivity, no error estimate.
template <typename F>
std::complex<double> integrate_gauss(F&& f, double a, double b, int points_hint = 15) {
    const detail::gauss_rule rule = detail::make_gauss_rule(points_hint);
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    std::complex<double> s{0.0, 0.0};
    for (int i = 0; i < points_hint; ++i) s += rule.w[i] * f(c + h * rule.x[i]);
    return s * h;
}

} // namespace atomlaser
