#pragma once

// Domain types shared by every module: physical parameters, derived
// constants, uniform time grids, sampled complex series and the validated
// run configuration.  All quantities are SI throughout.

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atomlaser/errors.hpp"

namespace atomlaser {

using cplx = std::complex<double>;

inline constexpr double default_hbar = 1.0545718e-34; // J s

// Trap, coupling and pump parameters of the single-mode atom laser.
struct PhysicalParams {
    double m = 0.0;       // atomic mass (kg)
    double g = 0.0;       // gravitational acceleration along the coupling axis (m s^-2)
    double omega0 = 0.0;  // lasing-mode angular frequency (rad s^-1)
    double sigma_k = 0.0; // momentum width of the coupling (m^-1)
    double gamma = 0.0;   // coupling strength (s^-2)
    double r = 0.0;       // pump injection rate (atoms s^-1)
    double n_s = 0.0;     // saturation number (dimensionless)
    double hbar = default_hbar; // J s, overridable for unit tests

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw config_error(std::string(name) + " must be positive and finite");
        };
        positive(m, "m");
        positive(sigma_k, "sigma_k");
        positive(gamma, "gamma");
        positive(r, "r");
        positive(hbar, "hbar");
        if (!(n_s >= 0.0) || !std::isfinite(n_s))
            throw config_error("n_s must be non-negative and finite");
        if (!(g >= 0.0) || !std::isfinite(g))
            throw config_error("g must be non-negative and finite");
        if (!std::isfinite(omega0))
            throw config_error("omega0 must be finite");
    }
};

// lambda = hbar/(2m); beta = (2 m^2 g / hbar^2)^(1/3), the inverse length
// scale of the gravitational Airy eigenstates.  beta is undefined for g = 0.
struct DerivedConstants {
    double lambda = 0.0; // m^2 s^-1
    double beta = 0.0;   // m^-1, meaningful only when beta_defined
    bool beta_defined = false;
};

inline DerivedConstants derive_constants(const PhysicalParams& p) {
    p.validate();
    DerivedConstants d;
    d.lambda = p.hbar / (2.0 * p.m);
    if (p.g > 0.0) {
        d.beta = std::cbrt(2.0 * p.m * p.m * p.g / (p.hbar * p.hbar));
        d.beta_defined = true;
    }
    return d;
}

// Uniform time grid t(i) = i*dt, i in [0, n_steps).
struct TimeGrid {
    double dt = 0.0;
    std::size_t n_steps = 0;

    TimeGrid() = default;
    TimeGrid(double dt_, std::size_t n_steps_) : dt(dt_), n_steps(n_steps_) {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw config_error("dt must be positive");
        if (n_steps < 2)
            throw config_error("time grid needs at least 2 samples");
    }

    double t(std::size_t i) const { return static_cast<double>(i) * dt; }
    double t_max() const { return t(n_steps - 1); }

    bool operator==(const TimeGrid&) const = default;
};

// Complex samples on a uniform grid. Real-valued series reuse this with
// zero imaginary parts.
struct ComplexSeries {
    TimeGrid grid;
    std::vector<cplx> values;

    ComplexSeries() = default;
    explicit ComplexSeries(const TimeGrid& g) : grid(g), values(g.n_steps, cplx(0.0)) {}
    ComplexSeries(const TimeGrid& g, std::vector<cplx> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.n_steps)
            throw config_error("series length does not match its grid");
    }

    std::size_t size() const { return values.size(); }
    cplx operator[](std::size_t i) const { return values[i]; }
    cplx& operator[](std::size_t i) { return values[i]; }

    void check_finite(const char* what) const {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!std::isfinite(values[i].real()) || !std::isfinite(values[i].imag()))
                throw numerical_error(std::string(what) + ": non-finite sample at index " +
                                      std::to_string(i));
    }
};

enum class LinewidthMethod { fft_fwhm, exp_fit, both };

inline std::string to_string(LinewidthMethod m) {
    switch (m) {
    case LinewidthMethod::fft_fwhm: return "fft_fwhm";
    case LinewidthMethod::exp_fit: return "exp_fit";
    default: return "both";
    }
}

// Validated simulation settings. Defaults are documented in the README and
// applied by validate_config.
struct RunConfig {
    PhysicalParams params;
    double dt = 0.0;                 // timestep (s)
    double t_max = 0.0;              // horizon (s)
    double kernel_eps = 1e-6;        // relative kernel truncation threshold
    double selfcons_tol = 1e-4;      // relative tolerance of the P/n-bar fixed point
    int max_iters = 50;              // cap on self-consistency iterations
    LinewidthMethod linewidth_method = LinewidthMethod::both;
    double transient_fraction = 0.1; // fraction of the horizon discarded before C(tau)
    std::size_t checkpoint_steps = 0; // snapshot cadence in steps, 0 = disabled

    std::size_t n_steps() const { return static_cast<std::size_t>(std::floor(t_max / dt)) + 1; }
    TimeGrid grid() const { return TimeGrid(dt, n_steps()); }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        double v = std::stod(raw, &pos);
        while (pos < raw.size() && std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw config_error("value for " + key + " is not a number: '" + raw + "'");
    }
}

} // namespace detail

// Builds a RunConfig from a flat key/value map (the on-disk config format).
// Unknown keys are rejected so typos cannot silently fall back to defaults.
inline RunConfig validate_config(const std::map<std::string, std::string>& kv) {
    static const char* required[] = {"mass_kg", "g_m_s2", "omega0_rad_s", "sigma_k_per_m",
                                     "gamma_s2", "r_per_s", "n_s", "dt_s", "t_max_s"};
    static const char* optional[] = {"kernel_eps", "selfcons_tol", "max_iters",
                                     "linewidth_method", "transient_fraction", "hbar_js",
                                     "checkpoint_steps"};
    for (const auto& [key, value] : kv) {
        bool known = false;
        for (const char* k : required) known = known || key == k;
        for (const char* k : optional) known = known || key == k;
        if (!known) throw config_error("unknown configuration key: " + key);
    }
    for (const char* k : required)
        if (!kv.count(k)) throw config_error("missing required configuration key: " + std::string(k));

    auto num = [&kv](const char* key) { return detail::parse_double(key, kv.at(key)); };
    auto num_or = [&kv](const char* key, double fallback) {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : detail::parse_double(key, it->second);
    };

    RunConfig cfg;
    cfg.params.m = num("mass_kg");
    cfg.params.g = num("g_m_s2");
    cfg.params.omega0 = num("omega0_rad_s");
    cfg.params.sigma_k = num("sigma_k_per_m");
    cfg.params.gamma = num("gamma_s2");
    cfg.params.r = num("r_per_s");
    cfg.params.n_s = num("n_s");
    cfg.params.hbar = num_or("hbar_js", default_hbar);
    cfg.params.validate();

    cfg.dt = num("dt_s");
    if (!(cfg.dt > 0.0)) throw config_error("dt_s must be positive");
    cfg.t_max = num("t_max_s");
    if (!(cfg.t_max > cfg.dt)) throw config_error("t_max_s must exceed dt_s");

    cfg.kernel_eps = num_or("kernel_eps", 1e-6);
    if (!(cfg.kernel_eps > 0.0 && cfg.kernel_eps < 1.0))
        throw config_error("kernel_eps must lie in (0, 1)");
    cfg.selfcons_tol = num_or("selfcons_tol", 1e-4);
    if (!(cfg.selfcons_tol > 0.0 && cfg.selfcons_tol < 1.0))
        throw config_error("selfcons_tol must lie in (0, 1)");
    double iters = num_or("max_iters", 50);
    if (!(iters >= 1.0)) throw config_error("max_iters must be at least 1");
    cfg.max_iters = static_cast<int>(iters);
    cfg.transient_fraction = num_or("transient_fraction", 0.1);
    if (!(cfg.transient_fraction > 0.0 && cfg.transient_fraction < 1.0))
        throw config_error("transient_fraction must lie in (0, 1)");
    double ckpt = num_or("checkpoint_steps", 0);
    if (!(ckpt >= 0.0)) throw config_error("checkpoint_steps must be non-negative");
    cfg.checkpoint_steps = static_cast<std::size_t>(ckpt);

    auto it = kv.find("linewidth_method");
    if (it != kv.end()) {
        if (it->second == "fft_fwhm") cfg.linewidth_method = LinewidthMethod::fft_fwhm;
        else if (it->second == "exp_fit") cfg.linewidth_method = LinewidthMethod::exp_fit;
        else if (it->second == "both") cfg.linewidth_method = LinewidthMethod::both;
        else throw config_error("linewidth_method must be fft_fwhm, exp_fit or both");
    }
    return cfg;
}

} // namespace atomlaser
