#pragma once

// Second-order direct integration of Volterra integro-differential
// equations
//     dy/dt = c y + source - int_0^t K(t,s) y(s) ds
// with trapezoidal quadrature for the memory integral and a Heun
// predictor-corrector step.  The first step is bootstrapped with a single
// half-step midpoint evaluation, which keeps the scheme second order
// without multi-step history.
//
// The memory integral is truncated at the kernel support (n_mem steps), so
// the stepper only ever touches a sliding window of the solution; history
// lives in a power-of-two ring buffer and full series are produced by a
// sink that records every accepted sample.

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "atomlaser/core.hpp"

namespace atomlaser {

// Convolution kernel sampled on the solver grid spacing.
struct SampledKernelAccessor {
    const std::vector<cplx>* samples = nullptr;
    double dt = 0.0;

    cplx at_steps(std::size_t i, std::size_t j) const { return (*samples)[i - j]; }

    // Off-grid evaluation (first-step bootstrap only): linear interpolation.
    cplx at_time(double t, double s) const {
        double lag = (t - s) / dt;
        double fl = std::floor(lag);
        std::size_t i0 = static_cast<std::size_t>(fl);
        double w = lag - fl;
        if (i0 + 1 >= samples->size()) return samples->back();
        return (1.0 - w) * (*samples)[i0] + w * (*samples)[i0 + 1];
    }
};

// Adapts a time-domain callable K(t, s) to the accessor interface.
template <typename F>
struct TwoTimeKernelAccessor {
    F eval;
    double dt = 0.0;
    cplx at_steps(std::size_t i, std::size_t j) const {
        return eval(static_cast<double>(i) * dt, static_cast<double>(j) * dt);
    }
    cplx at_time(double t, double s) const { return eval(t, s); }
};

struct ConvolutionIDEProblem {
    ComplexSeries kernel;     // K(i dt), same dt as grid
    cplx linear_coefficient{0.0, 0.0};
    double source = 0.0;
    cplx initial_value{1.0, 0.0};
    TimeGrid grid;

    void validate() const {
        if (kernel.grid.dt != grid.dt)
            throw config_error("convolution kernel must be sampled on the solver dt");
        if (kernel.values.size() < 2)
            throw config_error("convolution kernel needs at least 2 samples");
    }
};

template <typename Acc>
class VolterraStepper {
public:
    VolterraStepper(const TimeGrid& grid, Acc acc, cplx c, double source, cplx y0,
                    std::size_t n_mem)
        : grid_(grid), acc_(std::move(acc)), c_(c), source_(source), n_mem_(n_mem) {
        if (n_mem_ == 0) n_mem_ = 1;
        std::size_t cap = 1;
        while (cap < n_mem_ + 4) cap <<= 1;
        mask_ = cap - 1;
        buf_.assign(cap, cplx(0.0));
        buf_[0] = y0;
        i_ = 0;
    }

    std::size_t index() const { return i_; }
    cplx current() const { return buf_[i_ & mask_]; }
    std::size_t memory_steps() const { return n_mem_; }

    // Value at grid index j; j must lie inside the retained window.
    cplx value_at(std::size_t j) const { return buf_[j & mask_]; }

    // Advance one step. Throws numerical_error on non-finite samples.
    void step() {
        const double dt = grid_.dt;
        cplx y_next;
        if (i_ == 0) {
            // midpoint bootstrap: trapezoid over [0, dt/2]
            cplx y0 = buf_[0];
            cplx d0 = c_ * y0 + source_;
            cplx yhalf = y0 + 0.5 * dt * d0;
            double th = 0.5 * dt;
            cplx ihalf = 0.25 * dt * (acc_.at_time(th, 0.0) * y0 + acc_.at_time(th, th) * yhalf);
            cplx dhalf = c_ * yhalf + source_ - ihalf;
            y_next = y0 + dt * dhalf;
        } else {
            cplx yi = buf_[i_ & mask_];
            cplx di = derivative(i_, yi);
            cplx ystar = yi + dt * di;
            cplx dstar = derivative(i_ + 1, ystar);
            y_next = yi + 0.5 * dt * (di + dstar);
        }
        ++i_;
        buf_[i_ & mask_] = y_next;
        if (!std::isfinite(y_next.real()) || !std::isfinite(y_next.imag()))
            throw numerical_error("volterra: non-finite sample at step " + std::to_string(i_) +
                                  "; consider a smaller dt");
    }

    // Serialization window for checkpointing: [window_begin, i_] inclusive.
    std::size_t window_begin() const {
        std::size_t need = n_mem_ + 2;
        return i_ > need ? i_ - need : 0;
    }
    void save_window(std::vector<cplx>& out) const {
        out.clear();
        for (std::size_t j = window_begin(); j <= i_; ++j) out.push_back(buf_[j & mask_]);
    }
    void restore_window(std::size_t i, const std::vector<cplx>& window) {
        i_ = i;
        std::size_t begin = window_begin();
        if (window.size() != i_ - begin + 1)
            throw numerical_error("volterra: checkpoint window size mismatch");
        for (std::size_t k = 0; k < window.size(); ++k) buf_[(begin + k) & mask_] = window[k];
    }

private:
    // dy/dt evaluated at grid index i with trial value yi; the memory
    // trapezoid uses retained history below i.
    cplx derivative(std::size_t i, cplx yi) const {
        const double dt = grid_.dt;
        cplx integral(0.0);
        if (i >= 1) {
            std::size_t j0 = i > n_mem_ ? i - n_mem_ : 0;
            cplx sum = 0.5 * (acc_.at_steps(i, j0) * buf_[j0 & mask_] +
                              acc_.at_steps(i, i) * yi);
            for (std::size_t j = j0 + 1; j < i; ++j)
                sum += acc_.at_steps(i, j) * buf_[j & mask_];
            integral = sum * dt;
        }
        return c_ * yi + source_ - integral;
    }

    TimeGrid grid_;
    Acc acc_;
    cplx c_;
    double source_;
    std::size_t n_mem_;
    std::size_t mask_ = 0;
    std::vector<cplx> buf_;
    std::size_t i_ = 0;
};

namespace detail {

template <typename Acc, typename Sink>
void run_volterra(const TimeGrid& grid, Acc acc, cplx c, double source, cplx y0,
                  std::size_t n_mem, Sink&& sink) {
    VolterraStepper<Acc> st(grid, std::move(acc), c, source, y0, n_mem);
    sink(std::size_t{0}, y0);
    for (std::size_t i = 1; i < grid.n_steps; ++i) {
        st.step();
        sink(i, st.current());
    }
}

} // namespace detail

// Full-series solve of the convolution problem. The memory integral is cut
// at the kernel's last sample (callers pass kernels already truncated to
// their support).
inline ComplexSeries solve_convolution(const ConvolutionIDEProblem& problem) {
    problem.validate();
    std::size_t n_mem = problem.kernel.values.size() - 1;
    if (n_mem == 0) n_mem = 1;
    SampledKernelAccessor acc{&problem.kernel.values, problem.grid.dt};
    ComplexSeries out(problem.grid);
    // kernel shorter than the horizon: clamp lags instead of reading past
    // the end -- the accessor is only asked for lags <= n_mem by design.
    detail::run_volterra(problem.grid, acc, problem.linear_coefficient, problem.source,
                         problem.initial_value, n_mem,
                         [&](std::size_t i, cplx y) { out[i] = y; });
    out.check_finite("solve_convolution");
    return out;
}

// Same discretization with a caller-supplied two-time kernel K(t, s),
// truncated to t - s <= support.
template <typename F>
ComplexSeries solve_two_time(F&& kernel_eval, double source, cplx initial_value,
                             const TimeGrid& grid, double support) {
    if (!(support > 0.0)) throw config_error("solve_two_time: support must be positive");
    std::size_t n_mem = static_cast<std::size_t>(std::llround(support / grid.dt));
    if (n_mem == 0) n_mem = 1;
    TwoTimeKernelAccessor<std::decay_t<F>> acc{std::forward<F>(kernel_eval), grid.dt};
    ComplexSeries out(grid);
    detail::run_volterra(grid, acc, cplx(0.0), source, initial_value, n_mem,
                         [&](std::size_t i, cplx y) { out[i] = y; });
    out.check_finite("solve_two_time");
    return out;
}

// Accessor-level entry point (shared arithmetic path with solve_convolution;
// passing a SampledKernelAccessor reproduces it bit for bit).
template <typename Acc>
ComplexSeries solve_with_accessor(Acc acc, cplx linear_coefficient, double source,
                                  cplx initial_value, const TimeGrid& grid, std::size_t n_mem) {
    ComplexSeries out(grid);
    detail::run_volterra(grid, std::move(acc), linear_coefficient, source, initial_value, n_mem,
                         [&](std::size_t i, cplx y) { out[i] = y; });
    out.check_finite("solve_with_accessor");
    return out;
}

struct OrderEstimate {
    double order = 0.0;
    bool valid = false;
    std::string note;
};

// Measured convergence order against a known analytic solution. The problem
// family regenerates kernel samples for each dt; errors at rounding level
// invalidate the fit instead of producing a meaningless slope.
inline OrderEstimate estimate_convergence_order(
    const std::function<ConvolutionIDEProblem(double dt)>& family,
    const std::function<cplx(double t)>& analytic, const std::vector<double>& dt_list) {
    if (dt_list.size() < 3)
        throw config_error("estimate_convergence_order: need at least 3 dt values");
    std::vector<double> log_dt, log_err;
    double scale = 0.0;
    for (double dt : dt_list) {
        ConvolutionIDEProblem prob = family(dt);
        ComplexSeries y = solve_convolution(prob);
        double max_err = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            cplx ref = analytic(y.grid.t(i));
            max_err = std::max(max_err, std::abs(y[i] - ref));
            scale = std::max(scale, std::abs(ref));
        }
        log_dt.push_back(std::log(dt));
        log_err.push_back(std::log(std::max(max_err, 1e-300)));
    }
    OrderEstimate est;
    double floor = 1e-12 * std::max(scale, 1.0);
    bool all_tiny = true;
    for (double le : log_err) all_tiny = all_tiny && std::exp(le) < floor;
    if (all_tiny) {
        est.valid = false;
        est.note = "errors at rounding level; order fit rejected";
        return est;
    }
    // least-squares slope of log(err) vs log(dt)
    double n = static_cast<double>(log_dt.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < log_dt.size(); ++k) {
        sx += log_dt[k];
        sy += log_err[k];
        sxx += log_dt[k] * log_dt[k];
        sxy += log_dt[k] * log_err[k];
    }
    est.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    est.valid = true;
    return est;
}

} // namespace atomlaser
