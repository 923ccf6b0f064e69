#pragma once

// Resumable envelope solves.  A snapshot carries the stepper's sliding
// window plus the decimated samples collected so far; since the stepper
// state IS its history window, resuming reproduces the uninterrupted run
// bit for bit.  Snapshots are bound to a config checksum and refuse to
// resume anything else.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "atomlaser/io.hpp"
#include "atomlaser/laser.hpp"

namespace atomlaser {

struct CheckpointConfig {
    std::size_t every_steps = 0; // snapshot cadence; 0 disables checkpointing
    fs::path path;
    std::uint64_t config_checksum = 0;
};

namespace detail {

inline constexpr char ckpt_magic[8] = {'A', 'L', 'C', 'K', 'P', 'T', '0', '1'};

struct CkptHeader {
    char magic[8];
    std::uint64_t config_checksum;
    double P;
    double dt;
    std::uint64_t n_steps;
    std::uint64_t stride;
    std::uint64_t support;
    std::uint64_t step;
    std::uint64_t window_begin;
    std::uint64_t window_size;
    std::uint64_t decimated_size;
};

} // namespace detail

class CheckpointedEnvelopeSolver {
public:
    CheckpointedEnvelopeSolver(double P, const TimeGrid& grid, const KernelSamples& ks,
                               std::size_t stride, CheckpointConfig ck)
        : P_(P), grid_(grid), ks_(&ks), stride_(stride == 0 ? 1 : stride), ck_(std::move(ck)),
          acc_{&ks.H_values, grid.dt},
          stepper_(grid, acc_, cplx(P), 0.0, cplx(1.0), ks.support_index) {
        std::size_t n_dec = (grid_.n_steps - 1) / stride_ + 1;
        decimated_.reserve(n_dec);
        decimated_.push_back(cplx(1.0));
    }

    // Loads the snapshot when one exists; returns true if resumed.
    bool resume_or_start() {
        if (ck_.path.empty() || !fs::exists(ck_.path)) return false;
        std::ifstream in(ck_.path, std::ios::binary);
        if (!in) throw config_error("checkpoint: cannot open " + ck_.path.string());
        detail::CkptHeader h{};
        in.read(reinterpret_cast<char*>(&h), sizeof h);
        if (!in || std::memcmp(h.magic, detail::ckpt_magic, 8) != 0)
            throw config_error("checkpoint: corrupt snapshot (bad magic); start a fresh run");
        if (h.config_checksum != ck_.config_checksum)
            throw config_error("checkpoint: config checksum mismatch; the snapshot belongs to a "
                               "different configuration");
        if (h.P != P_ || h.dt != grid_.dt || h.n_steps != grid_.n_steps || h.stride != stride_ ||
            h.support != ks_->support_index)
            throw config_error("checkpoint: snapshot solver state does not match this run");
        std::vector<cplx> window(h.window_size);
        decimated_.assign(h.decimated_size, cplx(0.0));
        in.read(reinterpret_cast<char*>(window.data()),
                static_cast<std::streamsize>(window.size() * sizeof(cplx)));
        in.read(reinterpret_cast<char*>(decimated_.data()),
                static_cast<std::streamsize>(decimated_.size() * sizeof(cplx)));
        std::uint64_t stored_sum = 0;
        in.read(reinterpret_cast<char*>(&stored_sum), sizeof stored_sum);
        if (!in) throw config_error("checkpoint: corrupt snapshot (truncated); start a fresh run");
        std::uint64_t sum = fnv1a64(&h, sizeof h);
        sum = fnv1a64(window.data(), window.size() * sizeof(cplx), sum);
        sum = fnv1a64(decimated_.data(), decimated_.size() * sizeof(cplx), sum);
        if (sum != stored_sum)
            throw config_error("checkpoint: corrupt snapshot (checksum); start a fresh run");
        stepper_.restore_window(h.step, window);
        return true;
    }

    std::size_t step() const { return stepper_.index(); }

    // Advances to min(step_end, horizon), flushing snapshots on cadence.
    void run_to(std::size_t step_end) {
        std::size_t end = std::min(step_end, grid_.n_steps - 1);
        while (stepper_.index() < end) {
            stepper_.step();
            std::size_t i = stepper_.index();
            if (i % stride_ == 0) {
                cplx v = stepper_.current();
                decimated_.push_back(v);
                if (std::abs(v) > envelope_growth_guard)
                    throw numerical_error("checkpointed solve: amplitude growing without bound; "
                                          "P exceeds the total loss rate");
            }
            if (ck_.every_steps > 0 && i % ck_.every_steps == 0) flush();
        }
    }

    void flush() const {
        if (ck_.path.empty()) return;
        detail::CkptHeader h{};
        std::memcpy(h.magic, detail::ckpt_magic, 8);
        h.config_checksum = ck_.config_checksum;
        h.P = P_;
        h.dt = grid_.dt;
        h.n_steps = grid_.n_steps;
        h.stride = stride_;
        h.support = ks_->support_index;
        h.step = stepper_.index();
        h.window_begin = stepper_.window_begin();
        std::vector<cplx> window;
        stepper_.save_window(window);
        h.window_size = window.size();
        h.decimated_size = decimated_.size();
        std::uint64_t sum = fnv1a64(&h, sizeof h);
        sum = fnv1a64(window.data(), window.size() * sizeof(cplx), sum);
        sum = fnv1a64(decimated_.data(), decimated_.size() * sizeof(cplx), sum);
        fs::path tmp = ck_.path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw config_error("checkpoint: cannot write " + tmp.string());
            out.write(reinterpret_cast<const char*>(&h), sizeof h);
            out.write(reinterpret_cast<const char*>(window.data()),
                      static_cast<std::streamsize>(window.size() * sizeof(cplx)));
            out.write(reinterpret_cast<const char*>(decimated_.data()),
                      static_cast<std::streamsize>(decimated_.size() * sizeof(cplx)));
            out.write(reinterpret_cast<const char*>(&sum), sizeof sum);
        }
        fs::rename(tmp, ck_.path);
    }

    // Completes the run and removes the snapshot.
    EnvelopeResult finish() {
        run_to(grid_.n_steps - 1);
        EnvelopeResult res;
        std::size_t n_dec = (grid_.n_steps - 1) / stride_ + 1;
        if (decimated_.size() != n_dec)
            throw numerical_error("checkpointed solve: decimated sample count mismatch");
        res.decimated = ComplexSeries(TimeGrid(grid_.dt * static_cast<double>(stride_), n_dec),
                                      decimated_);
        res.stride = stride_;
        res.P = P_;
        res.decimated.check_finite("checkpointed envelope");
        if (!ck_.path.empty() && fs::exists(ck_.path)) fs::remove(ck_.path);
        return res;
    }

private:
    double P_;
    TimeGrid grid_;
    const KernelSamples* ks_;
    std::size_t stride_;
    CheckpointConfig ck_;
    SampledKernelAccessor acc_;
    VolterraStepper<SampledKernelAccessor> stepper_;
    std::vector<cplx> decimated_;
};

} // namespace atomlaser
