// Command-line harness for the non-Markovian atom-laser simulator.
//
// Subcommands:
//   simulate         single pump rate -> CSV/JSON artifacts + manifest
//   table1           pump-rate sweep -> table1.csv + per-row artifacts
//   spectrum-figure  peak-normalized spectra on a shared frequency grid
//   validate         oracle suite (quick|full), exit 1 on any failure
//
// Exit codes: 0 ok, 1 validation failure, 2 configuration error,
// 3 numerical failure, 4 non-convergence.

#include <chrono>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atomlaser/experiment.hpp"
#include "atomlaser/validate.hpp"

namespace al = atomlaser;

namespace {

// Parameter set used by `validate` when no config is given.
al::RunConfig builtin_validation_config() {
    al::RunConfig cfg;
    cfg.params.m = 5e-26;
    cfg.params.g = 9.8 * std::sin(0.18);
    cfg.params.omega0 = 2.0 * M_PI * 123.0;
    cfg.params.sigma_k = 4.4e5;
    cfg.params.gamma = 2.0e4;
    cfg.params.r = 2.0e4;
    cfg.params.n_s = 47.0;
    cfg.dt = 4e-5;
    cfg.t_max = 2.0;
    return cfg;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::size_t threads = 0;
};

void warn_near_threshold(const al::SteadyState& st) {
    if (st.threshold_ratio < 10.0)
        std::fprintf(stderr,
                     "WARNING: n_bar/n_s = %.2f < 10: the linearized pump is only valid well "
                     "above threshold; treat these results with caution.\n",
                     st.threshold_ratio);
}

int cmd_simulate(const CommonArgs& args) {
    auto t0 = std::chrono::steady_clock::now();
    auto kv = al::read_config_file(args.config_path);
    al::RunConfig cfg = al::validate_config(kv);
    al::fs::path out(args.out_dir);
    al::fs::create_directories(out);

    al::PipelineOptions opt;
    opt.need_spectrum = cfg.linewidth_method != al::LinewidthMethod::exp_fit;
    if (cfg.checkpoint_steps > 0) {
        opt.checkpoint.every_steps = cfg.checkpoint_steps;
        opt.checkpoint.path = out / "checkpoint.bin";
        opt.checkpoint.config_checksum = al::config_checksum(kv);
    }

    al::Manifest manifest;
    manifest.subcommand = "simulate";
    manifest.config_path = args.config_path;
    manifest.config_checksum_hex = al::checksum_hex(al::config_checksum(kv));
    manifest.base = out;

    manifest.status.push_back("run r=" + al::format_double(cfg.params.r) + ": started");
    al::RunResult res = al::run_pipeline(cfg, opt);
    warn_near_threshold(res.steady);
    al::write_run_artifacts(out, res, manifest, true);
    manifest.status.back() += ", finished";

    manifest.wall_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    manifest.write(out / "manifest.json");

    std::printf("P = %.4f /s, n_bar = %.2f (threshold ratio %.2f)\n", res.steady.P,
                res.steady.n_bar, res.steady.threshold_ratio);
    if (res.has_spectrum)
        std::printf("gamma_fwhm = %.6g /s (half width %.6g), peak shift %+.4g rad/s\n",
                    res.spectrum.gamma_fwhm, 0.5 * res.spectrum.gamma_fwhm, res.peak_shift);
    std::printf("gamma_expfit = %.6g /s (half width %.6g), gamma_bm = %.6g /s\n",
                res.gamma_expfit, 0.5 * res.gamma_expfit, res.bma.Gamma_bm);
    std::printf("artifacts in %s\n", out.string().c_str());
    return 0;
}

int cmd_table1(const CommonArgs& args, const std::vector<std::string>& row_tokens, bool long_ok) {
    auto t0 = std::chrono::steady_clock::now();
    auto kv = al::read_config_file(args.config_path);
    al::RunConfig cfg = al::validate_config(kv);
    std::vector<double> rates;
    for (const std::string& tok : row_tokens) {
        double kilo = al::detail::parse_double("--rows", tok);
        if (kilo != 20.0 && kilo != 40.0 && kilo != 80.0 && kilo != 800.0)
            throw al::config_error("--rows entries must be from {20,40,80,800} (units 10^3/s)");
        if (kilo == 800.0 && !long_ok)
            throw al::config_error("the r = 800x10^3/s row is gated behind --long");
        rates.push_back(kilo * 1e3);
    }
    if (rates.empty()) throw al::config_error("empty row selection");

    al::fs::path out(args.out_dir);
    al::Manifest manifest;
    manifest.subcommand = "table1";
    manifest.config_path = args.config_path;
    manifest.config_checksum_hex = al::checksum_hex(al::config_checksum(kv));
    manifest.base = out;

    std::vector<al::TableRow> rows = al::run_table1(cfg, out, rates, args.threads, manifest);
    bool any_failed = false;
    std::printf("%10s %10s %10s %12s %8s %s\n", "r_per_s", "n_bar", "gamma_s", "gamma_bm_s",
                "ratio", "pass");
    for (const al::TableRow& row : rows) {
        if (!row.ok) {
            any_failed = true;
            manifest.status.push_back("row r=" + al::format_double(row.r) +
                                      ": failed: " + row.error);
            std::printf("%10.0f  FAILED: %s\n", row.r, row.error.c_str());
            continue;
        }
        manifest.status.push_back("row r=" + al::format_double(row.r) + ": finished");
        warn_near_threshold(row.result.steady);
        std::printf("%10.0f %10.2f %10.4f %12.6f %8.1f %s\n", row.r, row.result.steady.n_bar,
                    row.gamma_hw, row.result.bma.Gamma_bm, row.ratio,
                    row.pass_nbar && row.pass_gamma && row.pass_gamma_bm ? "yes" : "NO");
    }
    manifest.wall_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    manifest.write(out / "manifest.json");
    return any_failed ? 3 : 0;
}

int cmd_spectrum_figure(const CommonArgs& args) {
    auto t0 = std::chrono::steady_clock::now();
    auto kv = al::read_config_file(args.config_path);
    al::RunConfig cfg = al::validate_config(kv);
    al::fs::path out(args.out_dir);
    al::Manifest manifest;
    manifest.subcommand = "spectrum-figure";
    manifest.config_path = args.config_path;
    manifest.config_checksum_hex = al::checksum_hex(al::config_checksum(kv));
    manifest.base = out;

    al::FigureResult fig = al::run_spectrum_figure(cfg, out, args.threads, manifest);
    for (std::size_t i = 0; i < fig.rates.size(); ++i)
        std::printf("r = %8.0f /s: fwhm = %.6g /s (half width %.6g)\n", fig.rates[i],
                    fig.fwhm[i], 0.5 * fig.fwhm[i]);
    bool narrowing = fig.fwhm[0] > fig.fwhm[1] && fig.fwhm[1] > fig.fwhm[2];
    std::printf("gain narrowing (strictly decreasing width): %s\n", narrowing ? "yes" : "NO");
    manifest.status.push_back(narrowing ? "figure: finished, widths decreasing"
                                        : "figure: finished, widths NOT decreasing");
    manifest.wall_seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    manifest.write(out / "manifest.json");
    return narrowing ? 0 : 3;
}

int cmd_validate(const CommonArgs& args, const std::string& level_str) {
    al::RunConfig cfg;
    if (!args.config_path.empty())
        cfg = al::load_config(args.config_path);
    else
        cfg = builtin_validation_config();
    al::ValidationLevel level =
        level_str == "full" ? al::ValidationLevel::full : al::ValidationLevel::quick;
    std::vector<al::ValidationCheck> checks = al::run_validation(cfg, level);
    bool all = true;
    std::printf("%-45s %-6s %s\n", "check", "result", "detail");
    for (const al::ValidationCheck& c : checks) {
        all = all && c.pass;
        std::printf("%-45s %-6s %s\n", c.name.c_str(), c.pass ? "pass" : "FAIL",
                    c.detail.c_str());
    }
    if (!args.out_dir.empty() && args.out_dir != "out") {
        // validation mode also emits the kernel samples for inspection
        al::fs::path out(args.out_dir);
        al::fs::create_directories(out);
        al::KernelSamples ks = al::KernelSamples::build(cfg.params, cfg.dt, 20.0,
                                                        cfg.kernel_eps, 1.0);
        std::vector<double> t, re_f, im_f, re_H, im_H;
        for (std::size_t i = 0; i < ks.grid.n_steps; ++i) {
            t.push_back(ks.grid.t(i));
            re_f.push_back(ks.f_values[i].real());
            im_f.push_back(ks.f_values[i].imag());
            re_H.push_back(ks.H_values[i].real());
            im_H.push_back(ks.H_values[i].imag());
        }
        al::write_csv(out / "kernel_samples.csv",
                      {{"dt_s", &t}, {"re_f", &re_f}, {"im_f", &im_f},
                       {"re_H", &re_H}, {"im_H", &im_H}});
        std::printf("kernel samples written to %s\n",
                    (out / "kernel_samples.csv").string().c_str());
    }
    return all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-Markovian single-mode atom laser: linewidth and spectrum solver"};
    app.require_subcommand(1);

    CommonArgs args;
    std::vector<std::string> rows = {"20", "40", "80"};
    bool long_rows = false;
    std::string level = "quick";

    CLI::App* sim = app.add_subcommand("simulate", "run one pump rate end to end");
    sim->add_option("--config", args.config_path, "configuration file")->required();
    sim->add_option("--out", args.out_dir, "output directory");
    sim->add_option("--threads", args.threads, "worker threads (0 = auto)");

    CLI::App* tab = app.add_subcommand("table1", "pump-rate sweep with pass/fail");
    tab->add_option("--config", args.config_path, "configuration file")->required();
    tab->add_option("--out", args.out_dir, "output directory");
    tab->add_option("--rows", rows, "pump rates in 10^3/s from {20,40,80,800}")->delimiter(',');
    tab->add_flag("--long", long_rows, "allow the long r=800x10^3/s row");
    tab->add_option("--threads", args.threads, "worker threads (0 = auto)");

    CLI::App* fig = app.add_subcommand("spectrum-figure", "shared-grid spectra for three rates");
    fig->add_option("--config", args.config_path, "configuration file")->required();
    fig->add_option("--out", args.out_dir, "output directory");
    fig->add_option("--threads", args.threads, "worker threads (0 = auto)");

    CLI::App* val = app.add_subcommand("validate", "run the oracle suite");
    val->add_option("--config", args.config_path, "configuration file (optional)");
    val->add_option("--out", args.out_dir, "directory for kernel sample CSV (optional)");
    val->add_option("--level", level, "quick|full")
        ->check(CLI::IsMember({"quick", "full"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(args);
        if (tab->parsed()) return cmd_table1(args, rows, long_rows);
        if (fig->parsed()) return cmd_spectrum_figure(args);
        if (val->parsed()) return cmd_validate(args, level);
    } catch (const al::config_error& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const al::convergence_error& e) {
        std::fprintf(stderr, "convergence failure: %s\n", e.what());
        return 4;
    } catch (const al::domain_error& e) {
        std::fprintf(stderr, "domain error: %s\n", e.what());
        return 3;
    } catch (const al::numerical_error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
