#include <doctest.h>

#include <cstring>

#include "atomlaser/core.hpp"

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

std::map<std::string, std::string> full_map() {
    return {{"mass_kg", "5e-26"},
            {"g_m_s2", "1.7544898195730771"},
            {"omega0_rad_s", "772.8317927830891"},
            {"sigma_k_per_m", "4.4e5"},
            {"gamma_s2", "2e4"},
            {"r_per_s", "2e4"},
            {"n_s", "47"},
            {"dt_s", "4e-5"},
            {"t_max_s", "2.0"}};
}

} // namespace

TEST_SUITE_BEGIN("core");

TEST_CASE("derived constants match the closed-form arithmetic") {
    PhysicalParams p = reference_params();
    DerivedConstants d = derive_constants(p);
    CHECK(d.lambda == doctest::Approx(p.hbar / (2.0 * p.m)).epsilon(1e-15));
    CHECK(d.lambda == doctest::Approx(1.0546e-9).epsilon(1e-4));
    CHECK(d.beta_defined);
    CHECK(d.beta == doctest::Approx(std::cbrt(2.0 * p.m * p.m * p.g / (p.hbar * p.hbar)))
                        .epsilon(1e-15));
    CHECK(d.beta == doctest::Approx(9.2e5).epsilon(0.005));
    // downstream timestep sanity scale
    CHECK(d.lambda * p.sigma_k * p.sigma_k == doctest::Approx(204.2).epsilon(1e-3));
}

TEST_CASE("g = 0 flags beta undefined and keeps lambda") {
    PhysicalParams p = reference_params();
    p.g = 0.0;
    DerivedConstants d = derive_constants(p);
    CHECK_FALSE(d.beta_defined);
    CHECK(d.lambda == doctest::Approx(p.hbar / (2.0 * p.m)).epsilon(1e-15));
}

TEST_CASE("derive_constants is pure and bit-stable") {
    PhysicalParams p = reference_params();
    DerivedConstants a = derive_constants(p);
    DerivedConstants b = derive_constants(p);
    CHECK(std::memcmp(&a.lambda, &b.lambda, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.beta, &b.beta, sizeof(double)) == 0);
    CHECK(a.beta_defined == b.beta_defined);
}

TEST_CASE("invalid parameters name the offending field") {
    PhysicalParams p = reference_params();
    p.m = -1.0;
    CHECK_THROWS_WITH_AS(derive_constants(p), doctest::Contains("m"), config_error);
    p = reference_params();
    p.sigma_k = 0.0;
    CHECK_THROWS_WITH_AS(derive_constants(p), doctest::Contains("sigma_k"), config_error);
    p = reference_params();
    p.g = -0.1;
    CHECK_THROWS_WITH_AS(derive_constants(p), doctest::Contains("g"), config_error);
}

TEST_CASE("validate_config applies defaults and copies fields") {
    RunConfig cfg = validate_config(full_map());
    CHECK(cfg.params.m == doctest::Approx(5e-26));
    CHECK(cfg.params.r == doctest::Approx(2e4));
    CHECK(cfg.dt == doctest::Approx(4e-5));
    CHECK(cfg.t_max == doctest::Approx(2.0));
    CHECK(cfg.kernel_eps == doctest::Approx(1e-6));
    CHECK(cfg.selfcons_tol == doctest::Approx(1e-4));
    CHECK(cfg.max_iters == 50);
    CHECK(cfg.linewidth_method == LinewidthMethod::both);
    CHECK(cfg.transient_fraction == doctest::Approx(0.1));
    CHECK(cfg.checkpoint_steps == 0);
    CHECK(cfg.params.hbar == doctest::Approx(1.0545718e-34));
}

TEST_CASE("validate_config rejects bad input with named keys") {
    auto kv = full_map();
    kv["dt_s"] = "0";
    CHECK_THROWS_WITH_AS(validate_config(kv), doctest::Contains("dt_s"), config_error);

    kv = full_map();
    kv.erase("r_per_s");
    CHECK_THROWS_WITH_AS(validate_config(kv), doctest::Contains("r_per_s"), config_error);

    kv = full_map();
    kv["t_max_s"] = "1e-6"; // below dt
    CHECK_THROWS_AS(validate_config(kv), config_error);

    kv = full_map();
    kv["not_a_key"] = "1";
    CHECK_THROWS_WITH_AS(validate_config(kv), doctest::Contains("not_a_key"), config_error);

    kv = full_map();
    kv["linewidth_method"] = "fourier";
    CHECK_THROWS_AS(validate_config(kv), config_error);

    kv = full_map();
    kv["kernel_eps"] = "1.5";
    CHECK_THROWS_AS(validate_config(kv), config_error);

    kv = full_map();
    kv["gamma_s2"] = "twenty";
    CHECK_THROWS_WITH_AS(validate_config(kv), doctest::Contains("gamma_s2"), config_error);
}

TEST_CASE("linewidth method parsing") {
    auto kv = full_map();
    kv["linewidth_method"] = "fft_fwhm";
    CHECK(validate_config(kv).linewidth_method == LinewidthMethod::fft_fwhm);
    kv["linewidth_method"] = "exp_fit";
    CHECK(validate_config(kv).linewidth_method == LinewidthMethod::exp_fit);
}

TEST_CASE("time grid and series invariants") {
    CHECK_THROWS_AS(TimeGrid(0.0, 10), config_error);
    CHECK_THROWS_AS(TimeGrid(1e-3, 1), config_error);
    TimeGrid g(0.5, 5);
    CHECK(g.t(4) == doctest::Approx(2.0));
    CHECK_THROWS_AS(ComplexSeries(g, std::vector<cplx>(3)), config_error);
    ComplexSeries s(g);
    CHECK(s.size() == 5);
    s[2] = cplx(1.0, std::nan(""));
    CHECK_THROWS_AS(s.check_finite("test"), numerical_error);
}

TEST_SUITE_END();
