#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "escapedim/errors.hpp"
#include "escapedim/pipeline.hpp"

using namespace escapedim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("escapedim_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig half_config(const fs::path& dir) {
    RunConfig cfg;
    cfg.M = 1;
    cfg.rho = 1.0;
    cfg.radius = 2000.0;
    cfg.out = dir.string();
    return cfg;
}

}  // namespace

TEST_CASE("run config routes by rho") {
    RunConfig cfg;
    cfg.rho = 0.0;
    CHECK(cfg.kind() == FunctionKind::F_arcsin);
    cfg.M = 2;
    cfg.rho = 1.0;
    CHECK(cfg.kind() == FunctionKind::composed_f);
    CHECK(cfg.comb_alpha() == 0.5);
    cfg.M = 1;
    cfg.rho = 3.0;
    CHECK(cfg.kind() == FunctionKind::power_trick);
    CHECK(cfg.power_N() == 3);
    CHECK(cfg.base_rho() == 1.0);
    cfg.rho = 3.9;
    CHECK(cfg.power_N() == 3);
    CHECK(cfg.base_rho() >= 1.0);
    CHECK(cfg.base_rho() < 2.0);
    cfg.rho = 1.5;
    CHECK(cfg.comb_truncation() == 256);
    CHECK(cfg.theoretical() == doctest::Approx(6.0 / 7.0));
    cfg.family = "theorem2";
    CHECK(cfg.kind() == FunctionKind::theorem2_exp);
    CHECK(cfg.theoretical() == 2.0);
    CHECK(cfg.atlas_radius() == 5.0);
}

TEST_CASE("run config validation") {
    auto invalid = [](auto mutate) {
        RunConfig cfg;
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    };
    invalid([](RunConfig& c) { c.M = 0; });
    invalid([](RunConfig& c) { c.rho = -1.0; });
    invalid([](RunConfig& c) { c.lambda = 0.0; });
    invalid([](RunConfig& c) { c.lambda = 1.5; });
    invalid([](RunConfig& c) { c.tolerance = 0.0; });
    invalid([](RunConfig& c) { c.alpha = 1.0; });
    invalid([](RunConfig& c) { c.radius = -3.0; });
    invalid([](RunConfig& c) { c.family = "other"; });
    RunConfig ok;
    CHECK_NOTHROW(ok.validate());

    ok.radius = 123.0;
    ok.alpha = 0.4;
    const RunConfig back = RunConfig::from_json(ok.to_json());
    CHECK(back.radius == ok.radius);
    CHECK(back.alpha == ok.alpha);
    CHECK_FALSE(back.truncation_N);
}

TEST_CASE("atomic writes replace the target") {
    const fs::path dir = scratch("atomic");
    write_atomic(dir / "a.txt", "first");
    write_atomic(dir / "a.txt", "second");
    CHECK(read_file(dir / "a.txt") == "second");
    CHECK_FALSE(fs::exists(dir / "a.txt.tmp"));
    CHECK_THROWS_AS(read_file(dir / "absent"), InvalidArgument);
    fs::remove_all(dir);
}

TEST_CASE("construct, poles and dimension through artifacts") {
    const fs::path dir = scratch("half");
    const RunConfig cfg = half_config(dir);
    const Construction built = construct(cfg);
    REQUIRE(built.comb);
    CHECK(built.comb->alpha == 0.5);
    save_construction(built, dir);
    CHECK(fs::exists(dir / "construction.json"));
    CHECK(fs::exists(dir / "comb.json"));

    const Construction loaded = load_construction(dir);
    CHECK(loaded.handle.kind() == FunctionKind::composed_f);
    const cplx z(3.0, -7.0);
    CHECK(loaded.handle.eval(z) == built.handle.eval(z));

    const AtlasRun run = enumerate_poles(loaded, 2000.0);
    CHECK(run.completeness.performed);
    CHECK(run.completeness.passed());
    CHECK(run.atlas.sector.has_value());

    // identical config gives byte-identical artifacts
    const std::string text = run.atlas.to_json();
    CHECK(enumerate_poles(load_construction(dir), 2000.0).atlas.to_json() == text);

    // a smaller radius gives a subset
    const PoleAtlas small = enumerate_poles(loaded, 1000.0).atlas;
    CHECK(small.records.size() == run.atlas.count_within(1000.0));

    // the file round trip does not move the estimate
    DimensionOptions opt;
    opt.rho = cfg.rho;
    const DimensionEstimate direct = critical_exponent(run.atlas, opt);
    const DimensionEstimate via_file = critical_exponent(PoleAtlas::from_json(text), opt);
    CHECK(via_file.t_star == direct.t_star);
    CHECK(direct.theoretical == doctest::Approx(2.0 / 3.0));
    const DimensionRow row = dimension_row(direct);
    CHECK(row.gap <= 0.05);
    CHECK(row.to_csv().rfind("t_star,t_low,t_high,theoretical,gap\n", 0) == 0);
    fs::remove_all(dir);
}

TEST_CASE("missing construction is a configuration error") {
    CHECK_THROWS_AS(load_construction(scratch("missing")), InvalidArgument);
}

TEST_CASE("F and power-trick constructions") {
    RunConfig cfg;
    cfg.rho = 0.0;
    const Construction F = construct(cfg);
    CHECK(F.handle.kind() == FunctionKind::F_arcsin);
    CHECK_FALSE(F.comb);
    CHECK(enumerate_poles(F, 1e3).atlas.records.size() == poles_of_F(1e3, F.handle.config()).records.size());

    cfg.rho = 2.0;
    cfg.sector = "full";
    const Construction P = construct(cfg);
    CHECK(P.handle.kind() == FunctionKind::power_trick);
    CHECK(P.handle.power_N() == 2);
    const PoleAtlas lifted = enumerate_poles(P, 20.0).atlas;
    const PoleAtlas base = compose_f_poles(*P.map, P.handle.config(), 400.0);
    CHECK(lifted.records.size() == 2 * base.records.size());

    // T(r, f0(z^2)) = T(r^2, f0), and the order doubles
    const GrowthCurve lifted_curve = growth_curve(P.handle, {20.0, 40.0});
    const GrowthCurve base_curve = growth_curve(*P.handle.base(), {400.0, 1600.0});
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(lifted_curve.samples[i].T_r == base_curve.samples[i].T_r);
        CHECK(lifted_curve.samples[i].n_r == 2 * base_curve.samples[i].n_r);
    }
    CHECK(lifted_curve.order_fit == doctest::Approx(2.0 * base_curve.order_fit));
}

TEST_CASE("scaled construction") {
    RunConfig cfg;
    cfg.rho = 0.0;
    cfg.lambda = 0.5;
    const Construction c = construct(cfg);
    CHECK(c.handle.kind() == FunctionKind::scaled);
    const PoleAtlas a = enumerate_poles(c, 200.0).atlas;
    const PoleAtlas base = poles_of_F(100.0, c.handle.config());
    REQUIRE(a.records.size() == base.records.size());
    CHECK(a.records.front().location == base.records.front().location / 0.5);
    CHECK(growth_curve(c.handle, {200.0, 400.0}).samples[0].T_r ==
          doctest::Approx(growth_curve(*c.handle.base(), {100.0, 200.0}).samples[0].T_r).epsilon(1e-12));
}

TEST_CASE("growth radii") {
    RunConfig cfg;
    cfg.rho = 0.0;
    const Construction F = construct(cfg);
    const auto r = growth_radii(F);
    CHECK(r.size() == 9);
    CHECK(r.front() == doctest::Approx(1e2));
    CHECK(r.back() == doctest::Approx(1e6));
    Construction tiny = F;
    tiny.config.radius = 150.0;
    CHECK_THROWS_AS(growth_radii(tiny), InvalidArgument);
}
