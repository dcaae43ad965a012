#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>

#include "escapedim/errors.hpp"
#include "escapedim/pipeline.hpp"
#include "escapedim/verify.hpp"

namespace fs = std::filesystem;
using namespace escapedim;

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kInvalidConfig = 2,
    kIncomplete = 3,
    kVerificationFailed = 4,
    kRangeExceeded = 5,
};

int cmd_construct(const RunConfig& cfg) {
    const Construction c = construct(cfg);
    save_construction(c, cfg.out);
    std::string extra;
    if (c.comb) extra = fmt::format(", comb alpha {}", c.comb->alpha);
    if (cfg.power_N() > 1) extra += fmt::format(", N {}, rho0 {}", cfg.power_N(), cfg.base_rho());
    fmt::print("construct: kind {}{} -> {}\n", kind_name(c.handle.kind()), extra, (fs::path(cfg.out) / "construction.json").string());
    return kOk;
}

int cmd_poles(const RunConfig& cfg) {
    const Construction c = load_construction(cfg.out);
    const double radius = cfg.radius.value_or(c.config.atlas_radius());
    const AtlasRun run = enumerate_poles(c, radius);
    write_atomic(fs::path(cfg.out) / "poles.json", run.atlas.to_json() + "\n");
    write_atomic(fs::path(cfg.out) / "poles.csv", run.atlas.to_csv());
    fmt::print("poles: {} poles within {}\n", run.atlas.records.size(), radius);
    if (run.completeness.performed)
        fmt::print("completeness at r = {}: atlas {} winding {}\n", run.completeness.radius,
                   run.completeness.atlas_count, run.completeness.winding_count);
    if (!run.completeness.passed()) {
        fmt::print(stderr, "completeness check failed\n");
        return kIncomplete;
    }
    return kOk;
}

int cmd_dimension(const RunConfig& cfg) {
    const Construction c = load_construction(cfg.out);
    const fs::path atlas_file = fs::path(cfg.out) / "poles.json";
    if (!fs::exists(atlas_file)) throw InvalidArgument("no pole atlas in " + cfg.out + "; run poles first");
    const PoleAtlas atlas = PoleAtlas::from_json(read_file(atlas_file));
    DimensionOptions opt;
    if (c.handle.kind() != FunctionKind::theorem2_exp) opt.rho = c.config.rho;
    DimensionEstimate e = critical_exponent(atlas, opt);
    e.theoretical = c.config.theoretical();
    const DimensionRow row = dimension_row(e);
    write_atomic(fs::path(cfg.out) / "dimension.json", e.to_json() + "\n");
    write_atomic(fs::path(cfg.out) / "dimension_blocks.csv", e.blocks_csv());
    write_atomic(fs::path(cfg.out) / "dimension_row.csv", row.to_csv());
    fmt::print("dimension: t* {:.4f} in [{:.4f}, {:.4f}], theoretical {:.4f}, gap {:.4f}\n", row.t_star, row.t_low,
               row.t_high, row.theoretical, row.gap);
    if (cfg.check && row.gap > cfg.slack) {
        fmt::print(stderr, "bracket misses the theoretical value by {:.4f} > {}\n", row.gap, cfg.slack);
        return kVerificationFailed;
    }
    return kOk;
}

int cmd_growth(const RunConfig& cfg) {
    Construction c = load_construction(cfg.out);
    if (cfg.radius) c.config.radius = cfg.radius;
    const GrowthCurve curve = growth_curve(c.handle, growth_radii(c));
    write_atomic(fs::path(cfg.out) / "growth.json", curve.to_json() + "\n");
    write_atomic(fs::path(cfg.out) / "growth.csv", curve.to_csv());
    fmt::print("growth: order {:.4f}, loglog density {:.4f}\n", curve.order_fit, curve.loglog_density);
    return kOk;
}

int cmd_verify_all(const RunConfig& cfg) {
    VerifyOptions opt;
    opt.quick = cfg.quick;
    opt.tooth_scale = cfg.tooth_scale;
    opt.dimension_slack = cfg.slack;
    const VerifyReport report = run_all(opt, [](const CriterionResult& r) {
        fmt::print("{}\n", format_result(r));
        std::fflush(stdout);
    });
    write_atomic(fs::path(cfg.out) / "verify.json", report.to_json());
    write_atomic(fs::path(cfg.out) / "verify.csv", report.to_csv());
    return report.all_passed() ? kOk : kVerificationFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Escaping-set dimension experiments for meromorphic functions of finite order"};
    app.set_config("--config", "", "key=value configuration file; flags override it");
    app.fallthrough();
    app.require_subcommand(1);

    RunConfig cfg;
    app.add_option("--M", cfg.M, "Multiplicity of the poles");
    app.add_option("--rho", cfg.rho, "Order of f; 0 gives F alone, >= 2 uses the power trick");
    app.add_option("--radius", cfg.radius, "Atlas radius");
    app.add_option("--alpha", cfg.alpha, "Comb order, overriding rho / 2");
    app.add_option("--lambda", cfg.lambda, "Scaling f(lambda z)");
    app.add_option("--q", cfg.q, "Exponent q of the modified exponential comb (0 for the sector comb)");
    app.add_option("--c", cfg.c, "Constant c of the modified exponential comb");
    app.add_option("--truncation-N", cfg.truncation_N, "Explicit teeth of the comb product");
    app.add_option("--tolerance", cfg.tolerance, "Conformal map accuracy target");
    app.add_option("--out", cfg.out, "Artifact directory");
    app.add_flag("--quick", cfg.quick, "Run the quick subset of verify-all");
    app.add_option("--tooth-scale", cfg.tooth_scale, "Multiply every tooth length");
    app.add_option("--slack", cfg.slack, "Allowed gap between the dimension bracket and the theoretical value");
    app.add_option("--check", cfg.check, "Exit nonzero when the dimension gap exceeds the slack");
    app.add_option("--family", cfg.family, "auto or theorem2");
    app.add_option("--sector", cfg.sector, "delta or full");

    auto* construct_cmd = app.add_subcommand("construct", "Build the function and its comb");
    auto* poles_cmd = app.add_subcommand("poles", "Enumerate the poles of a construction");
    auto* dimension_cmd = app.add_subcommand("dimension", "Estimate the critical exponent of a pole atlas");
    auto* growth_cmd = app.add_subcommand("growth", "Sample the Nevanlinna characteristic");
    auto* verify_cmd = app.add_subcommand("verify-all", "Run the acceptance checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalidConfig;
    }

    try {
        cfg.validate();
        if (construct_cmd->parsed()) return cmd_construct(cfg);
        if (poles_cmd->parsed()) return cmd_poles(cfg);
        if (dimension_cmd->parsed()) return cmd_dimension(cfg);
        if (growth_cmd->parsed()) return cmd_growth(cfg);
        if (verify_cmd->parsed()) return cmd_verify_all(cfg);
    } catch (const InvalidArgument& e) {
        fmt::print(stderr, "invalid configuration: {}\n", e.what());
        return kInvalidConfig;
    } catch (const PreconditionRadius& e) {
        fmt::print(stderr, "invalid configuration: {}\n", e.what());
        return kInvalidConfig;
    } catch (const EvaluationRangeExceeded& e) {
        fmt::print(stderr, "evaluation range exceeded: {}\n", e.what());
        return kRangeExceeded;
    } catch (const InsufficientBlocks& e) {
        fmt::print(stderr, "incomplete atlas: {}\n", e.what());
        return kIncomplete;
    } catch (const RegionTooLarge& e) {
        fmt::print(stderr, "incomplete atlas: {}\n", e.what());
        return kIncomplete;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kFailure;
    }
    return kFailure;
}
