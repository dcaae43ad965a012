#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "escapedim/comb.hpp"
#include "escapedim/conformal_map.hpp"
#include "escapedim/dimension.hpp"
#include "escapedim/growth.hpp"
#include "escapedim/pole_atlas.hpp"
#include "escapedim/speiser.hpp"

namespace escapedim {

// Parameters shared by every command. Unset optionals take kind-dependent defaults.
struct RunConfig {
    int M = 1;
    double rho = 1.0;
    std::optional<double> radius;
    std::optional<double> alpha;  // overrides the comb order rho0 / 2
    double lambda = 1.0;
    int q = 0;                    // q > 0 selects the modified exponential comb
    double c = 10.0;
    std::optional<int> truncation_N;
    double tolerance = 1e-6;      // conformal map accuracy target
    std::string out = "escapedim_out";
    bool quick = false;
    double tooth_scale = 1.0;
    double slack = 0.05;          // allowed gap between bracket and theoretical value
    bool check = true;            // dimension exits nonzero when the gap exceeds the slack
    std::string family = "auto";  // "auto" follows rho, "theorem2" selects H o exp
    std::string sector = "delta"; // "delta" or "full" for composed atlases

    // Throws InvalidArgument.
    void validate() const;

    [[nodiscard]] FunctionKind kind() const;
    [[nodiscard]] int power_N() const;          // floor(rho) when rho >= 2, else 1
    [[nodiscard]] double base_rho() const;      // rho / power_N()
    [[nodiscard]] double comb_alpha() const;
    [[nodiscard]] int comb_truncation() const;
    [[nodiscard]] double atlas_radius() const;  // radius of the atlas of f itself
    [[nodiscard]] double theoretical() const;   // 2 for the H o exp family

    [[nodiscard]] std::string to_json() const;
    static RunConfig from_json(const std::string& text);
};

// Write to a temporary file in the same directory, then rename over the target.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

struct Construction {
    RunConfig config;
    FunctionHandle handle;                       // the function f of the run
    std::optional<CombSpec> comb;
    std::shared_ptr<const ConformalMap> map;
};

// Builds f from the config; the map is certified to the config tolerance.
Construction construct(const RunConfig& config);
// Writes construction.json and, when a comb is used, comb.json.
void save_construction(const Construction& c, const std::filesystem::path& dir);
// Rebuilds the construction from the artifacts of `dir`; InvalidArgument when absent.
Construction load_construction(const std::filesystem::path& dir);

struct CompletenessCheck {
    double radius = 0.0;
    double atlas_count = 0.0;    // with multiplicity
    double winding_count = 0.0;  // argument-principle count over the full disc
    bool performed = false;
    [[nodiscard]] bool passed() const { return !performed || atlas_count == winding_count; }
};

struct AtlasRun {
    PoleAtlas atlas;
    CompletenessCheck completeness;
};

// Atlas of f up to the config radius. The sector applies to the comb function underneath.
AtlasRun enumerate_poles(const Construction& c, double radius);

struct DimensionRow {
    double t_star = 0.0;
    double t_low = 0.0;
    double t_high = 0.0;
    double theoretical = 0.0;
    double gap = 0.0;  // distance from the bracket to the theoretical value
    [[nodiscard]] std::string to_csv() const;
};

DimensionRow dimension_row(const DimensionEstimate& e);

// Geometric radii from 1e2 to the atlas radius (F uses up to 1e6).
std::vector<double> growth_radii(const Construction& c);

}  // namespace escapedim
