#pragma once

#include <optional>
#include <string>
#include <vector>

#include "escapedim/conformal_map.hpp"
#include "escapedim/speiser.hpp"

namespace escapedim {

struct GrowthSample {
    double log_r = 0.0;
    double n_r = 0.0;   // poles in |z| <= r with multiplicity
    double N_r = 0.0;
    double m_r = 0.0;   // proximity term, mean of log+ |f| on the circle
    double T_r = 0.0;
    std::optional<double> logM_r;  // entire functions only
    int nodes = 0;      // circle nodes used after doubling
};

struct GrowthCurve {
    std::vector<GrowthSample> samples;
    double order_fit = 0.0;       // slope of log T against log r, top half
    double loglog_density = 0.0;  // slope of log T against log log r, top half
    std::optional<double> p_fit;  // log T ~ c + rho log r - p log log r, top half
    std::optional<double> maxmod_order;    // slope of log log M against log r
    std::optional<double> log_abs_at_zero;  // log |f(0)| for entire f
    std::string kind;

    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

struct GrowthOptions {
    int nodes = 256;
    int max_nodes = 1 << 17;
    double tolerance = 1e-3;  // relative change of T between doublings
};

// Supports F (log r may exceed the double range of r) and composed F o g.
GrowthCurve growth_curve_log(const FunctionHandle& f, const std::vector<double>& log_r,
                             const GrowthOptions& options = {});
GrowthCurve growth_curve(const FunctionHandle& f, const std::vector<double>& r, const GrowthOptions& options = {});
// The entire function g of a conformal map.
GrowthCurve growth_curve(const ConformalMap& g, const std::vector<double>& r, const GrowthOptions& options = {});

// Fill the fitted exponents from the samples.
void fit_growth(GrowthCurve& curve);

struct CompositeBoundSample {
    double log_r = 0.0;
    double T_fg = 0.0;
    double log_R = 0.0;  // log(M(r, g) + 2 |g(0)|)
    double T_f_at_R = 0.0;
    double margin = 0.0;  // (1 + eps) T(R, f) - T(r, f o g)
};

struct CompositeGrowthReport {
    double rho_g = 0.0;
    double density_f = 0.0;  // fitted log T(r, f) / log log r
    double rho_fg = 0.0;
    double lower_margin = 0.0;  // rho_fg - (rho_g density_f - tol)
    double upper_margin = 0.0;  // rho_g density_f + tol - rho_fg
    std::vector<CompositeBoundSample> pointwise;
    [[nodiscard]] bool order_bounds_hold() const { return lower_margin >= 0.0 && upper_margin >= 0.0; }
    [[nodiscard]] bool pointwise_bound_holds() const;
};

CompositeGrowthReport composite_growth_bounds(const GrowthCurve& curve_f, const GrowthCurve& curve_g,
                                              const GrowthCurve& curve_fg, double tolerance = 0.1,
                                              double epsilon = 0.05);

}  // namespace escapedim
