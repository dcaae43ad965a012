#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "escapedim/pole_atlas.hpp"

namespace escapedim {

// (|b| / |a|^{1 + 1/M})^t
double series_term(const PoleRecord& record, double t, int M);

struct BlockSum {
    int l = 0;              // poles with 2^l <= |a| < 2^{l+1}
    double S = 0.0;
    std::size_t count = 0;
    bool complete = true;   // the whole block lies inside the atlas radius
};

// One entry per dyadic block meeting [min |a|, radius], ascending in l.
std::vector<BlockSum> dyadic_blocks(const PoleAtlas& atlas, double t);

enum class DimensionMethod { block_decay_fit, partial_sum_bisection };
std::string method_name(DimensionMethod m);

struct DimensionOptions {
    double t_min = 0.0;
    double t_max = 2.0;
    int grid = 41;
    double bracket_width = 0.02;
    double fit_fraction = 0.5;       // upper share of the blocks used in the fit
    double borderline = 0.05;        // |sigma| below this switches to the log-power test
    std::size_t min_blocks = 8;
    double monotone_slack = 1e-9;
    DimensionMethod method = DimensionMethod::block_decay_fit;
    std::optional<double> rho;
};

// S_l ~ l^{-power} 2^{-sigma l} over the fitted blocks.
struct DecayFit {
    double sigma = 0.0;
    double power = 0.0;     // from log S_l against log l
    double r_squared = 0.0;
    std::size_t blocks_used = 0;
    bool finite_tail = false;  // every fitted block is empty
    // sigma > borderline, or borderline with power > 1
    [[nodiscard]] bool summable(double borderline) const;
};

DecayFit fit_block_decay(const std::vector<BlockSum>& blocks, const DimensionOptions& options = {});
DecayFit decay_at(const PoleAtlas& atlas, double t, const DimensionOptions& options = {});

struct DimensionEstimate {
    double t_star = 0.0;
    double t_low = 0.0;
    double t_high = 0.0;
    std::vector<BlockSum> block_sums;  // at t_star
    DimensionMethod method = DimensionMethod::block_decay_fit;
    double theoretical = 0.0;
    int M = 1;
    double rho = 0.0;
    bool has_rho = false;
    std::vector<std::pair<double, double>> scan;  // (t, sigma) on the grid

    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] std::string blocks_csv() const;
};

DimensionEstimate critical_exponent(const PoleAtlas& atlas, const DimensionOptions& options = {});

// 2 M rho / (2 + M rho)
double theoretical_bound(int M, double rho);

struct Lemma2bBlock {
    int l = 0;
    double S = 0.0;
    double first = 0.0;   // (sum |b|^2/|a|^2)^{t/2}
    double second = 0.0;  // (sum |a|^{-rho})^{(2-t)/2}
    bool holder_ok = false;
    bool first_bound_ok = false;
};

struct Lemma2bReport {
    double t = 0.0;
    double p = 0.0;
    double R = 0.0;
    double envelope = 0.0;            // sup_l sqrt(sum |b|^2) / (6 2^{l+1})
    double predicted_decay = 0.0;     // (p-1)(2-t)/2
    bool exponent_ok = false;         // predicted_decay > 1
    double fitted_decay = 0.0;        // from log S_l against log l
    bool tail_summable = false;       // fitted_decay > 1
    std::vector<Lemma2bBlock> blocks;
    [[nodiscard]] bool bounds_hold() const;
};

// R <= 0 takes R = 2 max(2, envelope).
Lemma2bReport lemma2b_diagnostics(const PoleAtlas& atlas, double rho, double p, double R = 0.0);

struct LatticeWindow {
    int N = 0;
    double sum = 0.0;
};

struct KSumSample {
    int m = 0, n = 0;
    double k_sum = 0.0;   // sum over |k| <= K plus an integral tail
    double bound = 0.0;   // B_t / |u|^{(1+1/M)t - 1}
    bool holds = false;
};

struct LatticeSumReport {
    double t = 0.0;
    double epsilon = 0.0;
    double exponent = 0.0;        // t + epsilon
    double delta = 0.0;           // min |log |p||, capped at 1/2
    double A_t = 0.0, B_t = 0.0;  // B_t infinite when the k-sum diverges
    bool k_sum_diverges = false;  // (1+1/M) t <= 1
    double C = 0.0;               // max |u|^{(1+1/M)t-1} / |p|^epsilon over the window
    std::vector<KSumSample> k_samples;
    std::vector<LatticeWindow> windows;
    LinearFit log_fit;            // window sum against log N
    double last_increment = 0.0;  // |S(N) - S(N-1)| at the largest window
    int settled_window = -1;      // first N after which every increment is below 1e-4
    // k-sum bound at every sample and the reduced lattice series diverges
    [[nodiscard]] bool divergence_indicator() const;
};

// Windows |m|, |n| <= N for N = 1..max_window; k-sum samples on a fixed grid of (m, n).
LatticeSumReport theorem2_lattice_sums(const EllipticConfig& cfg, double t, double epsilon, int max_window = 400,
                                       int k_samples = 20);

struct CoveringReport {
    double R = 0.0;
    std::size_t n_R = 0;
    double tail_sum = 0.0;  // sum_{j >= n(R)} term
    double prefactor = 0.0;
    double bracket = 0.0;   // M (2^{1/M} 24)^t tail_sum
    double bound = 0.0;     // prefactor * bracket^l
    double full_bracket = 0.0;  // the same factor over the whole series
    bool contraction = false;   // full_bracket < 1
};

// Requires R >= 32^M and at least one pole beyond the n(R)-th.
CoveringReport covering_sum_bound(const PoleAtlas& atlas, double t, double R, int l);

}  // namespace escapedim
