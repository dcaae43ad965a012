#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "escapedim/numerics.hpp"

namespace escapedim {

// Asymptotic zero law of an even real entire function g with log g(z) ~ Phi(iz)
// in the lower half-plane. Zeros s_j on the positive axis satisfy n(s_j) = j + kappa,
// where n(u) = Im Phi(iu) / pi.
class TailLaw {
public:
    // Phi(zeta) = zeta^alpha. alpha = 1 gives the uniform comb (cosine).
    static TailLaw power(double alpha);
    // Phi(zeta) = zeta^alpha / ((log zeta)^2 + c^2)^q.
    static TailLaw modified_exp(double alpha, double c, int q);

    [[nodiscard]] double count(double u) const;
    [[nodiscard]] double count_prime(double u) const;
    [[nodiscard]] double inverse(double y, double hint = 0.0) const;  // u with n(u) = y
    [[nodiscard]] cplx model(cplx zeta) const;
    [[nodiscard]] cplx model_prime(cplx zeta) const;
    [[nodiscard]] cplx model_inverse(cplx w) const;

    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] double c() const { return c_; }
    [[nodiscard]] int q() const { return q_; }
    [[nodiscard]] bool modified() const { return q_ > 0; }

private:
    double alpha_ = 0.5;
    double c_ = 0.0;
    int q_ = 0;
    double u_floor_ = 0.0;  // below this n(u) is not used
};

struct ProductParams {
    int nu = 0;                  // g ~ (-z^2)^nu at 0
    double logC = 0.0;
    std::vector<double> zeros;   // explicit positive zeros s_1 < ... < s_K
    double kappa = -0.5;         // tail phase: s_j = n^{-1}(j + kappa) for j > K
    double scale = 1.0;          // every zero is multiplied by this factor
};

// g(z) = C (-z^2)^nu prod_j (1 - z^2/s_j^2) with explicit zeros, tail zeros generated from
// the law, and the far tail summed as a power series with Euler-Maclaurin remainders.
class CanonicalProduct {
public:
    static constexpr std::size_t kTopIndex = std::size_t(1) << 20;
    static constexpr int kSeriesTerms = 16;

    CanonicalProduct(TailLaw law, ProductParams params);

    // Branch of log g continuous on the closed lower half-plane; conjugate-reflected above.
    [[nodiscard]] cplx log_g(cplx z) const;
    [[nodiscard]] cplx dlog_g(cplx z) const;
    void log_g_with_derivative(cplx z, cplx& value, cplx& derivative) const;

    // Real-axis quantities for x > 0.
    [[nodiscard]] double log_abs_real(double x) const;
    [[nodiscard]] double dlog_real(double x) const;
    [[nodiscard]] double d2log_real(double x) const;
    [[nodiscard]] std::size_t zeros_below(double x) const;

    [[nodiscard]] double zero(std::size_t j) const;  // 1-based
    [[nodiscard]] std::size_t explicit_count() const { return params_.zeros.size(); }
    [[nodiscard]] double max_modulus() const;        // evaluation range

    // Critical point on the tooth with index k >= 0 (height k pi).
    [[nodiscard]] double critical_point(int k) const;
    [[nodiscard]] double tooth_tip(int k) const;

    // d/dkappa log|g(x)| through the tail zeros.
    [[nodiscard]] double dlog_abs_dkappa(double x) const;
    // d log s_j / d kappa for a tail index j > K (fractional j allowed).
    [[nodiscard]] double dsigma_dkappa(double x) const;

    [[nodiscard]] const ProductParams& params() const { return params_; }
    [[nodiscard]] const TailLaw& law() const { return law_; }

private:
    struct Level {
        std::size_t J;
        double sJ;
        std::array<double, kSeriesTerms + 1> P{};  // sum_{j>J} s_j^{-2p}
        std::array<double, kSeriesTerms + 1> Q{};  // sum_{j>J} s_j^{-2p} dsigma_j/dkappa
    };

    [[nodiscard]] const Level& level_for(double r) const;
    [[nodiscard]] double raw_tail_zero(double x) const;  // unscaled law zero at fractional index
    void build_tail();

    TailLaw law_;
    ProductParams params_;
    std::vector<double> tail_;       // s_j for K < j <= kTopIndex, scaled
    std::vector<double> tail_dsig_;  // d log s_j / d kappa
    std::vector<Level> levels_;
};

}  // namespace escapedim
