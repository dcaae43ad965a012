#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "escapedim/canonical_product.hpp"
#include "escapedim/comb.hpp"

namespace escapedim {

struct SolveReport {
    int iterations = 0;
    double residual = 0.0;       // max |log|g(t_k)| - L_k|
    std::size_t unknowns = 0;
};

struct MapOptions {
    double accuracy_target = 1e-6;
    bool certify = true;
    bool normalize = true;
    double probe_lo = 10.0;
    double probe_hi = 20.0;
    int max_doublings = 2;
    double newton_tolerance = 1e-9;
};

TailLaw tail_law_for(const CombSpec& spec);

// Solve for the zeros of g so that its critical values reproduce the teeth |n| <= N.
// Unknowns are the log-zeros s_1..s_K, the tail phase, and log g(0) when the centre
// tooth is absent.
ProductParams solve_comb_product(const CombSpec& spec, int N, SolveReport* report = nullptr,
                                 const ProductParams* warm = nullptr);

// Reference grid for accuracy checks: |z| in {5, 50}, lower half-plane, args at
// least 0.05 away from the real axis.
std::vector<cplx> reference_grid();

struct WarschawskiReport {
    double lambda = 0.0;
    double oscillation = 0.0;
    double theta_first = 0.0;   // integral of theta - pi over the first half of the range
    double theta_second = 0.0;  // and over the second half
    double K_bound = 0.0;       // max (theta - pi) alpha e^{alpha x}
    double probe_lo = 0.0, probe_hi = 0.0;
};

// phi: lower half-plane -> comb, phi = log g with g an even real entire function.
class ConformalMap {
public:
    static ConformalMap build(const CombSpec& spec, const MapOptions& options = {});
    ConformalMap(CombSpec spec, ProductParams params);

    [[nodiscard]] cplx phi(cplx z) const;
    [[nodiscard]] cplx phi_prime(cplx z) const;
    [[nodiscard]] cplx phi_inverse(cplx w, std::optional<cplx> seed = std::nullopt) const;

    // g = exp(phi) extended by reflection; log form never overflows.
    [[nodiscard]] cplx log_g(cplx z) const;
    [[nodiscard]] cplx g(cplx z) const;
    [[nodiscard]] cplx g_prime(cplx z) const;

    [[nodiscard]] const CombSpec& spec() const { return spec_; }
    [[nodiscard]] const CanonicalProduct& product() const { return *product_; }
    [[nodiscard]] double accuracy() const { return accuracy_; }
    [[nodiscard]] double normalization_shift() const { return shift_; }
    [[nodiscard]] int truncation_used() const { return truncation_used_; }
    [[nodiscard]] double max_modulus() const { return product_->max_modulus(); }
    [[nodiscard]] const SolveReport& solve_report() const { return report_; }

    // Rescale z so the Warschawski constant vanishes: phi_new(z) = phi(e^lambda z).
    void apply_shift(double lambda);

private:
    CombSpec spec_;
    std::shared_ptr<const CanonicalProduct> product_;
    double accuracy_ = 0.0;
    double shift_ = 0.0;
    int truncation_used_ = 0;
    SolveReport report_;
};

// h(w) = log(i phi^{-1}(E(w))) on Re w in [x0, x1], |Im w| <= 1/2. The probe range is
// clipped to the evaluation range of the map.
WarschawskiReport warschawski_shift(const ConformalMap& map, double x0, double x1, int samples = 41,
                                    double divergence_threshold = 1e-2);

}  // namespace escapedim
