#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "escapedim/numerics.hpp"

namespace escapedim {

struct ModifiedExpParams {
    double c = 10.0;
    int q = 2;
};

// Comb domain: the plane minus horizontal half-lines {x + i k pi : x <= log_len(k)}.
// Teeth are symmetric in k; log_len = -inf means the tooth is absent.
struct CombSpec {
    std::vector<double> log_len;  // index n = 0, 1, ..., stored teeth
    double alpha = 0.5;           // order of the asymptotic zero law
    int truncation_N = 64;
    int uniform_core_N = 0;       // teeth |n| <= this are forced to length 0 (when > 0)
    std::optional<ModifiedExpParams> modified_exp;

    [[nodiscard]] double length(int n) const;
    [[nodiscard]] int stored() const { return int(log_len.size()) - 1; }
    void validate() const;

    [[nodiscard]] std::string to_json() const;
    static CombSpec from_json(const std::string& text);

    // Same comb with every tooth length multiplied by factor, and the asymptotic
    // order adjusted so the tail follows the new tooth slope.
    [[nodiscard]] CombSpec scaled_teeth(double factor) const;
};

// log x_n; must be nondecreasing in n >= 0. May return -inf for n = 0.
using LogCriticalPoints = std::function<double(int)>;

// log cosh(n pi / 2), the critical points of F.
double log_cosh_half_pi(int n);

// j(k) = max{n : log x_n <= pi |k| cot(alpha pi / 2)}, tooth length log x_{j(k)}.
CombSpec build_comb_from_sector(double alpha, const LogCriticalPoints& log_xk, int truncation_N, int stored = 0);

// Teeth stop at the boundary of E*(S), E*(w) = exp(alpha w)/(w^2 + c^2)^q, S = {|Im w| < pi/2}.
CombSpec build_comb_modified_exp(double alpha, double c, int q, const LogCriticalPoints& log_xk, int truncation_N,
                                 int stored = 0);

// All tooth lengths 0 (the cosine comb).
CombSpec build_uniform_comb(int truncation_N);

// E*(w) for the comb (plain exponential when modified_exp is absent).
cplx comb_model_exp(const CombSpec& spec, cplx w);
cplx comb_model_exp_prime(const CombSpec& spec, cplx w);

// Max |arg E*'(w)| over a grid on [-X, X] x [-pi/2, pi/2]; the strip map is injective when < pi/2.
double modified_exp_derivative_angle(double alpha, double c, int q, double X = 60.0);

// Abscissa where the line Im = k pi first meets the boundary of E*(S).
std::vector<double> boundary_abscissae(const CombSpec& spec, int count);

// Angular measure of the arc of |zeta| = r in the comb through r > 0.
double psi_arc(const CombSpec& spec, double r);

// Length of the vertical cross-section of the strip preimage at Re w = x.
double theta_profile(const CombSpec& spec, double x);

}  // namespace escapedim
