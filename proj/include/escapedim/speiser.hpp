#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "escapedim/conformal_map.hpp"
#include "escapedim/elliptic.hpp"
#include "escapedim/pole_atlas.hpp"

namespace escapedim {

// Critical points of F: x_k = cosh(k pi/2) for k >= 0 with x_{-k} = -x_k.
double critical_points_xk(int k);
// Same list with the even-symmetry convention x_0 = 0.
double critical_points_xk_even(int k);
double log_critical_point(int n);  // log x_n for n >= 0

// F = H o arcsin, evaluated from log w so that |w| may exceed the double range.
cplx eval_F(cplx z, const EllipticConfig& cfg);
cplx eval_F_from_log(cplx log_w, const EllipticConfig& cfg);
cplx eval_F_prime(cplx z, const EllipticConfig& cfg);

// Pole of F kept in log form: A = sin(alpha), B = beta cos(alpha).
struct FPole {
    cplx alpha;
    cplx beta;
    cplx logA;
    cplx logB;
};
// Poles of F with log|A| <= log_radius, one per distinct A, sorted by |A|.
std::vector<FPole> poles_of_F_log(double log_radius, const EllipticConfig& cfg);

PoleAtlas poles_of_F(double radius, const EllipticConfig& cfg);
double empirical_C(const PoleAtlas& atlas);  // min |B|/|A|

// Poles of f = F o g with |a| <= radius, optionally only inside a sector.
struct ComposeReport {
    std::size_t candidates = 0;
    std::size_t solved = 0;
    std::size_t real_axis = 0;
    double re_bound = 0.0;  // max Re phi over the disc boundary
    double im_bound = 0.0;  // max |Im phi| over the disc boundary
};
PoleAtlas compose_f_poles(const ConformalMap& map, const EllipticConfig& cfg, double radius,
                          std::optional<SectorFilter> sector = std::nullopt, ComposeReport* report = nullptr);

// Poles of H in the plane: base poles p_i (fundamental cell, scaled by 1/kappa), period pi/kappa.
struct HLattice {
    std::vector<cplx> base;
    std::vector<cplx> beta;
    double period = pi;
};
HLattice h_lattice(const EllipticConfig& cfg);

// Theorem-2 family f = H o exp. visit_theorem2 streams every pole with |a| <= radius;
// theorem2_poles materialises them (capped).
void visit_theorem2(double radius, const EllipticConfig& cfg,
                    const std::function<void(cplx a, cplx b, cplx p)>& visit);
PoleAtlas theorem2_poles(double radius, const EllipticConfig& cfg, std::size_t cap = 20'000'000);
// Smallest | |p| - 1 | over poles of H; ModulusOnePole when below 1e-3.
double theorem2_delta(const EllipticConfig& cfg);

PoleAtlas power_trick(const PoleAtlas& atlas0, int N);
PoleAtlas scaled_family(const PoleAtlas& atlas, double lambda);

enum class FunctionKind { F_arcsin, composed_f, theorem2_exp, power_trick, scaled, affine };
std::string kind_name(FunctionKind kind);

// Evaluatable member of one of the function families.
class FunctionHandle {
public:
    static FunctionHandle F(const EllipticConfig& cfg);
    static FunctionHandle composed(const EllipticConfig& cfg, std::shared_ptr<const ConformalMap> map);
    static FunctionHandle theorem2(const EllipticConfig& cfg);
    static FunctionHandle power(const FunctionHandle& base, int N);
    static FunctionHandle scaled(const FunctionHandle& base, double lambda);
    static FunctionHandle affine(const FunctionHandle& base, cplx alpha, cplx beta);

    [[nodiscard]] cplx eval(cplx z) const;
    [[nodiscard]] FunctionKind kind() const { return kind_; }
    [[nodiscard]] const EllipticConfig& config() const { return cfg_; }
    [[nodiscard]] const ConformalMap* map() const { return map_.get(); }
    [[nodiscard]] int power_N() const { return N_; }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] std::pair<cplx, cplx> affine_pair() const { return {aff_a_, aff_b_}; }
    [[nodiscard]] const FunctionHandle* base() const { return base_.get(); }
    [[nodiscard]] std::string descriptor_json() const;

private:
    FunctionKind kind_ = FunctionKind::F_arcsin;
    EllipticConfig cfg_;
    std::shared_ptr<const ConformalMap> map_;
    std::shared_ptr<const FunctionHandle> base_;
    int N_ = 1;
    double lambda_ = 1.0;
    cplx aff_a_{1.0, 0.0}, aff_b_{0.0, 0.0};
    bool poles_as_critical_values_ = false;

    friend FunctionHandle affine_rescale(const FunctionHandle& base, const PoleAtlas& atlas);
};

// (a2 - a1) f + a1 from the two smallest poles of the atlas; its critical values 0, 1
// go to the poles a1, a2.
FunctionHandle affine_rescale(const FunctionHandle& base, const PoleAtlas& atlas);
// Atlas of alpha f + beta: same poles, coefficients alpha^{1/M} b.
PoleAtlas affine_atlas(const PoleAtlas& atlas, cplx alpha);

}  // namespace escapedim
