#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "escapedim/numerics.hpp"

namespace escapedim {

// Weierstrass p-function on the square lattice with periods pi and i*pi, and the
// elliptic functions G = L(p^2), H = G^M built from it.

struct EllipticConfig {
    cplx a{-1.0, 0.0};
    int M = 1;
    double kappa = 1.0;
    double tolerance = 1e-12;

    // a = exp(2 pi i / M) for M >= 2, a = -1 for M = 1.
    static EllipticConfig make(int M, double kappa = 1.0, double tolerance = 1e-12);
    void validate() const;
};

struct CriticalValueTriple {
    cplx e1, e2, e3;
};

struct PoleRecord {
    cplx location;
    int multiplicity = 1;
    cplx coefficient;
};

struct Rect {
    double x0, x1, y0, y1;  // half-open [x0,x1) x [y0,y1)
    [[nodiscard]] bool contains(cplx z) const {
        return z.real() >= x0 && z.real() < x1 && z.imag() >= y0 && z.imag() < y1;
    }
};

inline constexpr double kLatticeExclusion = 1e-6;

// Invariants of the lattice: g2 = (4/3) E4(i), g3 = 0.
double lattice_g2();

cplx wp(cplx z, const EllipticConfig& cfg);
cplx wp_prime(cplx z, const EllipticConfig& cfg);
CriticalValueTriple critical_values(const EllipticConfig& cfg);

// Coefficient c of the Moebius map L(w) = 1/(1 + c w) with L(inf)=0, L(0)=1, L(e1^2)=a.
cplx moebius_coefficient(const EllipticConfig& cfg);

cplx eval_G(cplx z, const EllipticConfig& cfg);
cplx eval_G_prime(cplx z, const EllipticConfig& cfg);
// G(kappa z)^M
cplx eval_H(cplx z, const EllipticConfig& cfg);

struct GPole {
    cplx location;  // in the fundamental cell [0,pi) x [0,pi)
    cplx residue;   // residue of G, by contour quadrature
};

// The four simple poles of G in the period cell, sorted canonically.
std::vector<GPole> fundamental_poles_of_G(const EllipticConfig& cfg);

// Trapezoid quadrature of (1/2 pi i) \oint G on a circle.
cplx contour_residue_G(cplx center, const EllipticConfig& cfg, int nodes = 64, double radius = 1e-3);

struct HPoleList {
    std::vector<PoleRecord> poles;
    double C0 = 0.0;  // min |beta|
};

HPoleList poles_of_H(const Rect& region, const EllipticConfig& cfg, std::size_t cap = 5'000'000);

// Canonical order: by |z| ascending, ties by argument.
bool canonical_less(cplx a, cplx b);
void sort_canonical(std::vector<PoleRecord>& poles);

}  // namespace escapedim
