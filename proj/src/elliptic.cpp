#include "escapedim/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "escapedim/errors.hpp"

namespace escapedim {

namespace {

constexpr int kMaxTerms = 90;

// c_k for p(z) = z^-2 + sum_{k>=2} c_k z^{2k-2}; index k, entries 0,1 unused.
struct LaurentTable {
    std::array<double, kMaxTerms + 1> c{};
    std::array<double, kMaxTerms + 1> bound{};  // |c_k| R^(2k-2), R = half-diagonal
};

double eisenstein_E4_at_i() {
    const double q = std::exp(-2.0 * pi);
    double s = 0.0, qn = 1.0;
    for (int n = 1; n <= 12; ++n) {
        qn *= q;
        double sigma3 = 0.0;
        for (int d = 1; d <= n; ++d)
            if (n % d == 0) sigma3 += double(d) * d * d;
        s += sigma3 * qn;
    }
    return 1.0 + 240.0 * s;
}

const LaurentTable& laurent() {
    static const LaurentTable table = [] {
        LaurentTable t;
        t.c[2] = lattice_g2() / 20.0;
        t.c[3] = 0.0;  // g3 = 0
        for (int k = 4; k <= kMaxTerms; ++k) {
            double s = 0.0;
            for (int m = 2; m <= k - 2; ++m) s += t.c[m] * t.c[k - m];
            t.c[k] = 3.0 * s / double((2 * k + 1) * (k - 3));
        }
        const double R2 = pi * pi / 2.0;
        for (int k = 2; k <= kMaxTerms; ++k) t.bound[k] = std::abs(t.c[k]) * std::pow(R2, k - 1);
        return t;
    }();
    return table;
}

int terms_for(double tolerance) {
    const auto& t = laurent();
    const double target = std::max(tolerance * 1e-3, 1e-30);
    double tail = 0.0;
    int K = kMaxTerms;
    // smallest K whose discarded tail is below target
    for (int k = kMaxTerms; k >= 2; --k) {
        tail += t.bound[k];
        if (tail > target) {
            K = std::min(kMaxTerms, k + 1);
            break;
        }
    }
    return std::max(K, 8);
}

// Shift z by lattice vectors so |Re|, |Im| <= pi/2.
cplx reduce(cplx z) {
    const double m = std::round(z.real() / pi);
    const double n = std::round(z.imag() / pi);
    return {z.real() - m * pi, z.imag() - n * pi};
}

// P(w) = 1 + sum c_k w^k with w = z^2, so p = P/z^2.
void eval_P(cplx w, int K, cplx& P, cplx& dPdw) {
    const auto& c = laurent().c;
    cplx s = 0.0, ds = 0.0;
    for (int k = K; k >= 2; --k) {
        ds = ds * w + s;
        s = s * w + c[k];
    }
    // s = sum c_k w^(k-2), ds = d/dw of it
    P = 1.0 + s * w * w;
    dPdw = 2.0 * w * s + w * w * ds;
}

void check_lattice(cplx zr) {
    if (std::abs(zr) < kLatticeExclusion)
        throw LatticePointSingularity(fmt::format("z within {} of a lattice point", kLatticeExclusion));
}

cplx g_from_reduced(cplx zr, const EllipticConfig& cfg, cplx coef) {
    const int K = terms_for(cfg.tolerance);
    const cplx w = zr * zr;
    cplx P, dP;
    eval_P(w, K, P, dP);
    cplx den, num;
    if (std::abs(zr) < 0.5) {
        const cplx u = w / P;  // 1/p
        num = u * u;
        den = u * u + coef;
    } else {
        const cplx p = P / w;
        num = 1.0;
        den = 1.0 + coef * p * p;
    }
    if (std::abs(den) < 1e-14 * std::max(1.0, std::abs(num)))
        throw PoleOfG(fmt::format("G has a pole at ({}, {})", zr.real(), zr.imag()));
    return num / den;
}

cplx wrap_cell(cplx z) {
    double x = z.real() - std::floor(z.real() / pi) * pi;
    double y = z.imag() - std::floor(z.imag() / pi) * pi;
    if (x >= pi - 1e-12) x = 0.0;
    if (y >= pi - 1e-12) y = 0.0;
    return {x, y};
}

}  // namespace

EllipticConfig EllipticConfig::make(int M, double kappa, double tolerance) {
    EllipticConfig cfg;
    cfg.M = M;
    cfg.kappa = kappa;
    cfg.tolerance = tolerance;
    cfg.a = M >= 2 ? std::polar(1.0, 2.0 * pi / double(M)) : cplx(-1.0, 0.0);
    cfg.validate();
    return cfg;
}

void EllipticConfig::validate() const {
    if (M < 1) throw InvalidArgument("M must be >= 1");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw InvalidArgument("kappa must lie in (0,1]");
    if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (std::abs(a) < 1e-14 || std::abs(a - 1.0) < 1e-14) throw InvalidArgument("a must avoid 0 and 1");
    if (M >= 2 && std::abs(a - std::polar(1.0, 2.0 * pi / double(M))) > 1e-12)
        throw InvalidArgument("a must equal exp(2 pi i/M) when M >= 2");
}

double lattice_g2() {
    static const double g2 = 4.0 / 3.0 * eisenstein_E4_at_i();
    return g2;
}

cplx wp(cplx z, const EllipticConfig& cfg) {
    const cplx zr = reduce(z);
    check_lattice(zr);
    const cplx w = zr * zr;
    cplx P, dP;
    eval_P(w, terms_for(cfg.tolerance), P, dP);
    return P / w;
}

cplx wp_prime(cplx z, const EllipticConfig& cfg) {
    const cplx zr = reduce(z);
    check_lattice(zr);
    const cplx w = zr * zr;
    cplx P, dP;
    eval_P(w, terms_for(cfg.tolerance), P, dP);
    // d/dz (P(z^2)/z^2) = (2 w P'(w) - 2 P) / z^3
    return (2.0 * w * dP - 2.0 * P) / (w * zr);
}

CriticalValueTriple critical_values(const EllipticConfig& cfg) {
    return {wp(cplx(pi / 2, 0.0), cfg), wp(cplx(pi / 2, pi / 2), cfg), wp(cplx(0.0, pi / 2), cfg)};
}

cplx moebius_coefficient(const EllipticConfig& cfg) {
    const cplx e1 = wp(cplx(pi / 2, 0.0), cfg);
    return (1.0 / cfg.a - 1.0) / (e1 * e1);
}

cplx eval_G(cplx z, const EllipticConfig& cfg) {
    return g_from_reduced(reduce(z), cfg, moebius_coefficient(cfg));
}

cplx eval_G_prime(cplx z, const EllipticConfig& cfg) {
    const cplx zr = reduce(z);
    const cplx coef = moebius_coefficient(cfg);
    const cplx G = g_from_reduced(zr, cfg, coef);
    const cplx w = zr * zr;
    cplx P, dP;
    eval_P(w, terms_for(cfg.tolerance), P, dP);
    // u = 1/p = w/P, du/dz = z (2P - 2 w P') / P^2, G = u^2/(u^2 + coef)
    const cplx u = w / P;
    const cplx du = zr * (2.0 * P - 2.0 * w * dP) / (P * P);
    const cplx den = u * u + coef;
    if (std::abs(den) < 1e-300) return G * 0.0;
    return 2.0 * u * coef / (den * den) * du;
}

cplx eval_H(cplx z, const EllipticConfig& cfg) {
    cplx G;
    try {
        G = eval_G(cfg.kappa * z, cfg);
    } catch (const PoleOfG&) {
        throw PoleOfH(fmt::format("H has a pole at ({}, {})", z.real(), z.imag()));
    }
    cplx h = 1.0;
    for (int m = 0; m < cfg.M; ++m) h *= G;
    return h;
}

cplx contour_residue_G(cplx center, const EllipticConfig& cfg, int nodes, double radius) {
    const cplx coef = moebius_coefficient(cfg);
    cplx s = 0.0;
    for (int j = 0; j < nodes; ++j) {
        const cplx e = std::polar(1.0, 2.0 * pi * j / nodes);
        s += g_from_reduced(reduce(center + radius * e), cfg, coef) * e;
    }
    return s * radius / double(nodes);
}

std::vector<GPole> fundamental_poles_of_G(const EllipticConfig& cfg) {
    const cplx coef = moebius_coefficient(cfg);
    const cplx target = -1.0 / coef;  // p^2 at the poles
    std::vector<cplx> found;
    constexpr int grid = 16;
    for (int ix = 0; ix < grid; ++ix) {
        for (int iy = 0; iy < grid; ++iy) {
            cplx z((ix + 0.5) * pi / grid, (iy + 0.5) * pi / grid);
            bool ok = false;
            for (int it = 0; it < 60; ++it) {
                const cplx p = wp(z, cfg);
                const cplx dp = wp_prime(z, cfg);
                const cplx step = (p * p - target) / (2.0 * p * dp);
                z -= step;
                if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) break;
                if (std::abs(reduce(z)) < 0.05) break;
                if (std::abs(step) < 1e-15) {
                    ok = true;
                    break;
                }
            }
            if (!ok) continue;
            const cplx p = wp(z, cfg);
            if (std::abs(p * p - target) > 1e-10 * std::abs(target)) continue;
            const cplx zc = wrap_cell(z);
            const bool dup = std::any_of(found.begin(), found.end(), [&](cplx q) {
                return std::abs(wrap_cell(q - zc + cplx(pi / 2, pi / 2)) - cplx(pi / 2, pi / 2)) < 1e-9;
            });
            if (!dup) found.push_back(zc);
        }
    }
    if (found.size() != 4)
        throw RootPolishFailed(fmt::format("expected 4 poles of G per cell, found {}", found.size()));
    std::sort(found.begin(), found.end(), canonical_less);
    std::vector<GPole> out;
    for (cplx z : found) out.push_back({z, contour_residue_G(z, cfg)});
    return out;
}

bool canonical_less(cplx a, cplx b) {
    const double ra = std::abs(a), rb = std::abs(b);
    if (ra != rb) return ra < rb;
    return std::arg(a) < std::arg(b);
}

void sort_canonical(std::vector<PoleRecord>& poles) {
    std::sort(poles.begin(), poles.end(),
              [](const PoleRecord& x, const PoleRecord& y) { return canonical_less(x.location, y.location); });
}

HPoleList poles_of_H(const Rect& region, const EllipticConfig& cfg, std::size_t cap) {
    if (!(region.x1 > region.x0 && region.y1 > region.y0)) throw InvalidArgument("empty region");
    const double k = cfg.kappa;
    const double period = pi / k;
    const double estimate = (region.x1 - region.x0 + period) * (region.y1 - region.y0 + period) / (period * period) * 4.0;
    if (estimate > double(cap))
        throw RegionTooLarge(fmt::format("region would hold about {:.0f} poles (cap {})", estimate, cap));
    HPoleList out;
    out.C0 = std::numeric_limits<double>::infinity();
    for (const GPole& gp : fundamental_poles_of_G(cfg)) {
        const cplx base = gp.location / k;
        const cplx beta = gp.residue / k;
        const long m0 = long(std::floor((region.x0 - base.real()) / period));
        const long m1 = long(std::ceil((region.x1 - base.real()) / period));
        const long n0 = long(std::floor((region.y0 - base.imag()) / period));
        const long n1 = long(std::ceil((region.y1 - base.imag()) / period));
        for (long m = m0; m <= m1; ++m) {
            for (long n = n0; n <= n1; ++n) {
                const cplx z = base + cplx(double(m) * period, double(n) * period);
                if (!region.contains(z)) continue;
                out.poles.push_back({z, cfg.M, beta});
                out.C0 = std::min(out.C0, std::abs(beta));
            }
        }
    }
    sort_canonical(out.poles);
    return out;
}

}  // namespace escapedim
