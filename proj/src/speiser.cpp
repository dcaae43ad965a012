#include "escapedim/speiser.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <limits>

#include "escapedim/comb.hpp"
#include "escapedim/errors.hpp"
#include "escapedim/parallel.hpp"

namespace escapedim {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

// arcsin on some branch; H is even and pi-periodic so every branch gives the same value.
cplx arcsin_from_log(cplx log_w) {
    if (log_w.real() > 20.0) return pi / 2 - I * (kLog2 + log_w);
    return std::asin(std::exp(log_w));
}

bool is_real_log(cplx log_w) {
    const double v = std::abs(wrap_angle(log_w.imag()));
    return v < 1e-12 || std::abs(v - pi) < 1e-12;
}

}  // namespace

double critical_points_xk(int k) {
    const double v = std::cosh(std::abs(k) * pi / 2);
    return k < 0 ? -v : v;
}

double critical_points_xk_even(int k) { return k == 0 ? 0.0 : critical_points_xk(k); }

double log_critical_point(int n) { return log_cosh_half_pi(n); }

cplx eval_F_from_log(cplx log_w, const EllipticConfig& cfg) {
    try {
        return eval_H(arcsin_from_log(log_w), cfg);
    } catch (const PoleOfH&) {
        throw PoleOfF(fmt::format("F has a pole at exp({}, {})", log_w.real(), log_w.imag()));
    }
}

cplx eval_F(cplx z, const EllipticConfig& cfg) {
    try {
        return eval_H(std::asin(z), cfg);
    } catch (const PoleOfH&) {
        throw PoleOfF(fmt::format("F has a pole at ({}, {})", z.real(), z.imag()));
    }
}

cplx eval_F_prime(cplx z, const EllipticConfig& cfg) {
    const cplx w = std::asin(z);
    cplx G;
    try {
        G = eval_G(cfg.kappa * w, cfg);
    } catch (const PoleOfG&) {
        throw PoleOfF(fmt::format("F has a pole at ({}, {})", z.real(), z.imag()));
    }
    cplx Gm1 = 1.0;
    for (int m = 1; m < cfg.M; ++m) Gm1 *= G;
    const cplx dH = double(cfg.M) * Gm1 * cfg.kappa * eval_G_prime(cfg.kappa * w, cfg);
    return dH / std::sqrt(1.0 - z * z);
}

HLattice h_lattice(const EllipticConfig& cfg) {
    cfg.validate();
    HLattice L;
    L.period = pi / cfg.kappa;
    for (const GPole& gp : fundamental_poles_of_G(cfg)) {
        L.base.push_back(gp.location / cfg.kappa);
        L.beta.push_back(gp.residue / cfg.kappa);
    }
    return L;
}

std::vector<FPole> poles_of_F_log(double log_radius, const EllipticConfig& cfg) {
    const HLattice L = h_lattice(cfg);
    const double Y = log_radius + kLog2 + 2.0;
    const double P = L.period;
    std::vector<FPole> out;
    for (std::size_t i = 0; i < L.base.size(); ++i) {
        const cplx p = L.base[i];
        const long m0 = long(std::floor((-pi / 2 - 1e-9 - p.real()) / P));
        const long m1 = long(std::ceil((pi / 2 + 1e-9 - p.real()) / P));
        const long n0 = long(std::floor((-Y - p.imag()) / P));
        const long n1 = long(std::ceil((Y - p.imag()) / P));
        for (long m = m0; m <= m1; ++m) {
            for (long n = n0; n <= n1; ++n) {
                const cplx alpha = p + cplx(double(m) * P, double(n) * P);
                if (std::abs(alpha.real()) > pi / 2 + 1e-9) continue;
                const cplx logA = log_sin(alpha);
                if (logA.real() > log_radius) continue;
                const cplx logB = std::log(L.beta[i]) + log_sin(pi / 2 - alpha);
                out.push_back(FPole{alpha, L.beta[i], logA, logB});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const FPole& a, const FPole& b) {
        if (a.logA.real() != b.logA.real()) return a.logA.real() < b.logA.real();
        return wrap_angle(a.logA.imag()) < wrap_angle(b.logA.imag());
    });
    // alpha and pi - alpha give the same A; merge them
    std::vector<FPole> merged;
    for (const FPole& f : out) {
        bool dup = false;
        for (auto it = merged.rbegin(); it != merged.rend(); ++it) {
            const double tol = 1e-10 * std::max(1.0, std::abs(f.logA.real()));
            if (f.logA.real() - it->logA.real() > tol) break;
            if (std::abs(wrap_angle(f.logA.imag() - it->logA.imag())) <= tol) {
                dup = true;
                break;
            }
        }
        if (!dup) merged.push_back(f);
    }
    return merged;
}

PoleAtlas poles_of_F(double radius, const EllipticConfig& cfg) {
    if (!(radius >= 2.0)) throw InvalidArgument("poles_of_F needs radius >= 2");
    PoleAtlas atlas;
    atlas.M = cfg.M;
    atlas.radius = radius;
    atlas.provenance = "F = H o arcsin";
    for (const FPole& f : poles_of_F_log(std::log(radius), cfg))
        atlas.records.push_back(PoleRecord{std::exp(f.logA), cfg.M, std::exp(f.logB)});
    atlas.canonicalize();
    return atlas;
}

double empirical_C(const PoleAtlas& atlas) {
    double c = std::numeric_limits<double>::infinity();
    for (const PoleRecord& r : atlas.records) c = std::min(c, std::abs(r.coefficient) / std::abs(r.location));
    return c;
}

namespace {

struct Candidate {
    cplx u;          // target value of phi
    bool upper;      // pole is the conjugate of the preimage
    std::size_t f;   // index into the F pole list
};

struct Preimage {
    cplx z;
    cplx log_dphi;  // log phi'(z)
};

class ComposeSolver {
public:
    ComposeSolver(const ConformalMap& map) : map_(map), P_(map.product()) {
        sigma_ = P_.log_g(cplx(P_.critical_point(1), 0.0)).imag() >= 0 ? 1.0 : -1.0;
    }

    // Preimage of u in the lower half-plane.
    Preimage solve(cplx u) const {
        const bool flip = sigma_ * u.imag() < 0;
        const cplx v = flip ? std::conj(u) : u;
        const Preimage p = solve_positive(v);
        if (!flip) return p;
        // phi(-conj z) = conj phi(z), so phi'(-conj z) = -conj phi'(z)
        return {-std::conj(p.z), std::conj(p.log_dphi) + cplx(0.0, pi)};
    }

private:
    struct Local {
        double s;
        int mult;
        double spacing;
        cplx base;  // log g(s - i eps) - mult log(-i eps)
    };

    // Im v has the sign of the positive real axis side.
    Preimage solve_positive(cplx v) const {
        const double h = std::abs(v.imag()) / pi;
        const int k = int(std::floor(h));
        const Local loc = local_model(k);
        // log-linear model around the zero closing the channel
        const cplx delta = std::exp((v - loc.base) / double(loc.mult));
        if (std::abs(delta) < 1e-4 * loc.spacing && delta.imag() < 0.0) {
            const cplx z = loc.s + delta;
            if (z.imag() < 0.0) return {z, std::log(double(loc.mult) / delta)};
        }
        const bool channel = v.real() < std::min(tip(k), tip(k + 1)) - 1.0;
        auto try_seed = [&](std::optional<cplx> seed) -> std::optional<Preimage> {
            try {
                const cplx z = map_.phi_inverse(v, seed);
                cplx val, der;
                P_.log_g_with_derivative(z, val, der);
                if (std::abs(val - v) <= 1e-6 * std::max(1.0, std::abs(v))) return Preimage{z, std::log(der)};
            } catch (const RootPolishFailed&) {
            } catch (const EvaluationRangeExceeded&) {
            }
            return std::nullopt;
        };
        cplx cs = loc.s + delta;
        if (!(cs.imag() < 0.0)) cs = cplx(cs.real(), -1e-3 * loc.spacing);
        if (channel) {
            if (auto p = try_seed(cs)) return *p;
            if (auto p = try_seed(std::nullopt)) return *p;
        } else {
            if (auto p = try_seed(std::nullopt)) return *p;
            if (auto p = try_seed(cs)) return *p;
        }
        throw RootPolishFailed(fmt::format("no preimage found for u = ({:.6g}, {:.6g})", v.real(), v.imag()));
    }

    double tip(int k) const {
        if (k == 0 && P_.params().nu == 1) return -std::numeric_limits<double>::infinity();
        return P_.tooth_tip(k);
    }

    // Zero at the far end of the channel k < Im v/pi < k+1.
    Local local_model(int k) const {
        Local L{};
        L.mult = 1;
        std::size_t idx;
        if (P_.params().nu == 1) {
            idx = std::size_t(k);
            if (k == 0) L.mult = 2;
        } else {
            idx = std::size_t(k) + 1;
        }
        L.s = idx == 0 ? 0.0 : P_.zero(idx);
        L.spacing = P_.zero(idx + 1) - L.s;
        // s - i eps is exact in floating point, so log g there keeps full relative accuracy
        const double eps = 1e-12 * L.spacing;
        L.base = P_.log_g(cplx(L.s, -eps)) - double(L.mult) * std::log(cplx(0.0, -eps));
        return L;
    }

    const ConformalMap& map_;
    const CanonicalProduct& P_;
    double sigma_ = 1.0;
};

bool sector_admits(const std::optional<SectorFilter>& s, cplx z) { return !s || s->contains(z); }

}  // namespace

PoleAtlas compose_f_poles(const ConformalMap& map, const EllipticConfig& cfg, double radius,
                          std::optional<SectorFilter> sector, ComposeReport* report) {
    cfg.validate();
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    const CanonicalProduct& P = map.product();
    if (4.0 * radius > map.max_modulus())
        throw EvaluationRangeExceeded(fmt::format("radius {} exceeds the certified range of the map", radius));
    ComposeReport rep;

    // Bounds of phi on the boundary of the lower half-disc.
    const std::size_t nz = P.zeros_below(radius);
    const std::size_t nodes = std::max<std::size_t>(4096, 64 * (nz + 1));
    std::vector<double> re(nodes), im(nodes), dphi(nodes), mod(nodes);
    parallel_for(nodes, [&](std::size_t i) {
        const cplx z = std::polar(radius, -pi + pi * (double(i) + 0.5) / double(nodes));
        cplx v, d;
        P.log_g_with_derivative(z, v, d);
        re[i] = v.real();
        im[i] = std::abs(v.imag());
        dphi[i] = std::abs(d);
        mod[i] = sector && !sector->contains(z) ? 0.0 : std::abs(v);
    });
    const double margin = *std::max_element(dphi.begin(), dphi.end()) * pi * radius / double(nodes);
    // |phi| bound over the sector part of the half-disc from its boundary (rays and arc);
    // phi is bounded near 0 only when g(0) != 0
    double abs_max = std::numeric_limits<double>::infinity();
    if (sector && P.params().nu == 0 && sector->lo >= -pi && sector->hi <= 0.0) {
        abs_max = *std::max_element(mod.begin(), mod.end()) + margin;
        const std::size_t ray_nodes = nodes;
        for (double th : {sector->lo, sector->hi}) {
            if (!(th > -pi && th < 0.0)) continue;
            std::vector<double> m(ray_nodes), dm(ray_nodes);
            parallel_for(ray_nodes, [&](std::size_t i) {
                cplx v, d;
                P.log_g_with_derivative(std::polar(radius * (double(i) + 0.5) / double(ray_nodes), th), v, d);
                m[i] = std::abs(v);
                dm[i] = std::abs(d);
            });
            const double h = radius / double(ray_nodes);
            abs_max = std::max(abs_max, *std::max_element(m.begin(), m.end()) +
                                            *std::max_element(dm.begin(), dm.end()) * h);
        }
    }
    double re_max = *std::max_element(re.begin(), re.end());
    double im_max = *std::max_element(im.begin(), im.end());
    const int nu = P.params().nu;
    std::vector<double> crit;  // critical points in (0, radius]
    for (int k = 1;; ++k) {
        const double c = P.critical_point(k);
        if (c > radius) break;
        crit.push_back(c);
        re_max = std::max(re_max, P.log_abs_real(c));
    }
    re_max = std::max(re_max, P.log_abs_real(radius));
    if (nu == 0) re_max = std::max(re_max, P.params().logC);
    im_max = std::max(im_max, pi * double(nz + std::size_t(nu) + 1));
    re_max += margin;
    im_max += margin;
    rep.re_bound = re_max;
    rep.im_bound = im_max;

    const std::vector<FPole> fp = poles_of_F_log(re_max, cfg);

    const bool want_lower = !sector || sector->lo < 0.0;
    const bool want_upper = !sector || sector->hi > 0.0;
    const double alpha = map.spec().alpha;
    auto u_admissible = [&](cplx u) {
        if (!sector) return true;
        const double au = std::abs(u);
        if (au > abs_max) return false;
        if (au <= 12.0) return true;
        const double slack = 0.2 + 4.0 / au;
        const double lo = alpha * (sector->lo + pi / 2) - slack, hi = alpha * (sector->hi + pi / 2) + slack;
        const double a = std::arg(u);
        return a >= lo && a <= hi;
    };
    auto on_tooth = [&](cplx u) {
        const double h = u.imag() / pi;
        const double j = std::round(h);
        if (std::abs(h - j) > 1e-12 * std::max(1.0, std::abs(h))) return false;
        const int k = int(std::abs(j));
        if (k == 0 && nu == 1) return false;
        return u.real() <= P.tooth_tip(k);
    };

    std::vector<Candidate> cand;
    for (std::size_t i = 0; i < fp.size(); ++i) {
        for (int side = 0; side < 2; ++side) {
            const bool upper = side == 1;
            if ((upper && !want_upper) || (!upper && !want_lower)) continue;
            const cplx l = upper ? std::conj(fp[i].logA) : fp[i].logA;
            const long m0 = long(std::ceil((-im_max - l.imag()) / (2 * pi)));
            const long m1 = long(std::floor((im_max - l.imag()) / (2 * pi)));
            for (long m = m0; m <= m1; ++m) {
                const cplx u = l + cplx(0.0, 2 * pi * double(m));
                if (!upper && !u_admissible(u)) continue;
                if (on_tooth(u)) continue;
                cand.push_back({u, upper, i});
            }
        }
    }
    rep.candidates = cand.size();

    const ComposeSolver solver(map);
    std::vector<std::optional<PoleRecord>> found(cand.size());
    parallel_for(cand.size(), [&](std::size_t i) {
        const Candidate& c = cand[i];
        const Preimage p = solver.solve(c.u);
        const cplx a = c.upper ? std::conj(p.z) : p.z;
        if (std::abs(a) > radius || !sector_admits(sector, a)) return;
        const FPole& f = fp[c.f];
        const cplx gp_log = (c.upper ? std::conj(p.log_dphi) : p.log_dphi) + f.logA;
        found[i] = PoleRecord{a, cfg.M, std::exp(f.logB - gp_log)};
    });

    PoleAtlas atlas;
    atlas.M = cfg.M;
    atlas.radius = radius;
    atlas.sector = sector;
    atlas.provenance = fmt::format("f = F o g, alpha = {}, truncation {}", alpha, map.truncation_used());
    for (auto& r : found)
        if (r) atlas.records.push_back(*r);
    rep.solved = atlas.records.size();

    // Real poles: g(x) = A for real A, on monotone pieces between critical points.
    const bool want_pos = !sector || sector->contains(cplx(1.0, 0.0));
    const bool want_neg = !sector || sector->contains(cplx(-1.0, 0.0));
    if (want_pos || want_neg) {
        std::vector<double> edges{0.0};
        edges.insert(edges.end(), crit.begin(), crit.end());
        edges.push_back(radius);
        auto signed_log = [&](double x, double& lg) {
            lg = P.log_abs_real(x);
            return (P.zeros_below(x) + std::size_t(nu)) % 2 == 0 ? 1.0 : -1.0;
        };
        for (const FPole& f : fp) {
            if (!is_real_log(f.logA)) continue;
            const double sA = std::abs(wrap_angle(f.logA.imag())) < 1.0 ? 1.0 : -1.0;
            const double lA = f.logA.real();
            // compare g(x) with A: returns +1 when g(x) > A
            auto cmp = [&](double x) {
                double lg;
                const double sg = x == 0.0 && nu == 1 ? 0.0 : signed_log(x, lg);
                if (x == 0.0 && nu == 0) lg = P.params().logC;
                if (sg == 0.0) return sA > 0 ? -1.0 : 1.0;
                if (sg != sA) return sg;
                return lg > lA ? sg : -sg;
            };
            for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
                double lo = edges[e], hi = edges[e + 1];
                const double clo = cmp(lo), chi = cmp(hi);
                if (clo == chi) continue;
                for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (cmp(mid) == clo ? lo : hi) = mid;
                }
                const double x = 0.5 * (lo + hi);
                if (x <= 0.0) continue;
                const cplx gp_log = std::log(cplx(P.dlog_real(x), 0.0)) + f.logA;
                const cplx b = std::exp(f.logB - gp_log);
                if (want_pos) atlas.records.push_back(PoleRecord{cplx(x, 0.0), cfg.M, b});
                if (want_neg) atlas.records.push_back(PoleRecord{cplx(-x, 0.0), cfg.M, -b});
                rep.real_axis += std::size_t(want_pos) + std::size_t(want_neg);
            }
        }
    }
    atlas.canonicalize();
    if (report) *report = rep;
    return atlas;
}

double theorem2_delta(const EllipticConfig& cfg) {
    const HLattice L = h_lattice(cfg);
    double best = std::numeric_limits<double>::infinity();
    const long span = long(std::ceil(3.0 / L.period)) + 1;
    for (const cplx& b : L.base)
        for (long m = -span; m <= span; ++m)
            for (long n = -span; n <= span; ++n) {
                const cplx p = b + cplx(double(m) * L.period, double(n) * L.period);
                best = std::min(best, std::abs(std::log(std::abs(p))));
            }
    if (best < 1e-3) throw ModulusOnePole(fmt::format("H has a pole within {:.2e} of the unit circle", best));
    return best;
}

void visit_theorem2(double radius, const EllipticConfig& cfg,
                    const std::function<void(cplx a, cplx b, cplx p)>& visit) {
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    theorem2_delta(cfg);
    const HLattice L = h_lattice(cfg);
    const double pmax = std::exp(radius), pmin = std::exp(-radius);
    const long span = long(std::ceil(pmax / L.period)) + 1;
    for (std::size_t i = 0; i < L.base.size(); ++i) {
        for (long m = -span; m <= span; ++m) {
            for (long n = -span; n <= span; ++n) {
                const cplx p = L.base[i] + cplx(double(m) * L.period, double(n) * L.period);
                const double ap = std::abs(p);
                if (ap > pmax || ap < pmin) continue;
                const double u = std::log(ap), v = std::arg(p);
                const double rest = radius * radius - u * u;
                if (rest < 0) continue;
                const double w = std::sqrt(rest);
                const long k0 = long(std::ceil((-w - v) / (2 * pi))), k1 = long(std::floor((w - v) / (2 * pi)));
                const cplx b = L.beta[i] / p;
                for (long k = k0; k <= k1; ++k) visit(cplx(u, v + 2 * pi * double(k)), b, p);
            }
        }
    }
}

PoleAtlas theorem2_poles(double radius, const EllipticConfig& cfg, std::size_t cap) {
    const HLattice L = h_lattice(cfg);
    const double estimate = 4.0 * pi * std::exp(2 * radius) / (L.period * L.period) * (radius / pi + 1);
    if (estimate > double(cap))
        throw RegionTooLarge(fmt::format("theorem-2 atlas of radius {} holds about {:.3g} poles", radius, estimate));
    PoleAtlas atlas;
    atlas.M = cfg.M;
    atlas.radius = radius;
    atlas.provenance = "f = H o exp";
    visit_theorem2(radius, cfg, [&](cplx a, cplx b, cplx) {
        if (std::abs(a) <= radius) atlas.records.push_back(PoleRecord{a, cfg.M, b});
    });
    atlas.canonicalize();
    return atlas;
}

PoleAtlas power_trick(const PoleAtlas& atlas0, int N) {
    if (N < 1) throw InvalidArgument("power N must be positive");
    for (const PoleRecord& r : atlas0.records)
        if (std::abs(r.location) == 0.0) throw PoleAtOrigin("power trick needs no pole at the origin");
    if (N == 1) return atlas0;
    PoleAtlas out;
    out.M = atlas0.M;
    out.radius = std::pow(atlas0.radius, 1.0 / N);
    out.provenance = fmt::format("power trick N = {} of [{}]", N, atlas0.provenance);
    if (atlas0.sector) out.provenance += ", base restricted to a sector";
    for (const PoleRecord& r : atlas0.records) {
        const double mod = std::pow(std::abs(r.location), 1.0 / N);
        for (int j = 0; j < N; ++j) {
            const cplx z0 = std::polar(mod, (std::arg(r.location) + 2 * pi * j) / N);
            const cplx b = r.coefficient / (double(N) * std::pow(z0, N - 1));
            out.records.push_back(PoleRecord{z0, r.multiplicity, b});
        }
    }
    out.canonicalize();
    return out;
}

PoleAtlas scaled_family(const PoleAtlas& atlas, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in (0,1]");
    PoleAtlas out = atlas;
    out.radius = atlas.radius / lambda;
    out.provenance = fmt::format("scaled lambda = {} of [{}]", lambda, atlas.provenance);
    for (PoleRecord& r : out.records) {
        r.location /= lambda;
        r.coefficient /= lambda;
    }
    return out;
}

std::string kind_name(FunctionKind kind) {
    switch (kind) {
        case FunctionKind::F_arcsin: return "F_arcsin";
        case FunctionKind::composed_f: return "composed_f";
        case FunctionKind::theorem2_exp: return "theorem2_exp";
        case FunctionKind::power_trick: return "power_trick";
        case FunctionKind::scaled: return "scaled";
        case FunctionKind::affine: return "affine";
    }
    return "unknown";
}

FunctionHandle FunctionHandle::F(const EllipticConfig& cfg) {
    cfg.validate();
    FunctionHandle h;
    h.kind_ = FunctionKind::F_arcsin;
    h.cfg_ = cfg;
    return h;
}

FunctionHandle FunctionHandle::composed(const EllipticConfig& cfg, std::shared_ptr<const ConformalMap> map) {
    cfg.validate();
    if (!map) throw InvalidArgument("composed handle needs a conformal map");
    FunctionHandle h;
    h.kind_ = FunctionKind::composed_f;
    h.cfg_ = cfg;
    h.map_ = std::move(map);
    return h;
}

FunctionHandle FunctionHandle::theorem2(const EllipticConfig& cfg) {
    cfg.validate();
    FunctionHandle h;
    h.kind_ = FunctionKind::theorem2_exp;
    h.cfg_ = cfg;
    return h;
}

FunctionHandle FunctionHandle::power(const FunctionHandle& base, int N) {
    if (N < 1) throw InvalidArgument("power N must be positive");
    FunctionHandle h;
    h.kind_ = FunctionKind::power_trick;
    h.cfg_ = base.cfg_;
    h.base_ = std::make_shared<const FunctionHandle>(base);
    h.N_ = N;
    return h;
}

FunctionHandle FunctionHandle::scaled(const FunctionHandle& base, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in (0,1]");
    FunctionHandle h;
    h.kind_ = FunctionKind::scaled;
    h.cfg_ = base.cfg_;
    h.base_ = std::make_shared<const FunctionHandle>(base);
    h.lambda_ = lambda;
    return h;
}

FunctionHandle FunctionHandle::affine(const FunctionHandle& base, cplx alpha, cplx beta) {
    if (alpha == 0.0) throw InvalidArgument("affine factor must be nonzero");
    FunctionHandle h;
    h.kind_ = FunctionKind::affine;
    h.cfg_ = base.cfg_;
    h.base_ = std::make_shared<const FunctionHandle>(base);
    h.aff_a_ = alpha;
    h.aff_b_ = beta;
    return h;
}

cplx FunctionHandle::eval(cplx z) const {
    switch (kind_) {
        case FunctionKind::F_arcsin: return eval_F(z, cfg_);
        case FunctionKind::composed_f: return eval_F_from_log(map_->log_g(z), cfg_);
        case FunctionKind::theorem2_exp: return eval_H(std::exp(z), cfg_);
        case FunctionKind::power_trick: return base_->eval(std::pow(z, N_));
        case FunctionKind::scaled: return base_->eval(lambda_ * z);
        case FunctionKind::affine: return aff_a_ * base_->eval(z) + aff_b_;
    }
    throw InvalidArgument("unknown function kind");
}

std::string FunctionHandle::descriptor_json() const {
    nlohmann::json j;
    j["kind"] = kind_name(kind_);
    j["M"] = cfg_.M;
    j["a"] = {cfg_.a.real(), cfg_.a.imag()};
    j["kappa"] = cfg_.kappa;
    if (map_) {
        j["comb"] = {{"alpha", map_->spec().alpha},
                     {"truncation_used", map_->truncation_used()},
                     {"accuracy", map_->accuracy()},
                     {"normalization_shift", map_->normalization_shift()},
                     {"nu", map_->product().params().nu},
                     {"logC", map_->product().params().logC},
                     {"tail_phase", map_->product().params().kappa},
                     {"scale", map_->product().params().scale}};
    }
    if (kind_ == FunctionKind::power_trick) j["N"] = N_;
    if (kind_ == FunctionKind::scaled) j["lambda"] = lambda_;
    if (kind_ == FunctionKind::affine) {
        j["affine_alpha"] = {aff_a_.real(), aff_a_.imag()};
        j["affine_beta"] = {aff_b_.real(), aff_b_.imag()};
        if (poles_as_critical_values_) {
            // every critical value is a pole, so there is no Fatou component and J = C
            j["critical_values_are_poles"] = true;
            j["julia_set_is_plane"] = true;
        }
    }
    if (base_) j["base"] = nlohmann::json::parse(base_->descriptor_json());
    return j.dump(1);
}

FunctionHandle affine_rescale(const FunctionHandle& base, const PoleAtlas& atlas) {
    if (atlas.records.size() < 2) throw InvalidArgument("affine rescale needs two poles");
    const cplx a1 = atlas.records[0].location, a2 = atlas.records[1].location;
    FunctionHandle h = FunctionHandle::affine(base, a2 - a1, a1);
    // finite critical values of H are 0, 1 and a^M; only 0 and 1 are sent to poles
    h.poles_as_critical_values_ = std::abs(std::pow(base.config().a, base.config().M) - 1.0) < 1e-12;
    return h;
}

PoleAtlas affine_atlas(const PoleAtlas& atlas, cplx alpha) {
    if (alpha == 0.0) throw InvalidArgument("affine factor must be nonzero");
    PoleAtlas out = atlas;
    out.provenance = fmt::format("affine factor ({}, {}) of [{}]", alpha.real(), alpha.imag(), atlas.provenance);
    const cplx root = std::pow(alpha, 1.0 / atlas.M);
    for (PoleRecord& r : out.records) r.coefficient *= root;
    return out;
}

}  // namespace escapedim
