#include <doctest.h>

#include <cmath>
#include <random>

#include "escapedim/comb.hpp"
#include "escapedim/errors.hpp"
#include "escapedim/speiser.hpp"

using namespace escapedim;

namespace {

const ConformalMap& half_map() {
    static const ConformalMap map = ConformalMap::build(build_comb_from_sector(0.5, log_cosh_half_pi, 128, 20000));
    return map;
}

const ConformalMap& three_quarter_map() {
    static const ConformalMap map = ConformalMap::build(build_comb_from_sector(0.75, log_cosh_half_pi, 256, 20000));
    return map;
}

double nearest_other(const PoleAtlas& atlas, std::size_t i) {
    double d = 1.0;
    for (std::size_t j = 0; j < atlas.records.size(); ++j)
        if (j != i) d = std::min(d, std::abs(atlas.records[j].location - atlas.records[i].location));
    return d;
}

// f(z) (z - a)^M / b^M averaged over three points on a small circle; the average removes
// the first two orders of the Laurent remainder.
template <class Fn>
double laurent_defect(Fn&& f, cplx a, cplx b, int M, double eps) {
    cplx avg = 0.0;
    for (int k = 0; k < 3; ++k) {
        const cplx dz = std::polar(eps, 0.3 + 2.0 * pi * k / 3.0);
        avg += f(a + dz) * std::pow(dz / b, M);
    }
    return std::abs(avg / 3.0 - 1.0);
}

// Trapezoid rule for (1/2 pi i) \oint f on the circle |z| = r.
template <class Fn>
cplx circle_integral(Fn&& f, double r, int nodes) {
    cplx s = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const cplx z = std::polar(r, 2.0 * pi * (i + 0.5) / nodes);
        s += f(z) * z;
    }
    return s / double(nodes);
}

// Gauss-Legendre (8 nodes) panels along a polygon for (1/2 pi i) \oint f.
template <class Fn>
cplx polygon_integral(Fn&& f, const std::vector<cplx>& corners, int panels) {
    static const double x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
    static const double w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    cplx s = 0.0;
    for (std::size_t c = 0; c + 1 < corners.size(); ++c) {
        const cplx p0 = corners[c], p1 = corners[c + 1];
        const cplx h = (p1 - p0) / double(panels);
        for (int k = 0; k < panels; ++k) {
            const cplx mid = p0 + h * (k + 0.5);
            for (int q = 0; q < 8; ++q) s += w[q] * 0.5 * h * f(mid + 0.5 * h * x[q]);
        }
    }
    return s / cplx(0.0, 2.0 * pi);
}

// Number of solutions of g(z) = A inside a closed path, summed over the F poles A; g - A
// has no poles, so this is the winding number of g - A. The path is traversed through
// samples of log g.
double winding_pole_count(const CanonicalProduct& P, const std::vector<cplx>& path, const std::vector<FPole>& fp,
                          double* worst_fraction) {
    std::vector<cplx> lg(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) lg[i] = P.log_g(path[i]);
    double total = 0.0, worst = 0.0;
    for (const FPole& f : fp) {
        double w = 0.0;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            const cplx a = 1.0 - std::exp(f.logA - lg[i]), b = 1.0 - std::exp(f.logA - lg[i + 1]);
            w += wrap_angle(lg[i + 1].imag() - lg[i].imag()) + wrap_angle(std::arg(b) - std::arg(a));
        }
        w /= 2.0 * pi;
        worst = std::max(worst, std::abs(w - std::round(w)));
        total += w;
    }
    if (worst_fraction) *worst_fraction = worst;
    return total;
}

}  // namespace

TEST_CASE("arcsin branch independence and the large-argument branch") {
    const EllipticConfig cfg = EllipticConfig::make(2);
    const cplx z(0.3, 0.2);
    const cplx w = std::asin(z);
    CHECK(std::abs(eval_H(w, cfg) - eval_H(pi - w, cfg)) <= 1e-12);
    CHECK(std::abs(eval_F(z, cfg) - eval_H(pi - w + 2.0 * pi, cfg)) <= 1e-12);
    // both sides of the switch to the asymptotic arcsin agree
    const cplx lo(20.0 - 1e-9, 0.7), hi(20.0 + 1e-9, 0.7);
    const cplx Flo = eval_F_from_log(lo, cfg), Fhi = eval_F_from_log(hi, cfg);
    CHECK(std::abs(Flo - Fhi) <= 1e-6 * std::abs(Flo));
    // from_log agrees with the direct evaluation at moderate modulus
    const cplx zz(7.3, -2.1);
    CHECK(std::abs(eval_F_from_log(std::log(zz), cfg) - eval_F(zz, cfg)) <= 1e-10 * std::abs(eval_F(zz, cfg)));
}

TEST_CASE("critical points of F") {
    CHECK(critical_points_xk(0) == doctest::Approx(1.0));
    CHECK(critical_points_xk(-3) == doctest::Approx(-std::cosh(1.5 * pi)));
    CHECK(critical_points_xk_even(0) == 0.0);
    CHECK(log_critical_point(7) == doctest::Approx(std::log(std::cosh(3.5 * pi))));
    for (int M : {1, 2}) {
        const EllipticConfig cfg = EllipticConfig::make(M);
        // F(+-1) is the critical value a^M of H
        const cplx aM = std::pow(cfg.a, M);
        CHECK(std::abs(eval_F(1.0, cfg) - aM) <= 1e-9);
        CHECK(std::abs(eval_F(-1.0, cfg) - aM) <= 1e-9);
        // x_k for k >= 1 lie over the order-4 points of G, where F' vanishes to third order
        for (int k = 1; k <= 4; ++k) {
            const double x = critical_points_xk(k);
            const double h = 1e-3 * x;
            const cplx fd = (eval_F(x + h, cfg) - eval_F(x - h, cfg)) / (2.0 * h);
            const cplx scale = (eval_F(x + 0.3 * x, cfg) - eval_F(x, cfg)) / (0.3 * x);
            CHECK(std::abs(fd) <= 1e-5 * std::max(1.0, std::abs(scale)));
            CHECK(std::abs(eval_F_prime(cplx(x, 1e-9), cfg)) <= 1e-6);
        }
    }
}

TEST_CASE("poles of F: coefficient law, asymptotics and the constant C") {
    for (int M : {1, 2}) {
        const EllipticConfig cfg = EllipticConfig::make(M);
        const std::vector<FPole> fp = poles_of_F_log(std::log(1e6), cfg);
        REQUIRE(!fp.empty());
        for (const FPole& f : fp) {
            CHECK(std::abs(std::exp(f.logA) - std::sin(f.alpha)) <= 1e-10 * std::abs(std::exp(f.logA)));
            CHECK(std::abs(std::exp(f.logB.real()) - std::abs(f.beta) * std::abs(std::cos(f.alpha))) <=
                  1e-8 * std::exp(f.logB.real()));
            if (f.logA.real() > std::log(1e3)) CHECK(std::abs(std::cos(f.alpha)) / std::exp(f.logA.real()) == doctest::Approx(1.0).epsilon(1e-5));
        }
        const PoleAtlas a1 = poles_of_F(1e3, cfg), a2 = poles_of_F(2e3, cfg);
        a1.validate();
        CHECK(a1.M == M);
        CHECK(empirical_C(a1) > 0.0);
        CHECK(empirical_C(a2) == doctest::Approx(empirical_C(a1)).epsilon(1e-12));
        CHECK(a2.count_within(1e3) == a1.records.size());
        // Laurent fit at three poles
        for (std::size_t i : {std::size_t(0), a1.records.size() / 2, a1.records.size() - 1}) {
            const PoleRecord& r = a1.records[i];
            const double eps = 1e-4 * std::min(1.0, nearest_other(a1, i));
            CHECK(laurent_defect([&](cplx z) { return eval_F(z, cfg); }, r.location, r.coefficient, M, eps) <= 1e-6);
        }
    }
    CHECK_THROWS_AS(poles_of_F(1.5, EllipticConfig::make(1)), InvalidArgument);
}

TEST_CASE("poles of F are complete: residue sum against a contour integral") {
    const EllipticConfig cfg = EllipticConfig::make(1);
    const PoleAtlas atlas = poles_of_F(200.0, cfg);
    for (double r : {20.0, 57.0, 150.0}) {
        double gap = 1e9;
        cplx sum = 0.0;
        for (const PoleRecord& p : atlas.records) {
            gap = std::min(gap, std::abs(std::abs(p.location) - r));
            if (std::abs(p.location) < r) sum += p.coefficient;
        }
        REQUIRE(gap > 0.05);
        const cplx integral = circle_integral([&](cplx z) { return eval_F(z, cfg); }, r, 1 << 17);
        CHECK(std::abs(integral - sum) <= 1e-7 * std::max(1.0, std::abs(sum)));
    }
}

TEST_CASE("exp family: coefficient law, lattice bound and principal logarithm") {
    const EllipticConfig cfg = EllipticConfig::make(1);
    const double delta = theorem2_delta(cfg);
    CHECK(delta > 1e-3);
    const HLattice L = h_lattice(cfg);
    const double beta_abs = std::abs(L.beta.front());
    for (const cplx& b : L.beta) CHECK(std::abs(b) == doctest::Approx(beta_abs).epsilon(1e-9));
    std::size_t n = 0, principal = 0;
    bool law = true, bound = true;
    visit_theorem2(4.0, cfg, [&](cplx a, cplx b, cplx p) {
        ++n;
        law = law && std::abs(std::abs(b) * std::abs(p) - beta_abs) <= 1e-9 * beta_abs;
        const double u = std::log(std::abs(p));
        const double k = std::round((a.imag() - std::arg(p)) / (2.0 * pi));
        bound = bound && std::norm(a) <= (1.0 + 2.0 * pi * pi / (delta * delta)) * (u * u + k * k) * (1 + 1e-12);
        // k = 0 is the principal logarithm
        if (k == 0) {
            ++principal;
            CHECK(std::abs(a - std::log(p)) <= 1e-14 * std::abs(a));
        }
    });
    CHECK(n > 100);
    CHECK(law);
    CHECK(bound);
    CHECK(principal > 0);

    const PoleAtlas atlas = theorem2_poles(3.0, cfg);
    atlas.validate();
    const FunctionHandle f = FunctionHandle::theorem2(cfg);
    for (std::size_t i : {std::size_t(0), atlas.records.size() / 3, atlas.records.size() - 1}) {
        const PoleRecord& r = atlas.records[i];
        const double eps = 1e-4 * std::min(1.0, nearest_other(atlas, i));
        CHECK(laurent_defect([&](cplx z) { return f.eval(z); }, r.location, r.coefficient, 1, eps) <= 1e-6);
    }
    CHECK_THROWS_AS(theorem2_poles(8.0, cfg, 1000), RegionTooLarge);
}

TEST_CASE("exp family is complete on a window: residue sum against a contour integral") {
    const EllipticConfig cfg = EllipticConfig::make(1);
    const FunctionHandle f = FunctionHandle::theorem2(cfg);
    const PoleAtlas atlas = theorem2_poles(4.5, cfg);
    // place each side of the window as far from the poles as a small scan allows
    auto side = [&](double start, bool real_part) {
        double best = start, best_gap = -1.0;
        for (int j = 0; j < 200; ++j) {
            const double c = start + 1e-3 * j;
            double g = 1e9;
            for (const PoleRecord& p : atlas.records)
                g = std::min(g, std::abs((real_part ? p.location.real() : p.location.imag()) - c));
            if (g > best_gap) {
                best_gap = g;
                best = c;
            }
        }
        return best;
    };
    const double x0 = side(2.0, true), x1 = side(3.2, true), y0 = side(-0.45, false), y1 = side(0.85, false);
    cplx sum = 0.0;
    std::size_t inside = 0;
    double gap = 1e9;
    for (const PoleRecord& p : atlas.records) {
        const cplx a = p.location;
        gap = std::min({gap, std::abs(a.real() - x0), std::abs(a.real() - x1), std::abs(a.imag() - y0),
                        std::abs(a.imag() - y1)});
        if (a.real() > x0 && a.real() < x1 && a.imag() > y0 && a.imag() < y1) {
            sum += p.coefficient;
            ++inside;
        }
    }
    REQUIRE(gap > 5e-4);
    CHECK(inside > 20);
    const std::vector<cplx> rect{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
    const cplx integral = polygon_integral([&](cplx z) { return f.eval(z); }, rect, 20000);
    CHECK(std::abs(integral - sum) <= 1e-6 * std::max(1.0, std::abs(sum)));
}

TEST_CASE("poles of H stay off the unit circle") {
    // the smallest pole of G has modulus > 1.35 for M <= 4, and kappa <= 1 only enlarges it
    for (int M = 1; M <= 4; ++M)
        for (double kappa : {0.3, 0.7, 1.0}) CHECK(theorem2_delta(EllipticConfig::make(M, kappa)) > std::log(1.35));
}

TEST_CASE("power trick") {
    const EllipticConfig cfg = EllipticConfig::make(2);
    const PoleAtlas base = poles_of_F(400.0, cfg);
    const PoleAtlas same = power_trick(base, 1);
    REQUIRE(same.records.size() == base.records.size());
    for (std::size_t i = 0; i < base.records.size(); ++i) {
        CHECK(same.records[i].location == base.records[i].location);
        CHECK(same.records[i].coefficient == base.records[i].coefficient);
    }
    const PoleAtlas sq = power_trick(base, 2);
    sq.validate();
    CHECK(sq.records.size() == 2 * base.records.size());
    CHECK(sq.radius == doctest::Approx(20.0));
    CHECK(sq.M == 2);

    const FunctionHandle F = FunctionHandle::F(cfg);
    const FunctionHandle f = FunctionHandle::power(F, 2);
    for (std::size_t i : {std::size_t(0), sq.records.size() / 2, sq.records.size() - 1}) {
        const PoleRecord& r = sq.records[i];
        const double eps = 1e-4 * std::min(1.0, nearest_other(sq, i));
        CHECK(laurent_defect([&](cplx z) { return f.eval(z); }, r.location, r.coefficient, 2, eps) <= 1e-6);
    }
    // P o f = f1 o P with P(z) = z^2 and f1 = F^2
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int i = 0; i < 20; ++i) {
        const cplx z(U(rng), U(rng));
        const cplx lhs = std::pow(f.eval(z), 2);
        const cplx rhs = std::pow(F.eval(z * z), 2);
        CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(rhs)));
    }
    PoleAtlas bad = base;
    bad.records.insert(bad.records.begin(), PoleRecord{0.0, 2, 1.0});
    CHECK_THROWS_AS(power_trick(bad, 2), PoleAtOrigin);
    CHECK_THROWS_AS(power_trick(base, 0), InvalidArgument);
}

TEST_CASE("scaled family") {
    const EllipticConfig cfg = EllipticConfig::make(2);
    const PoleAtlas base = poles_of_F(300.0, cfg);
    const PoleAtlas one = scaled_family(base, 1.0);
    for (std::size_t i = 0; i < base.records.size(); ++i) {
        CHECK(one.records[i].location == base.records[i].location);
        CHECK(one.records[i].coefficient == base.records[i].coefficient);
    }
    const double lambda = 0.25;
    const PoleAtlas s = scaled_family(base, lambda);
    CHECK(std::abs(s.records[0].location) == doctest::Approx(std::abs(base.records[0].location) / lambda));
    // each term (|b|/|a|^{1+1/M})^t changes by lambda^{t/M}
    const double t = 1.3;
    for (std::size_t i = 0; i < base.records.size(); ++i) {
        auto term = [&](const PoleRecord& r) {
            return std::pow(std::abs(r.coefficient) / std::pow(std::abs(r.location), 1.0 + 1.0 / cfg.M), t);
        };
        CHECK(term(s.records[i]) / term(base.records[i]) == doctest::Approx(std::pow(lambda, t / cfg.M)));
    }
    const FunctionHandle f = FunctionHandle::scaled(FunctionHandle::F(cfg), lambda);
    for (std::size_t i : {std::size_t(0), s.records.size() / 2}) {
        const PoleRecord& r = s.records[i];
        const double eps = 1e-4 * std::min(1.0, nearest_other(s, i));
        CHECK(laurent_defect([&](cplx z) { return f.eval(z); }, r.location, r.coefficient, 2, eps) <= 1e-6);
    }
    CHECK_THROWS_AS(scaled_family(base, 0.0), InvalidArgument);
    CHECK_THROWS_AS(scaled_family(base, 1.5), InvalidArgument);
}

TEST_CASE("affine rescaling") {
    for (int M : {1, 2}) {
        const EllipticConfig cfg = EllipticConfig::make(M);
        const PoleAtlas base = poles_of_F(300.0, cfg);
        const FunctionHandle F = FunctionHandle::F(cfg);
        const FunctionHandle h = affine_rescale(F, base);
        const auto [al, be] = h.affine_pair();
        const cplx a1 = base.records[0].location, a2 = base.records[1].location;
        CHECK(std::abs(al * 0.0 + be - a1) <= 1e-15);
        CHECK(std::abs(al * 1.0 + be - a2) <= 1e-14);
        const cplx z(0.4, -0.7);
        CHECK(std::abs(h.eval(z) - (al * F.eval(z) + be)) <= 1e-12 * std::abs(h.eval(z)));
        const PoleAtlas moved = affine_atlas(base, al);
        REQUIRE(moved.records.size() == base.records.size());
        const double t = 0.8;
        for (std::size_t i = 0; i < base.records.size(); ++i) {
            CHECK(moved.records[i].location == base.records[i].location);
            const double ratio = std::pow(std::abs(moved.records[i].coefficient) / std::abs(base.records[i].coefficient), t);
            CHECK(ratio == doctest::Approx(std::pow(std::abs(al), t / M)));
        }
        for (std::size_t i : {std::size_t(0), moved.records.size() / 2}) {
            const PoleRecord& r = moved.records[i];
            const double eps = 1e-4 * std::min(1.0, nearest_other(moved, i));
            CHECK(laurent_defect([&](cplx w) { return h.eval(w); }, r.location, r.coefficient, M, eps) <= 1e-6);
        }
        const std::string desc = h.descriptor_json();
        CHECK(desc.find("\"affine\"") != std::string::npos);
        CHECK((desc.find("critical_values_are_poles") != std::string::npos) == (M >= 2));
    }
}

TEST_CASE("composed poles are complete in the disc: winding count") {
    const ConformalMap& map = half_map();
    const EllipticConfig cfg = EllipticConfig::make(1);
    ComposeReport rep;
    const double R = 300.0;
    const PoleAtlas atlas = compose_f_poles(map, cfg, R, std::nullopt, &rep);
    atlas.validate();
    CHECK(rep.real_axis > 0);
    std::vector<cplx> path;
    const int n = 100000;
    for (int i = 0; i <= n; ++i) path.push_back(std::polar(R, -pi + 2.0 * pi * (i + 0.5) / n));
    double worst = 0.0;
    const double count = winding_pole_count(map.product(), path, poles_of_F_log(rep.re_bound + 5.0, cfg), &worst);
    CHECK(worst < 1e-6);
    CHECK(count == doctest::Approx(double(atlas.records.size())));
}

TEST_CASE("composed poles: chain rule at the poles and the seed identity") {
    const ConformalMap& map = half_map();
    for (int M : {1, 2}) {
        const EllipticConfig cfg = EllipticConfig::make(M);
        const PoleAtlas atlas = compose_f_poles(map, cfg, 200.0);
        const auto shared = std::make_shared<const ConformalMap>(map);
        const FunctionHandle f = FunctionHandle::composed(cfg, shared);
        std::size_t checked = 0;
        for (std::size_t i = 0; i < atlas.records.size() && checked < 6; i += atlas.records.size() / 5) {
            const PoleRecord& r = atlas.records[i];
            const double eps = 1e-3 * std::min(1.0, nearest_other(atlas, i));
            CHECK(laurent_defect([&](cplx z) { return f.eval(z); }, r.location, r.coefficient, M, eps) <= 1e-4);
            // g(a) is a pole of F
            CHECK(std::abs(1.0 / eval_F_from_log(map.log_g(r.location + eps * 1e-3), cfg)) <= 1e-2);
            ++checked;
        }
        CHECK(checked >= 5);
    }
}

TEST_CASE("composed poles are complete in the sector: winding count") {
    const ConformalMap& map = three_quarter_map();
    const EllipticConfig cfg = EllipticConfig::make(1);
    ComposeReport rep;
    const double R = 250.0;
    const PoleAtlas atlas = compose_f_poles(map, cfg, R, kDelta, &rep);
    atlas.validate();
    CHECK(rep.real_axis == 0);
    for (const PoleRecord& p : atlas.records) CHECK(kDelta.contains(p.location));
    std::vector<cplx> path;
    const int n = 60000;
    for (int i = 0; i <= n; ++i) path.push_back(std::polar(R * i / n, kDelta.lo));
    for (int i = 1; i <= n; ++i) path.push_back(std::polar(R, kDelta.lo + (kDelta.hi - kDelta.lo) * i / n));
    for (int i = n - 1; i >= 0; --i) path.push_back(std::polar(R * i / n, kDelta.hi));
    path.front() = path.back() = cplx(0.0, -1e-12);
    double worst = 0.0;
    const double count = winding_pole_count(map.product(), path, poles_of_F_log(rep.re_bound + 5.0, cfg), &worst);
    CHECK(worst < 1e-6);
    CHECK(count == doctest::Approx(double(atlas.records.size())));
    CHECK(atlas.records.size() > 100);
}

TEST_CASE("composed handle descriptor and validation") {
    const EllipticConfig cfg = EllipticConfig::make(2);
    CHECK_THROWS_AS(FunctionHandle::composed(cfg, nullptr), InvalidArgument);
    CHECK_THROWS_AS(FunctionHandle::power(FunctionHandle::F(cfg), 0), InvalidArgument);
    CHECK_THROWS_AS(FunctionHandle::scaled(FunctionHandle::F(cfg), 0.0), InvalidArgument);
    const auto shared = std::make_shared<const ConformalMap>(half_map());
    const FunctionHandle f = FunctionHandle::composed(cfg, shared);
    CHECK(kind_name(f.kind()) == "composed_f");
    const std::string desc = f.descriptor_json();
    CHECK(desc.find("truncation_used") != std::string::npos);
    CHECK_THROWS_AS(compose_f_poles(half_map(), cfg, 1e16), EvaluationRangeExceeded);
}
