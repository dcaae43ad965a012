#include <doctest.h>

#include <cmath>

#include "escapedim/comb.hpp"
#include "escapedim/conformal_map.hpp"
#include "escapedim/dimension.hpp"
#include "escapedim/errors.hpp"
#include "escapedim/speiser.hpp"

using namespace escapedim;

namespace {

constexpr double kGolden = 2.39996322972865332;

// |a_j| = j, |b_j| = j^gamma for j = 1..n, arguments spread by the golden angle.
PoleAtlas power_law_atlas(int M, double gamma, int n) {
    PoleAtlas atlas;
    atlas.M = M;
    atlas.radius = double(n);
    for (int j = 1; j <= n; ++j)
        atlas.records.push_back(
            PoleRecord{std::polar(double(j), wrap_angle(kGolden * j)), M, cplx(std::pow(double(j), gamma), 0.0)});
    atlas.canonicalize();
    return atlas;
}

// Exact critical exponent of sum_j (j^gamma / j^{1+1/M})^t.
double p_series_exponent(int M, double gamma) {
    return 1.0 / (1.0 + 1.0 / M - gamma);
}

const ConformalMap& half_map() {
    static const ConformalMap map = ConformalMap::build(build_comb_from_sector(0.5, log_cosh_half_pi, 128, 20000));
    return map;
}

}  // namespace

TEST_CASE("series term arithmetic") {
    CHECK(series_term(PoleRecord{cplx(2, 0), 1, cplx(1, 0)}, 1.0, 1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(series_term(PoleRecord{cplx(0, 7), 3, cplx(0.3, 2)}, 0.0, 3) == 1.0);
    CHECK(series_term(PoleRecord{cplx(4, 0), 2, cplx(2, 0)}, 2.0, 2) == doctest::Approx(0.0625).epsilon(1e-15));
}

TEST_CASE("dyadic blocks partition the series") {
    SUBCASE("single pole") {
        PoleAtlas atlas;
        atlas.radius = 3.5;
        atlas.records.push_back(PoleRecord{cplx(0, 3), 1, cplx(1, 0)});
        const auto blocks = dyadic_blocks(atlas, 1.0);
        REQUIRE(blocks.size() == 1);
        CHECK(blocks[0].l == 1);
        CHECK(blocks[0].count == 1);
        CHECK(blocks[0].S == doctest::Approx(1.0 / 9.0));
    }
    SUBCASE("powers of two open their block") {
        PoleAtlas atlas;
        atlas.radius = 64.0;
        for (double a : {4.0, 8.0 - 1e-12, 8.0}) atlas.records.push_back(PoleRecord{cplx(a, 0), 1, cplx(1, 0)});
        const auto blocks = dyadic_blocks(atlas, 1.0);
        CHECK(blocks.front().l == 2);
        CHECK(blocks[0].count == 2);
        CHECK(blocks[1].count == 1);
        CHECK(blocks.back().l == 6);
        CHECK_FALSE(blocks.back().complete);
        CHECK(blocks[blocks.size() - 2].complete);
    }
    SUBCASE("sum of blocks equals the partial sum") {
        const PoleAtlas atlas = power_law_atlas(2, 0.3, 5000);
        for (double t : {0.2, 0.9, 1.7}) {
            double direct = 0.0;
            for (const PoleRecord& r : atlas.records) direct += series_term(r, t, 2);
            double blocked = 0.0;
            for (const BlockSum& b : dyadic_blocks(atlas, t)) blocked += b.S;
            CHECK(std::abs(blocked - direct) <= 1e-12 * direct);
        }
    }
    SUBCASE("harmonic blocks are nearly constant") {
        const PoleAtlas atlas = power_law_atlas(1, 0.0, 1 << 14);
        for (const BlockSum& b : dyadic_blocks(atlas, 0.5)) {
            if (!b.complete) continue;
            double oracle = 0.0;
            for (long j = 1L << b.l; j < 2L << b.l; ++j) oracle += 1.0 / double(j);
            CHECK(b.S == doctest::Approx(oracle).epsilon(1e-12));
            if (b.l >= 6) CHECK(b.S == doctest::Approx(std::log(2.0)).epsilon(1e-2));
        }
    }
}

TEST_CASE("critical exponent of power-law atlases") {
    struct Case {
        int M;
        double gamma;
    };
    // term exponents 2t, t and 2t/3
    for (const Case c : {Case{1, 0.0}, Case{2, 0.5}, Case{1, 4.0 / 3.0}}) {
        const double exact = p_series_exponent(c.M, c.gamma);
        const PoleAtlas atlas = power_law_atlas(c.M, c.gamma, 1 << 18);
        DimensionOptions opt;
        opt.rho = 1.0;
        const DimensionEstimate fit = critical_exponent(atlas, opt);
        CAPTURE(exact);
        CHECK(std::abs(fit.t_star - exact) <= 0.05);
        CHECK(fit.t_low <= fit.t_star);
        CHECK(fit.t_star <= fit.t_high);
        CHECK(fit.t_high - fit.t_low <= 0.02 + 1e-12);
        CHECK(fit.theoretical == doctest::Approx(theoretical_bound(c.M, 1.0)));
        CHECK(fit.scan.size() == 41);

        opt.method = DimensionMethod::partial_sum_bisection;
        const DimensionEstimate direct = critical_exponent(atlas, opt);
        CHECK(std::abs(direct.t_star - exact) <= 0.05);
        CHECK(std::abs(direct.t_star - fit.t_star) <= 0.05);
    }
}

TEST_CASE("finite tail gives zero") {
    PoleAtlas atlas = power_law_atlas(1, 0.0, 40);
    atlas.radius = 1 << 20;
    const DimensionEstimate est = critical_exponent(atlas);
    CHECK(est.t_star == 0.0);
    CHECK(est.t_low == 0.0);
    CHECK(est.t_high == 0.0);
}

TEST_CASE("dimension errors") {
    CHECK_THROWS_AS(critical_exponent(power_law_atlas(1, 0.0, 100)), InsufficientBlocks);
    // terms |a|^1 grow, so the decay exponent falls as t rises
    CHECK_THROWS_AS(critical_exponent(power_law_atlas(1, 3.0, 4096)), NonMonotone);
    CHECK_THROWS_AS(dyadic_blocks(PoleAtlas{}, 1.0), InvalidArgument);
}

TEST_CASE("decay exponent is nondecreasing in t") {
    const PoleAtlas atlas = power_law_atlas(2, 0.2, 1 << 15);
    double prev = -1e300;
    for (int i = 0; i <= 20; ++i) {
        const double s = decay_at(atlas, 0.1 * i).sigma;
        CHECK(s >= prev);
        prev = s;
    }
}

TEST_CASE("theoretical bound") {
    CHECK(theoretical_bound(1, 1.0) == doctest::Approx(2.0 / 3.0));
    CHECK(theoretical_bound(2, 2.0) == doctest::Approx(4.0 / 3.0));
    for (int M : {1, 2, 7}) CHECK(theoretical_bound(M, 0.0) == 0.0);
    double prev = -1.0;
    for (double rho = 0.0; rho < 50.0; rho += 0.25) {
        const double v = theoretical_bound(2, rho);
        CHECK(v > prev);
        CHECK(v < 2.0);
        CHECK(theoretical_bound(3, rho) >= v);
        prev = v;
    }
    CHECK(std::abs(theoretical_bound(1, 1e6) - 2.0) <= 1e-5);
    CHECK_THROWS_AS(theoretical_bound(0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(theoretical_bound(1, -0.5), InvalidArgument);
}

TEST_CASE("scale covariance of the estimate") {
    const PoleAtlas synthetic = power_law_atlas(1, 0.0, 1 << 16);
    const PoleAtlas real = compose_f_poles(half_map(), EllipticConfig::make(1), 1e4, kDelta);
    for (const PoleAtlas* atlas : {&synthetic, &real}) {
        const DimensionEstimate base = critical_exponent(*atlas);
        for (double lambda : {0.5, 0.1}) {
            const DimensionEstimate s = critical_exponent(scaled_family(*atlas, lambda));
            const double width = std::max(base.t_high - base.t_low, s.t_high - s.t_low);
            CHECK(std::abs(s.t_star - base.t_star) <= width);
        }
    }
}

TEST_CASE("estimate serialisation") {
    DimensionOptions opt;
    opt.rho = 1.0;
    const DimensionEstimate est = critical_exponent(power_law_atlas(1, 0.0, 1 << 12), opt);
    const std::string json = est.to_json();
    CHECK(json.find("\"t_star\"") != std::string::npos);
    CHECK(json.find("\"block_decay_fit\"") != std::string::npos);
    CHECK(json.find("\"theoretical\"") != std::string::npos);
    CHECK(est.blocks_csv().rfind("l,S_l,count,complete\n", 0) == 0);
}

TEST_CASE("block diagnostics of the growth bound") {
    const PoleAtlas atlas = power_law_atlas(2, 0.5, 1 << 14);
    const Lemma2bReport rep = lemma2b_diagnostics(atlas, 1.0, 4.0);
    CHECK(rep.t == doctest::Approx(1.0));
    CHECK(rep.predicted_decay == doctest::Approx(1.5));
    CHECK(rep.exponent_ok);
    CHECK(rep.bounds_hold());
    CHECK(rep.R >= 4.0);
    CHECK_THROWS_AS(lemma2b_diagnostics(atlas, 1.0, 3.0), HypothesisViolated);

    // one pole per block with term l^{-2} at t = 2/3
    PoleAtlas tail;
    tail.M = 1;
    tail.radius = std::ldexp(1.0, 25);
    for (int l = 1; l < 25; ++l) {
        const double a = 1.5 * std::ldexp(1.0, l);
        tail.records.push_back(PoleRecord{cplx(0, a), 1, cplx(a * a * std::pow(double(l), -3.0), 0)});
    }
    tail.canonicalize();
    const Lemma2bReport r2 = lemma2b_diagnostics(tail, 1.0, 3.0);
    CHECK(r2.fitted_decay == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r2.tail_summable);
    CHECK(r2.bounds_hold());
}

TEST_CASE("lattice sums of the exponential family") {
    const EllipticConfig cfg = EllipticConfig::make(1);
    const LatticeSumReport div = theorem2_lattice_sums(cfg, 1.5, 0.5, 400);
    CHECK(div.exponent == doctest::Approx(2.0));
    CHECK(div.log_fit.r_squared > 0.99);
    // lattice density 1/pi^2 integrated against r^-2 gives slope 2 pi / pi^2
    CHECK(div.log_fit.slope == doctest::Approx(2.0 / pi).epsilon(0.02));
    REQUIRE(div.k_samples.size() == 20);
    for (const KSumSample& s : div.k_samples) CHECK(s.k_sum >= s.bound);
    CHECK(div.divergence_indicator());

    for (double t : {0.5, 1.0, 1.9}) CHECK(theorem2_lattice_sums(cfg, t, 2.0 - t, 200).divergence_indicator());

    // exponent 2.2: ring increments match 8N / (1.15 pi N)^2.2 and settle
    const LatticeSumReport conv = theorem2_lattice_sums(cfg, 2.2, 0.0, 1500);
    CHECK_FALSE(conv.divergence_indicator());
    double oracle_ring = 0.0;
    const HLattice L = h_lattice(cfg);
    cplx p0 = L.base[0];
    for (const cplx& b : L.base)
        if (canonical_less(b, p0)) p0 = b;
    const long N = 1000;
    for (long m = -N; m <= N; ++m)
        for (long n : {-N, N}) {
            oracle_ring += std::pow(std::abs(p0 + cplx(double(m) * pi, double(n) * pi)), -2.2);
            if (std::abs(m) < N) oracle_ring += std::pow(std::abs(p0 + cplx(double(n) * pi, double(m) * pi)), -2.2);
        }
    const double inc = conv.windows[N - 1].sum - conv.windows[N - 2].sum;
    CHECK(inc == doctest::Approx(oracle_ring).epsilon(1e-9));
    CHECK(conv.settled_window > 0);
    CHECK(conv.last_increment < 1e-4);
    for (std::size_t i = 2; i < conv.windows.size(); ++i)
        CHECK(conv.windows[i].sum - conv.windows[i - 1].sum < conv.windows[i - 1].sum - conv.windows[i - 2].sum);
}

TEST_CASE("covering sum bound") {
    const PoleAtlas atlas = power_law_atlas(1, 0.0, 1 << 14);
    const double t = 2.0 / 3.0;
    const CoveringReport one = covering_sum_bound(atlas, t, 64.0, 1);
    CHECK(one.bound == doctest::Approx(one.prefactor * one.bracket).epsilon(1e-14));
    CHECK(one.n_R == 64);
    CHECK_THROWS_AS(covering_sum_bound(atlas, t, 31.0, 1), PreconditionRadius);
    CHECK_THROWS_AS(covering_sum_bound(atlas, t, 1e6, 1), PreconditionRadius);

    // smaller lambda shrinks every term by lambda^{t/M}
    double prev = 1e300;
    for (double lambda : {1.0, 0.5, 0.1, 0.01, 1e-4}) {
        const CoveringReport r = covering_sum_bound(scaled_family(atlas, lambda), t, 64.0, 1);
        CHECK(r.full_bracket < prev);
        CHECK(r.full_bracket == doctest::Approx(covering_sum_bound(atlas, t, 64.0, 1).full_bracket *
                                                std::pow(lambda, t))
                                    .epsilon(1e-9));
        prev = r.full_bracket;
    }
    const PoleAtlas small = scaled_family(atlas, 1e-4);
    const CoveringReport c1 = covering_sum_bound(small, t, 64.0, 1);
    REQUIRE(c1.contraction);
    for (int l = 1; l < 6; ++l) {
        const double a = covering_sum_bound(small, t, 64.0, l).bound;
        const double b = covering_sum_bound(small, t, 64.0, l + 1).bound;
        CHECK(b / a == doctest::Approx(c1.bracket).epsilon(1e-12));
        CHECK(b < a);
    }
}
