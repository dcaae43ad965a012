#include <doctest.h>

#include <cmath>

#include "escapedim/canonical_product.hpp"
#include "escapedim/errors.hpp"

using namespace escapedim;

namespace {

// log cos w without overflow.
cplx log_cos(cplx w) {
    if (w.imag() < 0) return I * w - std::log(2.0) + std::log(1.0 + std::exp(-2.0 * I * w));
    return -I * w - std::log(2.0) + std::log(1.0 + std::exp(2.0 * I * w));
}

// Zeros s_j = 2 pi^2 (j - 1/2)^2 give g(z) = cos(pi x) cosh(pi x), x^4 = z^2 / (4 pi^4).
cplx log_cos_cosh_oracle(cplx z) {
    const cplx x = std::sqrt(z) / (std::sqrt(2.0) * pi);
    return log_cos(pi * x) + log_cos(I * pi * x);
}

ProductParams law_zeros(const TailLaw& law, std::size_t K, double kappa) {
    ProductParams p;
    p.kappa = kappa;
    for (std::size_t j = 1; j <= K; ++j) p.zeros.push_back(law.inverse(double(j) + kappa));
    return p;
}

}  // namespace

TEST_CASE("tail law inverse round trip") {
    for (const TailLaw& law : {TailLaw::power(0.5), TailLaw::power(0.75), TailLaw::power(1.0),
                               TailLaw::modified_exp(0.5, 10.0, 2)}) {
        for (double y : {3.0, 10.5, 1000.25, 1e5}) {
            const double u = law.inverse(y);
            CHECK(law.count(u) == doctest::Approx(y).epsilon(1e-12));
        }
        const double u = 1234.5, h = 1e-3;
        CHECK(law.count_prime(u) == doctest::Approx((law.count(u + h) - law.count(u - h)) / (2 * h)).epsilon(1e-7));
        const cplx w(40.0, 7.0);
        CHECK(std::abs(law.model(law.model_inverse(w)) - w) < 1e-10);
    }
}

TEST_CASE("uniform law reproduces the cosine") {
    const auto law = TailLaw::power(1.0);
    for (std::size_t K : {0u, 5u, 40u}) {
        CanonicalProduct g(law, law_zeros(law, K, -0.5));
        for (cplx z : {cplx(0.3, -0.2), cplx(2.0, -3.0), cplx(-7.5, -0.4), cplx(50.0, -10.0), cplx(3.0, 4.0)}) {
            const cplx expect = std::log(std::cos(z));
            const cplx got = g.log_g(z);
            CHECK(std::abs(std::exp(got - expect) - 1.0) < 1e-10);
            CHECK(std::abs(g.dlog_g(z) + std::tan(z)) < 1e-9 * std::max(1.0, std::abs(std::tan(z))));
        }
        for (int k = 1; k <= 6; ++k) {
            CHECK(g.critical_point(k) == doctest::Approx(k * pi).epsilon(1e-13));
            CHECK(std::abs(g.tooth_tip(k)) < 1e-11);
        }
        // Im log g on the axis counts zeros, continuous from below
        const cplx below = g.log_g(cplx(5.0, -1e-9));
        const cplx on = g.log_g(cplx(5.0, 0.0));
        CHECK(std::abs(below - on) < 1e-6);
        CHECK(on.imag() == doctest::Approx(2 * pi));
    }
}

TEST_CASE("order one half law against cos(pi x) cosh(pi x)") {
    const auto law = TailLaw::power(0.5);
    for (std::size_t K : {0u, 3u, 25u}) {
        CanonicalProduct g(law, law_zeros(law, K, -0.5));
        for (cplx z : {cplx(1.0, -1.0), cplx(30.0, -200.0), cplx(-500.0, -2.0), cplx(1e4, -3e4), cplx(2e6, -1e6)}) {
            const cplx oracle = log_cos_cosh_oracle(z);
            const cplx got = g.log_g(z);
            CHECK(std::abs(got.real() - oracle.real()) < 1e-10 * std::max(1.0, std::abs(got)));
            CHECK(std::abs(std::remainder(got.imag() - oracle.imag(), 2 * pi)) < 1e-10 * std::max(1.0, std::abs(got)));
        }
        // derivative against a central difference
        const cplx z(700.0, -300.0);
        const double h = 1e-3;
        const cplx fd = (g.log_g(z + h) - g.log_g(z - h)) / (2 * h);
        CHECK(std::abs(fd - g.dlog_g(z)) < 1e-7 * std::abs(fd));
    }
}

TEST_CASE("kappa derivative of log|g| against finite differences") {
    const auto law = TailLaw::power(0.5);
    const double x = 3000.0, dk = 1e-6;
    auto at = [&](double kappa) {
        auto p = law_zeros(law, 10, -0.5);
        p.kappa = kappa;
        return CanonicalProduct(law, p).log_abs_real(x);
    };
    const CanonicalProduct g(law, law_zeros(law, 10, -0.5));
    const double fd = (at(-0.5 + dk) - at(-0.5 - dk)) / (2 * dk);
    CHECK(g.dlog_abs_dkappa(x) == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("evaluation range is enforced") {
    const auto law = TailLaw::power(1.0);
    CanonicalProduct g(law, law_zeros(law, 4, -0.5));
    CHECK_THROWS_AS((void)g.log_g(cplx(0.0, -1e9)), EvaluationRangeExceeded);
}
