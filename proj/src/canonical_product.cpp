#include "escapedim/canonical_product.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "escapedim/errors.hpp"

namespace escapedim {

namespace {

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGLx = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                        -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                        0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGLw = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                        0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};

template <class F>
double integrate(F&& f, double a, double b, int panels) {
    const double h = (b - a) / panels;
    CompensatedSum s;
    for (int i = 0; i < panels; ++i) {
        const double mid = a + (i + 0.5) * h;
        for (int k = 0; k < 8; ++k) s += kGLw[k] * f(mid + 0.5 * h * kGLx[k]);
    }
    return s.value() * 0.5 * h;
}

}  // namespace

TailLaw TailLaw::power(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("tail law order must lie in (0,1]");
    TailLaw t;
    t.alpha_ = alpha;
    return t;
}

TailLaw TailLaw::modified_exp(double alpha, double c, int q) {
    if (q <= 0) return power(alpha);
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("modified law order must lie in (0,1)");
    if (!(c > 0.0)) throw InvalidArgument("modified law needs c > 0");
    TailLaw t;
    t.alpha_ = alpha;
    t.c_ = c;
    t.q_ = q;
    // n(u) must be increasing on the range we invert; find where that starts.
    double last_bad = 0.0;
    for (double lu = 0.0; lu <= 700.0; lu += 0.05)
        if (t.count_prime(std::exp(lu)) <= 0.0 || t.count(std::exp(lu)) <= 0.0) last_bad = lu;
    t.u_floor_ = std::exp(last_bad + 0.05);
    return t;
}

cplx TailLaw::model(cplx zeta) const {
    const cplx L = std::log(zeta);
    if (q_ == 0) return std::exp(alpha_ * L);
    return std::exp(alpha_ * L - double(q_) * std::log(L * L + c_ * c_));
}

cplx TailLaw::model_prime(cplx zeta) const {
    const cplx L = std::log(zeta);
    if (q_ == 0) return alpha_ * std::exp((alpha_ - 1.0) * L);
    const cplx D = L * L + c_ * c_;
    return model(zeta) * (alpha_ - 2.0 * double(q_) * L / D) / zeta;
}

double TailLaw::count(double u) const {
    if (q_ == 0) return std::pow(u, alpha_) * std::sin(alpha_ * pi / 2) / pi;
    return model(cplx(0.0, u)).imag() / pi;
}

double TailLaw::count_prime(double u) const {
    if (q_ == 0) return alpha_ * std::pow(u, alpha_ - 1.0) * std::sin(alpha_ * pi / 2) / pi;
    // d/du Phi(iu) = i Phi'(iu)
    return (I * model_prime(cplx(0.0, u))).real() / pi;
}

double TailLaw::inverse(double y, double hint) const {
    if (q_ == 0) {
        if (!(y > 0.0)) throw InvalidArgument(fmt::format("zero-law index {} is not positive", y));
        return std::pow(pi * y / std::sin(alpha_ * pi / 2), 1.0 / alpha_);
    }
    if (!(y > count(u_floor_)))
        throw InvalidArgument(fmt::format("zero-law index {} below the monotone range", y));
    // Newton in t = log u, safeguarded by bisection.
    double lo = std::log(u_floor_), hi = 700.0;
    double t = hint > u_floor_ ? std::log(hint)
                               : std::log(std::max(y, 1e-300)) / alpha_ + 2.0 * q_ * std::log(std::max(1.0, std::log(y + 1.0))) / alpha_;
    t = std::clamp(t, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double u = std::exp(t);
        const double f = count(u) - y;
        if (f > 0) hi = t; else lo = t;
        const double df = count_prime(u) * u;
        double tn = t - f / df;
        if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
        if (std::abs(tn - t) < 1e-15 * std::max(1.0, std::abs(t))) return std::exp(tn);
        t = tn;
    }
    return std::exp(t);
}

cplx TailLaw::model_inverse(cplx w) const {
    const cplx lw = std::log(w);
    if (q_ == 0) return std::exp(lw / alpha_);
    cplx L = lw / alpha_;
    for (int it = 0; it < 100; ++it) {
        const cplx D = L * L + c_ * c_;
        const cplx f = alpha_ * L - double(q_) * std::log(D) - lw;
        const cplx df = alpha_ - 2.0 * double(q_) * L / D;
        const cplx step = f / df;
        L -= step;
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(L))) break;
    }
    return std::exp(L);
}

CanonicalProduct::CanonicalProduct(TailLaw law, ProductParams params) : law_(law), params_(std::move(params)) {
    if (params_.nu != 0 && params_.nu != 1) throw InvalidArgument("nu must be 0 or 1");
    if (!(params_.scale > 0.0)) throw InvalidArgument("scale must be positive");
    for (std::size_t i = 0; i < params_.zeros.size(); ++i) {
        if (!(params_.zeros[i] > 0.0)) throw InvalidArgument("zeros must be positive");
        if (i > 0 && !(params_.zeros[i] > params_.zeros[i - 1])) throw InvalidArgument("zeros must increase");
    }
    build_tail();
}

double CanonicalProduct::raw_tail_zero(double x) const {
    return law_.inverse(x + params_.kappa);
}

double CanonicalProduct::dsigma_dkappa(double x) const {
    const double u = law_.inverse(x + params_.kappa);
    return 1.0 / (u * law_.count_prime(u));
}

void CanonicalProduct::build_tail() {
    const std::size_t K = params_.zeros.size();
    if (K >= kTopIndex) throw InvalidArgument("too many explicit zeros");
    tail_.resize(kTopIndex - K);
    tail_dsig_.resize(kTopIndex - K);
    double prev = 0.0;
    for (std::size_t j = K + 1; j <= kTopIndex; ++j) {
        const double u = law_.inverse(double(j) + params_.kappa, prev);
        prev = u;
        tail_[j - K - 1] = params_.scale * u;
        tail_dsig_[j - K - 1] = 1.0 / (u * law_.count_prime(u));
    }
    const double lastExplicit = K ? params_.zeros.back() * params_.scale : 0.0;
    if (!tail_.empty() && !(tail_.front() > lastExplicit))
        throw InvalidArgument("tail zeros overlap the explicit zeros");

    std::vector<std::size_t> Js;
    for (std::size_t J = std::max<std::size_t>(K, 8); J < kTopIndex; J *= 2) Js.push_back(J);
    Js.push_back(kTopIndex);
    levels_.assign(Js.size(), Level{});

    // Top level: Euler-Maclaurin, sum_{j>J} f(j) = int_J^inf f - f(J)/2 - f'(J)/12.
    {
        Level& top = levels_.back();
        top.J = kTopIndex;
        top.sJ = zero(top.J);
        const double J = double(top.J);
        for (int p = 1; p <= kSeriesTerms; ++p) {
            auto fP = [&](double x) { return std::pow(top.sJ / (params_.scale * raw_tail_zero(x)), 2.0 * p); };
            auto fQ = [&](double x) { return fP(x) * dsigma_dkappa(x); };
            const double rate = 2.0 * p / law_.alpha() - 1.0;
            const double V = 45.0 / rate;
            auto em = [&](auto&& f) {
                const double integral = integrate([&](double v) { return f(J * std::exp(v)) * J * std::exp(v); }, 0.0, V, 32);
                const double h = 0.5;
                const double fprime = (f(J + h) - f(J - h)) / (2 * h);
                return integral - 0.5 * f(J) - fprime / 12.0;
            };
            top.P[p] = em(fP);
            top.Q[p] = em(fQ);
        }
    }
    for (std::size_t li = levels_.size() - 1; li-- > 0;) {
        Level& lv = levels_[li];
        const Level& up = levels_[li + 1];
        lv.J = Js[li];
        lv.sJ = zero(lv.J);
        std::array<CompensatedSum, kSeriesTerms + 1> sp, sq;
        for (std::size_t j = lv.J + 1; j <= up.J; ++j) {
            const double sj = zero(j);
            const double r2 = (lv.sJ / sj) * (lv.sJ / sj);
            const double ds = j > params_.zeros.size() ? tail_dsig_[j - params_.zeros.size() - 1] : 0.0;
            double rp = 1.0;
            for (int p = 1; p <= kSeriesTerms; ++p) {
                rp *= r2;
                sp[p] += rp;
                sq[p] += rp * ds;
            }
        }
        const double ratio2 = (lv.sJ / up.sJ) * (lv.sJ / up.sJ);
        double rp = 1.0;
        for (int p = 1; p <= kSeriesTerms; ++p) {
            rp *= ratio2;
            lv.P[p] = sp[p].value() + up.P[p] * rp;
            lv.Q[p] = sq[p].value() + up.Q[p] * rp;
        }
    }
}

double CanonicalProduct::zero(std::size_t j) const {
    const std::size_t K = params_.zeros.size();
    if (j == 0) return 0.0;
    if (j <= K) return params_.zeros[j - 1] * params_.scale;
    return tail_.at(j - K - 1);
}

double CanonicalProduct::max_modulus() const {
    return levels_.back().sJ / 4.0;
}

const CanonicalProduct::Level& CanonicalProduct::level_for(double r) const {
    for (const Level& lv : levels_)
        if (lv.sJ >= 4.0 * r) return lv;
    throw EvaluationRangeExceeded(
        fmt::format("|z| = {:.6g} exceeds the evaluation range {:.6g}", r, max_modulus()));
}

void CanonicalProduct::log_g_with_derivative(cplx z, cplx& value, cplx& derivative) const {
    if (z.imag() > 0.0) {
        log_g_with_derivative(std::conj(z), value, derivative);
        value = std::conj(value);
        derivative = std::conj(derivative);
        return;
    }
    if (z.imag() == 0.0) {
        const double x = std::abs(z.real());
        const double sgn = z.real() < 0 ? -1.0 : 1.0;
        value = cplx(log_abs_real(x), sgn * pi * double(params_.nu + zeros_below(x)));
        derivative = sgn * dlog_real(x);
        return;
    }
    const Level& lv = level_for(std::abs(z));
    const double r = std::abs(z);
    const cplx z2 = z * z;
    cplx v = params_.logC, d = 0.0;
    if (params_.nu == 1) {
        v += std::log(-z2);
        d += 2.0 / z;
    }
    // Near zeros: (1 - z/s)(1 + z/s) has argument in (-pi, pi) for Im z < 0, so one
    // principal log per zero. Far zeros (s > 2r) have |arg| < 0.26 per factor, so a
    // product of 8 stays on the principal branch.
    constexpr int kChunk = 8;
    cplx chunk = 1.0;
    int in_chunk = 0;
    const std::size_t K = params_.zeros.size();
    for (std::size_t j = 1; j <= lv.J; ++j) {
        const double s = j <= K ? params_.zeros[j - 1] * params_.scale : tail_[j - K - 1];
        const double inv = 1.0 / s;
        if (s > 2.0 * r) {
            chunk *= 1.0 - z2 * (inv * inv);
            if (++in_chunk == kChunk) {
                v += std::log(chunk);
                chunk = 1.0;
                in_chunk = 0;
            }
        } else {
            v += std::log((1.0 - z * inv) * (1.0 + z * inv));
        }
        d += 2.0 * z / (z2 - s * s);
    }
    if (in_chunk) v += std::log(chunk);
    const cplx w = z2 / (lv.sJ * lv.sJ);
    cplx wp = 1.0;
    cplx tv = 0.0, td = 0.0;
    for (int p = 1; p <= kSeriesTerms; ++p) {
        wp *= w;
        tv += wp * lv.P[p] / double(p);
        td += wp * lv.P[p];
    }
    value = v - tv;
    derivative = d - 2.0 * td / z;
}

cplx CanonicalProduct::log_g(cplx z) const {
    cplx v, d;
    log_g_with_derivative(z, v, d);
    return v;
}

cplx CanonicalProduct::dlog_g(cplx z) const {
    cplx v, d;
    log_g_with_derivative(z, v, d);
    return d;
}

std::size_t CanonicalProduct::zeros_below(double x) const {
    const auto& z = params_.zeros;
    const double sc = params_.scale;
    const std::size_t nExp = std::size_t(std::upper_bound(z.begin(), z.end(), x / sc) - z.begin());
    if (nExp < z.size()) return nExp;
    if (x >= tail_.back()) throw EvaluationRangeExceeded("real argument beyond the tabulated zeros");
    return nExp + std::size_t(std::upper_bound(tail_.begin(), tail_.end(), x) - tail_.begin());
}

double CanonicalProduct::log_abs_real(double x) const {
    x = std::abs(x);
    const Level& lv = level_for(x);
    CompensatedSum s;
    s += params_.logC;
    if (params_.nu == 1) s += 2.0 * std::log(x);
    for (std::size_t j = 1; j <= lv.J; ++j) {
        const double sj = zero(j);
        const double u = x / sj;
        if (u < 0.5)
            s += std::log1p(-u * u);
        else
            s += std::log(std::abs(1.0 - u)) + std::log1p(u);
    }
    const double w = (x / lv.sJ) * (x / lv.sJ);
    double wp = 1.0;
    for (int p = 1; p <= kSeriesTerms; ++p) {
        wp *= w;
        s += -wp * lv.P[p] / double(p);
    }
    return s.value();
}

double CanonicalProduct::dlog_real(double x) const {
    const Level& lv = level_for(x);
    double d = params_.nu == 1 ? 2.0 / x : 0.0;
    for (std::size_t j = 1; j <= lv.J; ++j) {
        const double s = zero(j);
        d += 2.0 * x / ((x - s) * (x + s));
    }
    const double w = (x / lv.sJ) * (x / lv.sJ);
    double wp = 1.0, td = 0.0;
    for (int p = 1; p <= kSeriesTerms; ++p) {
        wp *= w;
        td += wp * lv.P[p];
    }
    return d - 2.0 * td / x;
}

double CanonicalProduct::d2log_real(double x) const {
    const Level& lv = level_for(x);
    double d = params_.nu == 1 ? -2.0 / (x * x) : 0.0;
    for (std::size_t j = 1; j <= lv.J; ++j) {
        const double s = zero(j);
        const double den = (x - s) * (x + s);
        d += -2.0 * (x * x + s * s) / (den * den);
    }
    const double w = (x / lv.sJ) * (x / lv.sJ);
    double wp = 1.0, td = 0.0;
    for (int p = 1; p <= kSeriesTerms; ++p) {
        wp *= w;
        td += double(2 * p - 1) * wp * lv.P[p];
    }
    return d - 2.0 * td / (x * x);
}

double CanonicalProduct::critical_point(int k) const {
    if (k < 0) k = -k;
    double a, b;
    if (params_.nu == 0) {
        if (k == 0) return 0.0;
        a = zero(std::size_t(k));
        b = zero(std::size_t(k) + 1);
    } else {
        if (k == 0) throw InvalidArgument("tooth 0 is absent when g(0) = 0");
        a = zero(std::size_t(k) - 1);
        b = zero(std::size_t(k));
    }
    double lo = a, hi = b;
    double x = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
        const double d1 = dlog_real(x);
        if (d1 > 0) lo = x; else hi = x;
        const double d2 = d2log_real(x);
        double xn = x - d1 / d2;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::abs(xn - x) <= 4e-16 * x || hi - lo <= 4e-16 * x) return xn;
        x = xn;
    }
    return x;
}

double CanonicalProduct::tooth_tip(int k) const {
    if (params_.nu == 0 && k == 0) return params_.logC;
    return log_abs_real(critical_point(k));
}

double CanonicalProduct::dlog_abs_dkappa(double x) const {
    x = std::abs(x);
    const Level& lv = level_for(x);
    const std::size_t K = params_.zeros.size();
    CompensatedSum s;
    for (std::size_t j = K + 1; j <= lv.J; ++j) {
        const double sj = zero(j);
        s += 2.0 * x * x / ((sj - x) * (sj + x)) * tail_dsig_[j - K - 1];
    }
    const double w = (x / lv.sJ) * (x / lv.sJ);
    double wp = 1.0;
    for (int p = 1; p <= kSeriesTerms; ++p) {
        wp *= w;
        s += 2.0 * wp * lv.Q[p];
    }
    return s.value();
}

}  // namespace escapedim
