#include "escapedim/comb.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <limits>

#include "escapedim/errors.hpp"

namespace escapedim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int default_stored(int truncation_N, int stored) {
    return std::max({stored, 4 * truncation_N, 64});
}

// Teeth from boundary abscissae X_k: log_len(k) = log x_{j(k)}, j(k) = max{n : log x_n <= X_k}.
std::vector<double> teeth_from_abscissae(const std::vector<double>& X, const LogCriticalPoints& log_xk) {
    std::vector<double> out(X.size(), kNegInf);
    int n = 0;
    for (std::size_t k = 0; k < X.size(); ++k) {
        while (log_xk(n + 1) <= X[k]) ++n;
        const double v = log_xk(n);
        out[k] = v <= X[k] ? v : kNegInf;
    }
    return out;
}

}  // namespace

double CombSpec::length(int n) const {
    n = std::abs(n);
    if (uniform_core_N > 0 && n <= uniform_core_N) return 0.0;
    if (n > stored()) throw InvalidArgument(fmt::format("tooth {} beyond the {} stored teeth", n, stored()));
    return log_len[std::size_t(n)];
}

void CombSpec::validate() const {
    if (log_len.empty()) throw InvalidArgument("comb has no teeth");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("comb order must lie in (0,1]");
    if (truncation_N < 3) throw InvalidArgument("truncation_N must be at least 3");
    if (truncation_N > stored()) throw InvalidArgument("truncation_N exceeds the stored teeth");
    if (uniform_core_N < 0) throw InvalidArgument("uniform_core_N must be nonnegative");
    if (std::all_of(log_len.begin(), log_len.end(), [](double v) { return v == kNegInf; }))
        throw InvalidArgument("all teeth absent");
    for (int n = 1; n <= stored(); ++n)
        if (length(n) == kNegInf) throw InvalidArgument("only the central tooth may be absent");
    if (modified_exp && (!(modified_exp->c > 0.0) || modified_exp->q < 0))
        throw InvalidArgument("modified exponential needs c > 0 and q >= 0");
}

std::string CombSpec::to_json() const {
    nlohmann::json j;
    j["alpha"] = alpha;
    auto teeth = nlohmann::json::array();
    for (int n = 0; n <= stored(); ++n) {
        const double v = log_len[std::size_t(n)];
        teeth.push_back({{"n", n}, {"log_len", std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr)}});
    }
    j["teeth"] = teeth;
    j["uniform_core_N"] = uniform_core_N;
    j["modified_exp"] = modified_exp ? nlohmann::json{{"c", modified_exp->c}, {"q", modified_exp->q}} : nlohmann::json(nullptr);
    j["truncation_N"] = truncation_N;
    return j.dump(1);
}

CombSpec CombSpec::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    CombSpec s;
    s.alpha = j.at("alpha").get<double>();
    s.truncation_N = j.at("truncation_N").get<int>();
    s.uniform_core_N = j.value("uniform_core_N", 0);
    for (const auto& t : j.at("teeth")) {
        const int n = t.at("n").get<int>();
        if (n < 0) continue;
        if (std::size_t(n) >= s.log_len.size()) s.log_len.resize(std::size_t(n) + 1, kNegInf);
        s.log_len[std::size_t(n)] = t.at("log_len").is_null() ? kNegInf : t.at("log_len").get<double>();
    }
    if (j.contains("modified_exp") && !j["modified_exp"].is_null())
        s.modified_exp = ModifiedExpParams{j["modified_exp"].at("c").get<double>(), j["modified_exp"].at("q").get<int>()};
    s.validate();
    return s;
}

CombSpec CombSpec::scaled_teeth(double factor) const {
    if (!(factor > 0.0)) throw InvalidArgument("tooth scale factor must be positive");
    CombSpec s = *this;
    for (double& v : s.log_len)
        if (std::isfinite(v)) v *= factor;
    if (alpha < 1.0) s.alpha = 2.0 / pi * std::atan(std::tan(alpha * pi / 2) / factor);
    return s;
}

double log_cosh_half_pi(int n) {
    const double v = std::abs(n) * pi / 2;
    return v + std::log1p(std::exp(-2.0 * v)) - std::log(2.0);
}

CombSpec build_comb_from_sector(double alpha, const LogCriticalPoints& log_xk, int truncation_N, int stored) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("sector comb needs alpha in (0,1)");
    CombSpec s;
    s.alpha = alpha;
    s.truncation_N = truncation_N;
    const int count = default_stored(truncation_N, stored);
    std::vector<double> X(std::size_t(count) + 1);
    const double cot = 1.0 / std::tan(alpha * pi / 2);
    for (int k = 0; k <= count; ++k) X[std::size_t(k)] = pi * k * cot;
    s.log_len = teeth_from_abscissae(X, log_xk);
    s.validate();
    return s;
}

cplx comb_model_exp(const CombSpec& spec, cplx w) {
    const cplx e = std::exp(spec.alpha * w);
    if (!spec.modified_exp || spec.modified_exp->q == 0) return e;
    const cplx D = w * w + spec.modified_exp->c * spec.modified_exp->c;
    cplx Dq = 1.0;
    for (int i = 0; i < spec.modified_exp->q; ++i) Dq *= D;
    return e / Dq;
}

cplx comb_model_exp_prime(const CombSpec& spec, cplx w) {
    if (!spec.modified_exp || spec.modified_exp->q == 0) return spec.alpha * std::exp(spec.alpha * w);
    const double c = spec.modified_exp->c;
    return comb_model_exp(spec, w) * (spec.alpha - 2.0 * spec.modified_exp->q * w / (w * w + c * c));
}

double modified_exp_derivative_angle(double alpha, double c, int q, double X) {
    CombSpec s;
    s.alpha = alpha;
    s.modified_exp = ModifiedExpParams{c, q};
    double worst = 0.0;
    for (double x = -X; x <= X; x += 0.1)
        for (int iy = -20; iy <= 20; ++iy) {
            const cplx w(x, iy * pi / 40);
            worst = std::max(worst, std::abs(std::arg(comb_model_exp_prime(s, w))));
        }
    return worst;
}

std::vector<double> boundary_abscissae(const CombSpec& spec, int count) {
    std::vector<double> X(std::size_t(count) + 1, std::numeric_limits<double>::infinity());
    X[0] = 0.0;
    if (!spec.modified_exp || spec.modified_exp->q == 0) {
        const double cot = 1.0 / std::tan(spec.alpha * pi / 2);
        for (int k = 0; k <= count; ++k) X[std::size_t(k)] = pi * k * cot;
        return X;
    }
    auto gamma = [&](double x) { return comb_model_exp(spec, cplx(x, pi / 2)); };
    const double target = (count + 1.5) * pi;
    const double h = 0.002;
    double x = -40.0;
    cplx ga = gamma(x);
    while (true) {
        const double xb = x + h;
        const cplx gb = gamma(xb);
        const double lo = std::min(ga.imag(), gb.imag()), hi = std::max(ga.imag(), gb.imag());
        for (int k = std::max(1, int(std::ceil(lo / pi))); k <= count && k * pi <= hi; ++k) {
            // bisection for Im gamma = k pi on [x, xb]
            double a = x, b = xb;
            const bool rising = gb.imag() > ga.imag();
            for (int it = 0; it < 60; ++it) {
                const double m = 0.5 * (a + b);
                const bool above = gamma(m).imag() > k * pi;
                if (above == rising) b = m; else a = m;
            }
            X[std::size_t(k)] = std::min(X[std::size_t(k)], gamma(0.5 * (a + b)).real());
        }
        if (gb.imag() > target && xb > 0) break;
        if (xb > 2000.0) throw InvalidArgument("modified boundary does not reach the requested height");
        x = xb;
        ga = gb;
    }
    return X;
}

CombSpec build_comb_modified_exp(double alpha, double c, int q, const LogCriticalPoints& log_xk, int truncation_N,
                                 int stored) {
    if (q == 0) return build_comb_from_sector(alpha, log_xk, truncation_N, stored);
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("modified comb needs alpha in (0,1)");
    const double angle = modified_exp_derivative_angle(alpha, c, q);
    if (!(angle < pi / 2))
        throw InjectivityCheckFailed(fmt::format("arg of the derivative reaches {:.4f} >= pi/2", angle));
    CombSpec s;
    s.alpha = alpha;
    s.truncation_N = truncation_N;
    s.modified_exp = ModifiedExpParams{c, q};
    const int count = default_stored(truncation_N, stored);
    s.log_len = teeth_from_abscissae(boundary_abscissae(s, count), log_xk);
    s.validate();
    return s;
}

CombSpec build_uniform_comb(int truncation_N) {
    CombSpec s;
    s.alpha = 1.0;
    s.truncation_N = truncation_N;
    s.log_len.assign(std::size_t(default_stored(truncation_N, 0)) + 1, 0.0);
    s.validate();
    return s;
}

double psi_arc(const CombSpec& spec, double r) {
    const int top = int(std::floor(r / pi));
    if (top > spec.stored()) throw InvalidArgument(fmt::format("radius {:.6g} needs more than {} stored teeth", r, spec.stored()));
    // right half, going up
    for (int k = 1; k <= top; ++k) {
        const double x = std::sqrt(std::max(0.0, r * r - k * k * pi * pi));
        if (x <= spec.length(k)) return 2.0 * std::asin(k * pi / r);
    }
    // left half, coming down
    for (int k = top; k >= 0; --k) {
        const double x = -std::sqrt(std::max(0.0, r * r - k * k * pi * pi));
        if (x <= spec.length(k)) return 2.0 * (pi - std::asin(k * pi / r));
    }
    return 2.0 * pi;
}

double theta_profile(const CombSpec& spec, double x) {
    if (!spec.modified_exp || spec.modified_exp->q == 0) return psi_arc(spec, std::exp(spec.alpha * x)) / spec.alpha;
    // march up the vertical line Re w = x until the image meets a tooth
    const double h = 1e-3;
    const double ymax = 3.0 * pi / spec.alpha;
    cplx za = comb_model_exp(spec, cplx(x, 0.0));
    for (double y = 0.0; y < ymax; y += h) {
        const cplx zb = comb_model_exp(spec, cplx(x, y + h));
        const double lo = std::min(za.imag(), zb.imag()), hi = std::max(za.imag(), zb.imag());
        const int k0 = int(std::ceil(lo / pi)), k1 = int(std::floor(hi / pi));
        for (int k = k0; k <= k1; ++k) {
            if (k == 0 && y == 0.0) continue;
            double a = y, b = y + h;
            const bool rising = zb.imag() > za.imag();
            for (int it = 0; it < 60; ++it) {
                const double m = 0.5 * (a + b);
                const bool above = comb_model_exp(spec, cplx(x, m)).imag() > k * pi;
                if (above == rising) b = m; else a = m;
            }
            const double ym = 0.5 * (a + b);
            if (std::abs(k) <= spec.stored() && comb_model_exp(spec, cplx(x, ym)).real() <= spec.length(k)) return 2.0 * ym;
        }
        za = zb;
    }
    return 2.0 * ymax;
}

}  // namespace escapedim
