#include "escapedim/growth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <limits>

#include "escapedim/errors.hpp"
#include "escapedim/parallel.hpp"

namespace escapedim {

namespace {

// Offset keeps every node off the real axis for all node counts.
constexpr double kNodeOffset = 0.38196601125010515;
// Beyond this gap in log modulus, log |g - A| equals the larger of the two logs to double precision.
constexpr double kLogWindow = 40.0;
// log of a value standing in for |f| at a node that lands on a pole
constexpr double kPoleLog = 700.0;

double log_plus_abs(cplx v) {
    const double a = std::abs(v);
    if (!std::isfinite(a)) return kPoleLog;
    return a > 1.0 ? std::log(a) : 0.0;
}

struct NodeValues {
    double m = 0.0;     // log+ |f|
    double jen = 0.0;   // sum_A log |g - A|
    double argp = 0.0;  // Re z g'/g sum_A g/(g - A)
};

// Nested node sets: doubling adds the midpoints, so sums carry over.
template <class Eval>
std::vector<NodeValues> eval_nodes(int n0, int n, bool midpoints, const Eval& eval) {
    const double theta0 = 2.0 * pi * kNodeOffset / n0;
    const int count = midpoints ? n / 2 : n;
    std::vector<NodeValues> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), [&](std::size_t k) {
        const double step = midpoints ? 2.0 * pi * (double(k) + 0.5) / (n / 2) : 2.0 * pi * double(k) / n;
        out[k] = eval(theta0 + step - pi);
    });
    return out;
}

struct CircleMeans {
    double m = 0.0, jen = 0.0, argp = 0.0;
    int nodes = 0;
};

// Doubles the node count until T = m + N (via the Jensen term) and the rounded
// argument-principle count settle.
template <class Eval, class TotalFn>
CircleMeans circle_means(const GrowthOptions& o, const Eval& eval, const TotalFn& total, bool count_needed) {
    CompensatedSum sm, sj, sa;
    auto absorb = [&](const std::vector<NodeValues>& v) {
        for (const NodeValues& x : v) {
            sm.add(x.m);
            sj.add(x.jen);
            sa.add(x.argp);
        }
    };
    int n = o.nodes;
    absorb(eval_nodes(o.nodes, n, false, eval));
    CircleMeans cur{sm.value() / n, sj.value() / n, sa.value() / n, n};
    while (2 * n <= o.max_nodes) {
        absorb(eval_nodes(o.nodes, 2 * n, true, eval));
        n *= 2;
        const CircleMeans next{sm.value() / n, sj.value() / n, sa.value() / n, n};
        const double t0 = total(cur), t1 = total(next);
        const bool t_ok = std::abs(t1 - t0) <= o.tolerance * std::max(1.0, std::abs(t1));
        // a pole close to the circle shows up as a count far from an integer
        const bool n_ok = !count_needed || (std::lround(next.argp) == std::lround(cur.argp) &&
                                            std::abs(next.argp - std::round(next.argp)) < 0.1);
        cur = next;
        if (t_ok && n_ok) break;
    }
    return cur;
}

void check_increasing(const std::vector<double>& v) {
    if (v.empty()) throw InvalidArgument("no radius samples");
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) throw InvalidArgument("radius samples must be strictly increasing");
}

GrowthCurve curve_F(const FunctionHandle& f, const std::vector<double>& log_r, const GrowthOptions& o) {
    const EllipticConfig& cfg = f.config();
    const std::vector<FPole> poles = poles_of_F_log(log_r.back(), cfg);
    std::vector<double> logs;
    for (const FPole& p : poles) logs.push_back(p.logA.real());
    std::sort(logs.begin(), logs.end());

    GrowthCurve curve;
    curve.kind = kind_name(f.kind());
    for (const double lr : log_r) {
        GrowthSample s;
        s.log_r = lr;
        // N(r) = int_0^r n(t)/t dt, exact for the step function n
        CompensatedSum N;
        std::size_t count = 0;
        for (std::size_t i = 0; i < logs.size() && logs[i] <= lr; ++i) {
            ++count;
            const double next = (i + 1 < logs.size() && logs[i + 1] <= lr) ? logs[i + 1] : lr;
            N.add(double(count) * (next - logs[i]));
        }
        s.n_r = double(cfg.M) * double(count);
        s.N_r = double(cfg.M) * N.value();
        const auto eval = [&](double theta) {
            NodeValues v;
            try {
                v.m = log_plus_abs(eval_F_from_log(cplx(lr, theta), cfg));
            } catch (const PoleOfF&) {
                v.m = kPoleLog;
            }
            return v;
        };
        const CircleMeans cm = circle_means(o, eval, [&](const CircleMeans& c) { return c.m + s.N_r; }, false);
        s.m_r = cm.m;
        s.T_r = s.m_r + s.N_r;
        s.nodes = cm.nodes;
        curve.samples.push_back(s);
    }
    return curve;
}

GrowthCurve curve_composed(const FunctionHandle& f, const std::vector<double>& log_r, const GrowthOptions& o) {
    const EllipticConfig& cfg = f.config();
    const ConformalMap& map = *f.map();
    const CanonicalProduct& prod = map.product();
    const double rmax = std::exp(log_r.back());
    if (!(rmax <= map.max_modulus()))
        throw EvaluationRangeExceeded(
            fmt::format("radius {:.6g} exceeds the evaluation range {:.6g}", rmax, map.max_modulus()));

    // max |g| on |z| = r is attained on the imaginary axis
    const double logM = map.log_g(cplx(0.0, -rmax)).real();
    const std::vector<FPole> poles = poles_of_F_log(logM + kLogWindow + 5.0, cfg);
    std::vector<cplx> logA;
    for (const FPole& p : poles) logA.push_back(p.logA);
    std::sort(logA.begin(), logA.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
    std::vector<double> re(logA.size()), suffix(logA.size() + 1, 0.0);
    for (std::size_t i = 0; i < logA.size(); ++i) re[i] = logA[i].real();
    for (std::size_t i = logA.size(); i-- > 0;) suffix[i] = suffix[i + 1] + re[i];

    auto log_abs_diff = [](cplx lg, cplx la) {
        if (la.real() <= lg.real()) return lg.real() + std::log(std::abs(1.0 - std::exp(la - lg)));
        return la.real() + std::log(std::abs(1.0 - std::exp(lg - la)));
    };
    const cplx lg0 = map.log_g(cplx(0.0, 0.0));
    CompensatedSum at_zero;
    for (const cplx& la : logA) at_zero.add(log_abs_diff(lg0, la));

    GrowthCurve curve;
    curve.kind = kind_name(f.kind());
    for (const double lr : log_r) {
        const double r = std::exp(lr);
        const auto eval = [&](double theta) {
            const cplx z = std::polar(r, theta);
            cplx lg, dlg;
            prod.log_g_with_derivative(z, lg, dlg);
            NodeValues v;
            try {
                v.m = log_plus_abs(eval_F_from_log(lg, cfg));
            } catch (const PoleOfF&) {
                v.m = kPoleLog;
            }
            const double L = lg.real();
            const auto lo = std::size_t(std::lower_bound(re.begin(), re.end(), L - kLogWindow) - re.begin());
            const auto hi = std::size_t(std::upper_bound(re.begin(), re.end(), L + kLogWindow) - re.begin());
            double jen = double(lo) * L + suffix[hi];
            cplx frac = double(lo);
            for (std::size_t i = lo; i < hi; ++i) {
                jen += log_abs_diff(lg, logA[i]);
                frac += 1.0 / (1.0 - std::exp(logA[i] - lg));
            }
            v.jen = jen;
            v.argp = (z * dlg * frac).real();
            return v;
        };
        const double M = double(cfg.M);
        const auto total = [&](const CircleMeans& c) { return c.m + M * (c.jen - at_zero.value()); };
        const CircleMeans cm = circle_means(o, eval, total, true);
        GrowthSample s;
        s.log_r = lr;
        s.m_r = cm.m;
        s.N_r = M * (cm.jen - at_zero.value());
        s.n_r = M * double(std::lround(cm.argp));
        s.T_r = s.m_r + s.N_r;
        s.nodes = cm.nodes;
        curve.samples.push_back(s);
    }
    return curve;
}

std::pair<std::vector<double>, std::vector<double>> top_half(const GrowthCurve& c, bool loglog) {
    std::vector<double> x, y;
    const std::size_t start = c.samples.size() / 2;
    for (std::size_t i = start; i < c.samples.size(); ++i) {
        const GrowthSample& s = c.samples[i];
        if (!(s.T_r > 0.0) || (loglog && !(s.log_r > 0.0))) continue;
        x.push_back(loglog ? std::log(s.log_r) : s.log_r);
        y.push_back(std::log(s.T_r));
    }
    return {x, y};
}

double interpolate_log_T(const GrowthCurve& c, double log_R) {
    const auto& s = c.samples;
    if (s.empty() || log_R < s.front().log_r - 1e-12 || log_R > s.back().log_r + 1e-12)
        throw IncompatibleRanges(fmt::format("log R = {} lies outside the sampled range of f", log_R));
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (log_R <= s[i].log_r + 1e-12) {
            const double x0 = std::log(s[i - 1].log_r), x1 = std::log(s[i].log_r);
            const double w = (std::log(log_R) - x0) / (x1 - x0);
            return (1.0 - w) * std::log(s[i - 1].T_r) + w * std::log(s[i].T_r);
        }
    }
    return std::log(s.front().T_r);
}

}  // namespace

void fit_growth(GrowthCurve& curve) {
    {
        const auto [x, y] = top_half(curve, false);
        curve.order_fit = fit_line(x, y).slope;
    }
    {
        const auto [x, y] = top_half(curve, true);
        curve.loglog_density = fit_line(x, y).slope;
        curve.p_fit.reset();
        if (x.size() >= 4) {
            Eigen::MatrixXd A(static_cast<Eigen::Index>(x.size()), 3);
            Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
            for (std::size_t i = 0; i < x.size(); ++i) {
                const auto k = static_cast<Eigen::Index>(i);
                A(k, 0) = 1.0;
                A(k, 1) = std::exp(x[i]);  // log r
                A(k, 2) = -x[i];           // -log log r
                b(k) = y[i];
            }
            const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
            curve.p_fit = sol(2);
        }
    }
    std::vector<double> x, y;
    for (std::size_t i = curve.samples.size() / 2; i < curve.samples.size(); ++i) {
        const GrowthSample& s = curve.samples[i];
        if (s.logM_r && *s.logM_r > 0.0) {
            x.push_back(s.log_r);
            y.push_back(std::log(*s.logM_r));
        }
    }
    if (x.size() >= 2) curve.maxmod_order = fit_line(x, y).slope;
    else curve.maxmod_order.reset();
}

GrowthCurve growth_curve_log(const FunctionHandle& f, const std::vector<double>& log_r, const GrowthOptions& o) {
    check_increasing(log_r);
    GrowthCurve curve;
    switch (f.kind()) {
        case FunctionKind::F_arcsin: curve = curve_F(f, log_r, o); break;
        case FunctionKind::composed_f: curve = curve_composed(f, log_r, o); break;
        case FunctionKind::power_trick: {
            // f(z) = f0(z^N): T(r, f) = T(r^N, f0), each pole of f0 has N preimages
            const int N = f.power_N();
            std::vector<double> lifted;
            for (double x : log_r) lifted.push_back(N * x);
            curve = growth_curve_log(*f.base(), lifted, o);
            curve.kind = kind_name(f.kind());
            for (std::size_t i = 0; i < log_r.size(); ++i) {
                curve.samples[i].log_r = log_r[i];
                curve.samples[i].n_r *= N;
            }
            break;
        }
        case FunctionKind::scaled: {
            // f(z) = f0(lambda z): T(r, f) = T(lambda r, f0)
            const double shift = std::log(f.lambda());
            std::vector<double> moved;
            for (double x : log_r) moved.push_back(x + shift);
            curve = growth_curve_log(*f.base(), moved, o);
            curve.kind = kind_name(f.kind());
            for (std::size_t i = 0; i < log_r.size(); ++i) curve.samples[i].log_r = log_r[i];
            break;
        }
        default: throw InvalidArgument("growth curves support F, F o g and their power and scaled lifts only");
    }
    fit_growth(curve);
    return curve;
}

GrowthCurve growth_curve(const FunctionHandle& f, const std::vector<double>& r, const GrowthOptions& o) {
    std::vector<double> lr;
    for (double x : r) {
        if (!(x > 0.0)) throw InvalidArgument("radii must be positive");
        lr.push_back(std::log(x));
    }
    return growth_curve_log(f, lr, o);
}

GrowthCurve growth_curve(const ConformalMap& g, const std::vector<double>& r, const GrowthOptions& o) {
    check_increasing(r);
    if (!(r.front() > 0.0)) throw InvalidArgument("radii must be positive");
    if (!(r.back() <= g.max_modulus()))
        throw EvaluationRangeExceeded(
            fmt::format("radius {:.6g} exceeds the evaluation range {:.6g}", r.back(), g.max_modulus()));
    GrowthCurve curve;
    curve.kind = "entire_g";
    curve.log_abs_at_zero = g.log_g(cplx(0.0, 0.0)).real();
    for (const double x : r) {
        const auto eval = [&](double theta) {
            NodeValues v;
            v.m = std::max(0.0, g.log_g(std::polar(x, theta)).real());
            return v;
        };
        const CircleMeans cm = circle_means(o, eval, [](const CircleMeans& c) { return c.m; }, false);
        GrowthSample s;
        s.log_r = std::log(x);
        s.m_r = cm.m;
        s.T_r = cm.m;
        s.logM_r = g.log_g(cplx(0.0, -x)).real();
        s.nodes = cm.nodes;
        curve.samples.push_back(s);
    }
    fit_growth(curve);
    return curve;
}

std::string GrowthCurve::to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    auto arr = nlohmann::json::array();
    for (const GrowthSample& s : samples) {
        const double r = std::exp(s.log_r);
        arr.push_back({{"r", std::isfinite(r) ? nlohmann::json(r) : nlohmann::json(nullptr)},
                       {"log_r", s.log_r},
                       {"n_r", s.n_r},
                       {"N_r", s.N_r},
                       {"m_r", s.m_r},
                       {"T_r", s.T_r},
                       {"logM_r", s.logM_r ? nlohmann::json(*s.logM_r) : nlohmann::json(nullptr)},
                       {"nodes", s.nodes}});
    }
    j["samples"] = std::move(arr);
    j["order_fit"] = order_fit;
    j["loglog_density"] = loglog_density;
    j["p_fit"] = p_fit ? nlohmann::json(*p_fit) : nlohmann::json(nullptr);
    j["maxmod_order"] = maxmod_order ? nlohmann::json(*maxmod_order) : nlohmann::json(nullptr);
    return j.dump(1);
}

std::string GrowthCurve::to_csv() const {
    std::string out = "log_r,n_r,N_r,m_r,T_r,logM_r\n";
    for (const GrowthSample& s : samples)
        out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", s.log_r, s.n_r, s.N_r, s.m_r, s.T_r,
                           s.logM_r ? fmt::format("{:.17g}", *s.logM_r) : std::string());
    return out;
}

bool CompositeGrowthReport::pointwise_bound_holds() const {
    return !pointwise.empty() &&
           std::all_of(pointwise.begin(), pointwise.end(), [](const CompositeBoundSample& s) { return s.margin >= 0.0; });
}

CompositeGrowthReport composite_growth_bounds(const GrowthCurve& curve_f, const GrowthCurve& curve_g,
                                              const GrowthCurve& curve_fg, double tolerance, double epsilon) {
    if (!curve_g.log_abs_at_zero) throw IncompatibleRanges("the inner curve must come from an entire function");
    CompositeGrowthReport rep;
    rep.rho_g = curve_g.order_fit;
    rep.density_f = curve_f.loglog_density;
    rep.rho_fg = curve_fg.order_fit;
    rep.lower_margin = rep.rho_fg - (rep.rho_g * rep.density_f - tolerance);
    rep.upper_margin = rep.rho_g * rep.density_f + tolerance - rep.rho_fg;

    const double g0 = std::exp(*curve_g.log_abs_at_zero);
    for (const GrowthSample& s : curve_fg.samples) {
        const auto it = std::find_if(curve_g.samples.begin(), curve_g.samples.end(), [&](const GrowthSample& x) {
            return std::abs(x.log_r - s.log_r) <= 1e-12 * std::max(1.0, std::abs(s.log_r));
        });
        if (it == curve_g.samples.end() || !it->logM_r) continue;
        CompositeBoundSample b;
        b.log_r = s.log_r;
        b.T_fg = s.T_r;
        b.log_R = *it->logM_r + std::log1p(2.0 * g0 * std::exp(-*it->logM_r));
        b.T_f_at_R = std::exp(interpolate_log_T(curve_f, b.log_R));
        b.margin = (1.0 + epsilon) * b.T_f_at_R - b.T_fg;
        rep.pointwise.push_back(b);
    }
    if (rep.pointwise.empty()) throw IncompatibleRanges("no radius is sampled by both g and f o g");
    return rep;
}

}  // namespace escapedim
