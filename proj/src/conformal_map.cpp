#include "escapedim/conformal_map.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "escapedim/errors.hpp"
#include "escapedim/parallel.hpp"

namespace escapedim {

namespace {

struct Layout {
    int nu = 0;
    int K = 0;     // explicit zeros
    int N = 0;     // teeth 1..N
    int size() const { return K + 1 + nu; }
    // explicit zeros fit_first..K enter the tail phase row
    int fit_first() const { return K / 2 + 1; }
};

ProductParams unpack(const Layout& lay, const Eigen::VectorXd& x, double logC0) {
    ProductParams p;
    p.nu = lay.nu;
    p.zeros.resize(std::size_t(lay.K));
    for (int j = 0; j < lay.K; ++j) p.zeros[std::size_t(j)] = std::exp(x[j]);
    p.kappa = x[lay.K];
    p.logC = lay.nu ? x[lay.K + 1] : logC0;
    return p;
}

Eigen::VectorXd pack(const Layout& lay, const ProductParams& p) {
    Eigen::VectorXd x(lay.size());
    for (int j = 0; j < lay.K; ++j) x[j] = std::log(p.zeros[std::size_t(j)]);
    x[lay.K] = p.kappa;
    if (lay.nu) x[lay.K + 1] = p.logC;
    return x;
}

// Law zeros for indices first..last at phase kappa; indices below the monotone range
// are filled by a power-law continuation of the first valid zero.
std::vector<double> law_zeros(const TailLaw& law, int first, int last, double kappa) {
    std::vector<double> out;
    int valid = first;
    double prev = 0.0;
    while (valid <= last) {
        try {
            prev = law.inverse(valid + kappa);
            break;
        } catch (const InvalidArgument&) {
            ++valid;
        }
    }
    if (valid > last) throw InvalidArgument("zero law has no valid index in range");
    for (int j = first; j < valid; ++j)
        out.push_back(prev * std::pow((j + kappa) / (valid + kappa), 1.0 / law.alpha()));
    for (int j = valid; j <= last; ++j) {
        prev = law.inverse(j + kappa, prev);
        out.push_back(prev);
    }
    return out;
}

struct Evaluation {
    std::shared_ptr<const CanonicalProduct> product;
    Eigen::VectorXd F;
    std::vector<double> t;  // critical points of teeth 1..N
};

std::optional<Evaluation> evaluate(const TailLaw& law, const Layout& lay, const Eigen::VectorXd& x, double logC0,
                                   const std::vector<double>& L) {
    Evaluation ev;
    try {
        ev.product = std::make_shared<const CanonicalProduct>(law, unpack(lay, x, logC0));
    } catch (const InvalidArgument&) {
        return std::nullopt;
    }
    const CanonicalProduct& P = *ev.product;
    ev.F.resize(lay.size());
    ev.t.assign(std::size_t(lay.N), 0.0);
    parallel_for(std::size_t(lay.N), [&](std::size_t i) {
        const int k = int(i) + 1;
        const double t = P.critical_point(k);
        ev.t[i] = t;
        ev.F[Eigen::Index(i)] = P.log_abs_real(t) - L[i];
    });
    // tail phase: the upper explicit zeros have zero mean offset from the law
    const int K = lay.K;
    CompensatedSum fit;
    try {
        for (int j = lay.fit_first(); j <= K; ++j) fit += x[j - 1] - std::log(law.inverse(j + x[K]));
    } catch (const InvalidArgument&) {
        return std::nullopt;
    }
    ev.F[lay.N] = fit.value() / double(K - lay.fit_first() + 1);
    if (!ev.F.allFinite()) return std::nullopt;
    return ev;
}

Eigen::MatrixXd jacobian(const Layout& lay, const Evaluation& ev, const Eigen::VectorXd& x) {
    const CanonicalProduct& P = *ev.product;
    Eigen::MatrixXd Jm = Eigen::MatrixXd::Zero(lay.size(), lay.size());
    parallel_for(std::size_t(lay.N), [&](std::size_t i) {
        const double t = ev.t[i];
        for (int j = 0; j < lay.K; ++j) {
            const double s = std::exp(x[j]);
            Jm(Eigen::Index(i), j) = 2.0 * t * t / ((s - t) * (s + t));
        }
        Jm(Eigen::Index(i), lay.K) = P.dlog_abs_dkappa(t);
        if (lay.nu) Jm(Eigen::Index(i), lay.K + 1) = 1.0;
    });
    const int K = lay.K;
    const double n = double(K - lay.fit_first() + 1);
    double dk = 0.0;
    for (int j = lay.fit_first(); j <= K; ++j) {
        Jm(lay.N, j - 1) = 1.0 / n;
        dk += P.dsigma_dkappa(j);
    }
    Jm(lay.N, K) = -dk / n;
    return Jm;
}

// Max change of log g on the reference grid after the best dilation of the first product;
// normalisation removes the dilation freedom anyway.
double dilation_aligned_change(const TailLaw& law, ProductParams first, const ProductParams& second) {
    const CanonicalProduct b(law, second);
    const std::vector<cplx> grid = reference_grid();
    std::vector<cplx> target(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) target[i] = b.log_g(grid[i]);
    double change = 0.0;
    for (int pass = 0; pass < 3; ++pass) {
        const CanonicalProduct a(law, first);
        double num = 0.0, den = 0.0;
        change = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            cplx v, d;
            a.log_g_with_derivative(grid[i], v, d);
            const cplx zd = grid[i] * d;
            num += std::real(std::conj(zd) * (target[i] - v));
            den += std::norm(zd);
            change = std::max(change, std::abs(target[i] - v));
        }
        // a(z e^delta) = a(z) + delta z a'(z) + ...
        first.scale *= std::exp(-num / den);
    }
    return change;
}

}  // namespace

TailLaw tail_law_for(const CombSpec& spec) {
    if (spec.modified_exp && spec.modified_exp->q > 0)
        return TailLaw::modified_exp(spec.alpha, spec.modified_exp->c, spec.modified_exp->q);
    return TailLaw::power(spec.alpha);
}

ProductParams solve_comb_product(const CombSpec& spec, int N, SolveReport* report, const ProductParams* warm) {
    spec.validate();
    if (N < 3) throw InvalidArgument("truncation must be at least 3");
    if (N > spec.stored()) throw InvalidArgument(fmt::format("truncation {} exceeds the {} stored teeth", N, spec.stored()));
    const TailLaw law = tail_law_for(spec);

    Layout lay;
    const double L0 = spec.length(0);
    lay.nu = std::isfinite(L0) ? 0 : 1;
    lay.K = lay.nu ? N - 1 : N;
    lay.N = N;
    std::vector<double> L(static_cast<std::size_t>(N));
    for (int k = 1; k <= N; ++k) L[std::size_t(k - 1)] = spec.length(k);

    ProductParams init;
    init.nu = lay.nu;
    if (warm && warm->nu == lay.nu && !warm->zeros.empty()) {
        init = *warm;
        init.scale = 1.0;
        if (int(init.zeros.size()) > lay.K) init.zeros.resize(std::size_t(lay.K));
        const int have = int(init.zeros.size());
        if (have < lay.K) {
            auto extra = law_zeros(law, have + 1, lay.K, init.kappa);
            init.zeros.insert(init.zeros.end(), extra.begin(), extra.end());
        }
    } else {
        init.kappa = lay.nu - 0.5;
        init.zeros = law_zeros(law, 1, lay.K, init.kappa);
        init.logC = lay.nu ? 0.0 : L0;
    }
    if (lay.nu) {
        init.logC = 0.0;
        const CanonicalProduct probe(law, init);
        init.logC = L[0] - probe.log_abs_real(probe.critical_point(1));
    } else {
        init.logC = L0;
    }

    Eigen::VectorXd x = pack(lay, init);
    auto ev = evaluate(law, lay, x, L0, L);
    if (!ev) throw AccuracyNotMet("initial guess for the comb product is invalid");

    const int max_iter = 60;
    const double tol = std::max(1e-9, 1e-13 * std::abs(L.back()));
    double res = ev->F.cwiseAbs().maxCoeff();
    int it = 0;
    for (; it < max_iter && res > 1e-3 * tol; ++it) {
        const Eigen::MatrixXd Jm = jacobian(lay, *ev, x);
        const Eigen::VectorXd step = Jm.partialPivLu().solve(ev->F);
        if (!step.allFinite()) break;
        double lam = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
            const Eigen::VectorXd xn = x - lam * step;
            auto evn = evaluate(law, lay, xn, L0, L);
            if (!evn) continue;
            const double rn = evn->F.cwiseAbs().maxCoeff();
            if (rn < res || (rn <= res && lam < 1.0)) {
                x = xn;
                ev = std::move(evn);
                res = rn;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        if (lam * step.cwiseAbs().maxCoeff() < 1e-15) break;
    }
    if (report) *report = SolveReport{it, res, std::size_t(lay.size())};
    if (!(res <= tol))
        throw AccuracyNotMet(fmt::format("comb product solve stalled at residual {:.3e} (N = {})", res, N));
    return ev->product->params();
}

std::vector<cplx> reference_grid() {
    std::vector<cplx> out;
    const int per_radius = 100;
    for (double r : {5.0, 50.0})
        for (int i = 0; i < per_radius; ++i) {
            const double a = -pi + 0.05 + (pi - 0.1) * i / (per_radius - 1);
            out.push_back(std::polar(r, a));
        }
    return out;
}

ConformalMap::ConformalMap(CombSpec spec, ProductParams params)
    : spec_(std::move(spec)),
      product_(std::make_shared<const CanonicalProduct>(tail_law_for(spec_), std::move(params))),
      truncation_used_(int(product_->explicit_count()) + product_->params().nu) {}

ConformalMap ConformalMap::build(const CombSpec& spec, const MapOptions& options) {
    spec.validate();
    int N = spec.truncation_N;
    SolveReport rep;
    ProductParams full;
    double change = std::numeric_limits<double>::quiet_NaN();
    for (int d = 0;; ++d) {
        if (!options.certify) {
            full = solve_comb_product(spec, N, &rep);
            break;
        }
        const ProductParams half = solve_comb_product(spec, std::max(3, N / 2));
        full = solve_comb_product(spec, N, &rep, &half);
        change = dilation_aligned_change(tail_law_for(spec), half, full);
        if (change <= options.accuracy_target) break;
        if (d >= options.max_doublings || 2 * N > spec.stored())
            throw AccuracyNotMet(fmt::format("truncation {} changes the map by {:.3e} > {:.1e}", N, change,
                                             options.accuracy_target));
        N *= 2;
    }
    ConformalMap map(spec, full);
    map.accuracy_ = change;
    map.truncation_used_ = N;
    map.report_ = rep;
    if (options.normalize) {
        for (int pass = 0; pass < 2; ++pass) {
            const WarschawskiReport w = warschawski_shift(map, options.probe_lo, options.probe_hi);
            map.apply_shift(w.lambda);
        }
    }
    return map;
}

void ConformalMap::apply_shift(double lambda) {
    ProductParams p = product_->params();
    p.scale *= std::exp(-lambda);
    product_ = std::make_shared<const CanonicalProduct>(tail_law_for(spec_), std::move(p));
    shift_ += lambda;
}

cplx ConformalMap::log_g(cplx z) const { return product_->log_g(z); }

cplx ConformalMap::phi(cplx z) const {
    if (!(z.imag() < 0.0)) throw OutOfDomain("phi is defined on the open lower half-plane");
    return product_->log_g(z);
}

cplx ConformalMap::phi_prime(cplx z) const {
    if (!(z.imag() < 0.0)) throw OutOfDomain("phi is defined on the open lower half-plane");
    return product_->dlog_g(z);
}

cplx ConformalMap::g(cplx z) const {
    const cplx v = std::exp(product_->log_g(z));
    // on the real axis the two one-sided reflections average to the real part
    return z.imag() == 0.0 ? cplx(v.real(), 0.0) : v;
}

cplx ConformalMap::g_prime(cplx z) const { return g(z) * product_->dlog_g(z); }

cplx ConformalMap::phi_inverse(cplx w, std::optional<cplx> seed) const {
    cplx z = seed ? *seed : -I * product_->params().scale * product_->law().model_inverse(w);
    if (!(z.imag() < 0.0)) z = cplx(z.real(), -std::max(1e-3 * std::abs(z), 1e-12));
    cplx f, d;
    product_->log_g_with_derivative(z, f, d);
    f -= w;
    for (int it = 0; it < 200; ++it) {
        const cplx step = f / d;
        double lam = 1.0;
        cplx zn = z, fn = f, dn = d;
        bool moved = false;
        for (int ls = 0; ls < 50; ++ls, lam *= 0.5) {
            zn = z - lam * step;
            if (!(zn.imag() < 0.0)) continue;
            product_->log_g_with_derivative(zn, fn, dn);
            fn -= w;
            if (std::abs(fn) < std::abs(f)) {
                moved = true;
                break;
            }
        }
        if (!moved) {
            if (std::abs(f) < 1e-11 * std::max(1.0, std::abs(w))) return z;
            break;
        }
        z = zn;
        f = fn;
        d = dn;
        if (std::abs(f) < 1e-13 * std::max(1.0, std::abs(w)) || std::abs(lam * step) < 1e-15 * std::abs(z)) return z;
    }
    throw RootPolishFailed(fmt::format("phi^-1 did not converge at w = ({:.6g}, {:.6g})", w.real(), w.imag()));
}

WarschawskiReport warschawski_shift(const ConformalMap& map, double x0, double x1, int samples,
                                    double divergence_threshold) {
    const double alpha = map.spec().alpha;
    // keep the preimage of E(w) inside the evaluation range
    x1 = std::min(x1, std::log(map.max_modulus() / 2.0));
    if (!(x1 > x0)) throw InvalidArgument("probe range lies outside the evaluation range of the map");
    if (samples < 2) throw InvalidArgument("need at least two probe samples");

    WarschawskiReport r;
    r.probe_lo = x0;
    r.probe_hi = x1;
    std::vector<cplx> d;
    CompensatedSum mean;
    for (double y : {0.0, 0.5, -0.5}) {
        std::optional<cplx> seed;
        for (int i = 0; i < samples; ++i) {
            const cplx w(x0 + (x1 - x0) * i / (samples - 1), y);
            const cplx z = map.phi_inverse(comb_model_exp(map.spec(), w), seed);
            seed = z * std::exp((x1 - x0) / (samples - 1));
            const cplx h = std::log(I * z) - w;
            d.push_back(h);
            if (y == 0.0) mean += h.real();
        }
    }
    r.lambda = mean.value() / samples;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = i + 1; j < d.size(); ++j) r.oscillation = std::max(r.oscillation, std::abs(d[i] - d[j]));

    // the width profile needs the stored teeth
    const double t1 = std::min(x1, std::log(pi * map.spec().stored()) / alpha);
    if (!(t1 > x0)) return r;
    const double xm = 0.5 * (x0 + t1);
    const int steps = std::max(20, int((t1 - x0) / 0.01));
    CompensatedSum first, second;
    const double h = (t1 - x0) / steps;
    for (int i = 0; i <= steps; ++i) {
        const double x = x0 + h * i;
        const double excess = std::max(0.0, theta_profile(map.spec(), x) - pi);
        const double wgt = (i == 0 || i == steps) ? 0.5 * h : h;
        (x < xm ? first : second) += wgt * excess;
        r.K_bound = std::max(r.K_bound, excess * alpha * std::exp(alpha * x));
    }
    r.theta_first = first.value();
    r.theta_second = second.value();
    if (r.theta_second >= r.theta_first && r.theta_second > divergence_threshold)
        throw HypothesisFailed(fmt::format("theta - pi integral does not decay ({:.3e} then {:.3e})", r.theta_first,
                                           r.theta_second));
    return r;
}

}  // namespace escapedim
