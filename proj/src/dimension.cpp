#include "escapedim/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <limits>

#include "escapedim/errors.hpp"
#include "escapedim/speiser.hpp"

namespace escapedim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// floor(log2 x) without rounding trouble at powers of two
int dyadic_index(double x) {
    int e = 0;
    std::frexp(x, &e);
    return e - 1;
}

// Per-pole block index and log of the base term, computed once per atlas.
struct Prepared {
    std::vector<int> block;
    std::vector<double> log_w;
    int l_lo = 0, l_hi = -1;
    double radius = 0.0;
};

Prepared prepare(const PoleAtlas& atlas) {
    if (atlas.records.empty()) throw InvalidArgument("atlas is empty");
    if (atlas.M < 1) throw InvalidArgument("atlas multiplicity must be positive");
    Prepared P;
    const double e = 1.0 + 1.0 / double(atlas.M);
    double amin = kInf, amax = 0.0;
    for (const PoleRecord& r : atlas.records) {
        const double a = std::abs(r.location);
        if (!(a > 0.0)) throw InvalidArgument("pole at the origin has no series term");
        amin = std::min(amin, a);
        amax = std::max(amax, a);
        P.block.push_back(dyadic_index(a));
        P.log_w.push_back(std::log(std::abs(r.coefficient)) - e * std::log(a));
    }
    P.radius = atlas.radius > 0.0 ? atlas.radius : amax;
    P.l_lo = dyadic_index(amin);
    P.l_hi = dyadic_index(std::max(P.radius, amax));
    return P;
}

std::vector<BlockSum> blocks_of(const Prepared& P, double t) {
    const int nb = P.l_hi - P.l_lo + 1;
    const std::size_t nbs = std::size_t(nb);
    std::vector<CompensatedSum> sums(nbs);
    std::vector<BlockSum> out(nbs);
    for (std::size_t j = 0; j < P.block.size(); ++j) {
        const std::size_t b = std::size_t(P.block[j] - P.l_lo);
        sums[b].add(std::exp(t * P.log_w[j]));
        ++out[b].count;
    }
    for (int i = 0; i < nb; ++i) {
        BlockSum& B = out[std::size_t(i)];
        B.l = P.l_lo + i;
        B.S = sums[std::size_t(i)].value();
        B.complete = std::ldexp(1.0, B.l + 1) <= P.radius;
    }
    return out;
}

std::vector<const BlockSum*> fit_window(const std::vector<BlockSum>& blocks, const DimensionOptions& o) {
    std::vector<const BlockSum*> complete;
    for (const BlockSum& b : blocks)
        if (b.complete) complete.push_back(&b);
    if (complete.size() < o.min_blocks)
        throw InsufficientBlocks(
            fmt::format("{} complete dyadic blocks, at least {} needed", complete.size(), o.min_blocks));
    const std::size_t take = std::max<std::size_t>(
        2, std::size_t(std::ceil(o.fit_fraction * double(complete.size()))));
    return {complete.end() - std::ptrdiff_t(std::min(take, complete.size())), complete.end()};
}

// Exponent-of-convergence fit on the terms sorted by size, blocked dyadically by index.
double index_decay(const std::vector<double>& sorted_log_w, double t, const DimensionOptions& o) {
    const std::size_t n = sorted_log_w.size();
    std::vector<double> ks, ys;
    int K = 0;
    while ((std::size_t(2) << K) - 1 <= n) ++K;  // blocks [2^k, 2^{k+1}) of 1-based indices
    if (std::size_t(K) < o.min_blocks)
        throw InsufficientBlocks(fmt::format("{} complete index blocks, at least {} needed", K, o.min_blocks));
    const int first = K - std::max(2, int(std::ceil(o.fit_fraction * double(K))));
    for (int k = std::max(first, 0); k < K; ++k) {
        CompensatedSum s;
        for (std::size_t j = (std::size_t(1) << k) - 1; j < (std::size_t(2) << k) - 1; ++j)
            s.add(std::exp(t * sorted_log_w[j]));
        ks.push_back(double(k));
        ys.push_back(std::log2(s.value()));
    }
    return -fit_line(ks, ys).slope;
}

double bisect_crossing(const std::function<double(double)>& sigma, double lo, double hi, double s_lo, double s_hi,
                       double width, double* out_lo, double* out_hi) {
    while (hi - lo > width) {
        const double mid = 0.5 * (lo + hi);
        const double s = sigma(mid);
        if (s > 0.0) {
            hi = mid;
            s_hi = s;
        } else {
            lo = mid;
            s_lo = s;
        }
    }
    *out_lo = lo;
    *out_hi = hi;
    if (!std::isfinite(s_hi) || s_hi == s_lo) return hi;
    return lo + (hi - lo) * (-s_lo) / (s_hi - s_lo);
}

}  // namespace

double series_term(const PoleRecord& record, double t, int M) {
    const double a = std::abs(record.location);
    return std::pow(std::abs(record.coefficient) / std::pow(a, 1.0 + 1.0 / double(M)), t);
}

std::vector<BlockSum> dyadic_blocks(const PoleAtlas& atlas, double t) {
    return blocks_of(prepare(atlas), t);
}

std::string method_name(DimensionMethod m) {
    return m == DimensionMethod::block_decay_fit ? "block_decay_fit" : "partial_sum_bisection";
}

bool DecayFit::summable(double borderline) const {
    if (finite_tail) return true;
    if (sigma > borderline) return true;
    if (sigma < -borderline) return false;
    return power > 1.0;
}

DecayFit fit_block_decay(const std::vector<BlockSum>& blocks, const DimensionOptions& options) {
    const auto window = fit_window(blocks, options);
    DecayFit fit;
    std::vector<double> l, y, logl, lny;
    for (const BlockSum* b : window) {
        if (!(b->S > 0.0)) continue;
        l.push_back(double(b->l));
        y.push_back(std::log2(b->S));
        if (b->l >= 1) {
            logl.push_back(std::log(double(b->l)));
            lny.push_back(std::log(b->S));
        }
    }
    fit.blocks_used = l.size();
    if (l.size() < 2) {
        if (window.back()->count == 0) {
            fit.finite_tail = true;
            fit.sigma = kInf;
            fit.power = kInf;
            return fit;
        }
        throw InsufficientBlocks("fewer than two nonempty blocks in the fit window");
    }
    const LinearFit lf = fit_line(l, y);
    fit.sigma = -lf.slope;
    fit.r_squared = lf.r_squared;
    if (logl.size() >= 2) fit.power = -fit_line(logl, lny).slope;
    return fit;
}

DecayFit decay_at(const PoleAtlas& atlas, double t, const DimensionOptions& options) {
    return fit_block_decay(dyadic_blocks(atlas, t), options);
}

double theoretical_bound(int M, double rho) {
    if (M < 1) throw InvalidArgument("M must be positive");
    if (!(rho >= 0.0)) throw InvalidArgument("rho must be nonnegative");
    if (std::isinf(rho)) return 2.0;
    const double x = double(M) * rho;
    return 2.0 * x / (2.0 + x);
}

DimensionEstimate critical_exponent(const PoleAtlas& atlas, const DimensionOptions& o) {
    if (o.grid < 2 || !(o.t_max > o.t_min) || o.t_min < 0.0 || o.t_max > 2.0)
        throw InvalidArgument("invalid t grid");
    if (!(o.bracket_width > 0.0)) throw InvalidArgument("bracket width must be positive");
    const Prepared P = prepare(atlas);

    DimensionEstimate est;
    est.method = o.method;
    est.M = atlas.M;
    if (o.rho) {
        est.rho = *o.rho;
        est.has_rho = true;
        est.theoretical = theoretical_bound(atlas.M, *o.rho);
    }

    // a tail with no poles converges for every t
    const DecayFit probe = fit_block_decay(blocks_of(P, 1.0), o);
    if (probe.finite_tail) {
        est.t_star = est.t_low = est.t_high = 0.0;
        est.block_sums = blocks_of(P, 0.0);
        return est;
    }

    std::vector<double> sorted;
    if (o.method == DimensionMethod::partial_sum_bisection) {
        sorted = P.log_w;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
    }
    const std::function<double(double)> sigma = [&](double t) {
        if (o.method == DimensionMethod::block_decay_fit) return fit_block_decay(blocks_of(P, t), o).sigma;
        return index_decay(sorted, t, o);
    };

    std::vector<double> ts(std::size_t(o.grid)), ss(std::size_t(o.grid));
    for (int i = 0; i < o.grid; ++i) {
        ts[std::size_t(i)] = o.t_min + (o.t_max - o.t_min) * double(i) / double(o.grid - 1);
        ss[std::size_t(i)] = sigma(ts[std::size_t(i)]);
        est.scan.emplace_back(ts[std::size_t(i)], ss[std::size_t(i)]);
    }
    for (std::size_t i = 1; i < ss.size(); ++i)
        if (ss[i] < ss[i - 1] - o.monotone_slack * std::max(1.0, std::abs(ss[i - 1])))
            throw NonMonotone(fmt::format("decay exponent drops from {} to {} between t = {} and t = {}", ss[i - 1],
                                          ss[i], ts[i - 1], ts[i]));

    const auto first_pos = std::find_if(ss.begin(), ss.end(), [](double s) { return s > 0.0; });
    if (first_pos == ss.begin()) {
        est.t_star = est.t_low = est.t_high = o.t_min;
    } else if (first_pos == ss.end()) {
        est.t_star = est.t_low = est.t_high = o.t_max;
    } else {
        const std::size_t i = std::size_t(first_pos - ss.begin());
        est.t_star = bisect_crossing(sigma, ts[i - 1], ts[i], ss[i - 1], ss[i], o.bracket_width, &est.t_low,
                                     &est.t_high);
    }
    est.block_sums = blocks_of(P, est.t_star);
    return est;
}

std::string DimensionEstimate::to_json() const {
    nlohmann::json j;
    j["t_star"] = t_star;
    j["t_low"] = t_low;
    j["t_high"] = t_high;
    j["theoretical"] = has_rho ? nlohmann::json(theoretical) : nlohmann::json(nullptr);
    j["M"] = M;
    j["rho"] = has_rho ? nlohmann::json(rho) : nlohmann::json(nullptr);
    auto blocks = nlohmann::json::array();
    for (const BlockSum& b : block_sums) blocks.push_back({b.l, b.S});
    j["blocks"] = std::move(blocks);
    j["method"] = method_name(method);
    auto sc = nlohmann::json::array();
    for (const auto& [t, s] : scan) sc.push_back({t, std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr)});
    j["scan"] = std::move(sc);
    return j.dump(1);
}

std::string DimensionEstimate::blocks_csv() const {
    std::string out = "l,S_l,count,complete\n";
    for (const BlockSum& b : block_sums)
        out += fmt::format("{},{:.17g},{},{}\n", b.l, b.S, b.count, b.complete ? 1 : 0);
    return out;
}

bool Lemma2bReport::bounds_hold() const {
    return std::all_of(blocks.begin(), blocks.end(),
                       [](const Lemma2bBlock& b) { return b.holder_ok && b.first_bound_ok; });
}

Lemma2bReport lemma2b_diagnostics(const PoleAtlas& atlas, double rho, double p, double R) {
    const int M = atlas.M;
    if (!(p > (4.0 + M * rho) / 2.0))
        throw HypothesisViolated(fmt::format("p = {} must exceed (4 + M rho)/2 = {}", p, (4.0 + M * rho) / 2.0));
    const Prepared P = prepare(atlas);
    Lemma2bReport rep;
    rep.t = theoretical_bound(M, rho);
    rep.p = p;
    rep.predicted_decay = (p - 1.0) * (2.0 - rep.t) / 2.0;
    rep.exponent_ok = rep.predicted_decay > 1.0;

    const int nb = P.l_hi - P.l_lo + 1;
    const std::size_t nbs = std::size_t(nb);
    std::vector<CompensatedSum> S(nbs), b2(nbs), b2a2(nbs), ar(nbs);
    for (std::size_t j = 0; j < atlas.records.size(); ++j) {
        const std::size_t k = std::size_t(P.block[j] - P.l_lo);
        const double a = std::abs(atlas.records[j].location), b = std::abs(atlas.records[j].coefficient);
        S[k].add(std::exp(rep.t * P.log_w[j]));
        b2[k].add(b * b);
        b2a2[k].add(b * b / (a * a));
        ar[k].add(std::pow(a, -rho));
    }
    for (int i = 0; i < nb; ++i) {
        const int l = P.l_lo + i;
        if (std::ldexp(1.0, l + 1) > P.radius) continue;
        rep.envelope = std::max(rep.envelope, std::sqrt(b2[std::size_t(i)].value()) / (6.0 * std::ldexp(1.0, l + 1)));
    }
    rep.R = R > 0.0 ? R : 2.0 * std::max(2.0, rep.envelope);

    std::vector<double> logl, logS;
    for (int i = 0; i < nb; ++i) {
        const int l = P.l_lo + i;
        if (std::ldexp(1.0, l + 1) > P.radius) continue;
        Lemma2bBlock B;
        B.l = l;
        B.S = S[std::size_t(i)].value();
        B.first = std::pow(b2a2[std::size_t(i)].value(), rep.t / 2.0);
        B.second = std::pow(ar[std::size_t(i)].value(), (2.0 - rep.t) / 2.0);
        B.holder_ok = B.S <= B.first * B.second * (1.0 + 1e-12);
        B.first_bound_ok = B.first <= std::pow(12.0 * rep.R, rep.t) * (1.0 + 1e-12);
        rep.blocks.push_back(B);
    }
    const std::size_t half = rep.blocks.size() / 2;
    for (std::size_t i = half; i < rep.blocks.size(); ++i) {
        const Lemma2bBlock& B = rep.blocks[i];
        if (B.l >= 1 && B.S > 0.0) {
            logl.push_back(std::log(double(B.l)));
            logS.push_back(std::log(B.S));
        }
    }
    if (logl.size() >= 2) rep.fitted_decay = -fit_line(logl, logS).slope;
    rep.tail_summable = rep.fitted_decay > 1.0;
    return rep;
}

bool LatticeSumReport::divergence_indicator() const {
    const bool k_ok = std::all_of(k_samples.begin(), k_samples.end(), [](const KSumSample& s) { return s.holds; });
    if (!k_ok) return false;
    if (k_sum_diverges) return true;
    if (exponent > 2.0 + 1e-12 || !(log_fit.slope > 0.0)) return false;
    return exponent < 2.0 - 1e-12 || log_fit.r_squared > 0.99;
}

LatticeSumReport theorem2_lattice_sums(const EllipticConfig& cfg, double t, double epsilon, int max_window,
                                       int k_samples) {
    if (!(t > 0.0) || !(epsilon >= 0.0)) throw InvalidArgument("t must be positive and epsilon nonnegative");
    if (max_window < 10) throw InvalidArgument("max_window must be at least 10");
    const HLattice L = h_lattice(cfg);
    std::size_t pick = 0;
    for (std::size_t i = 1; i < L.base.size(); ++i)
        if (canonical_less(L.base[i], L.base[pick])) pick = i;
    const cplx p0 = L.base[pick];
    const double P = L.period;
    auto lattice = [&](long m, long n) { return p0 + cplx(double(m) * P, double(n) * P); };

    LatticeSumReport rep;
    rep.t = t;
    rep.epsilon = epsilon;
    rep.exponent = t + epsilon;
    rep.delta = std::min(theorem2_delta(cfg), 0.5);
    const double s = (1.0 + 1.0 / double(cfg.M)) * t;
    rep.A_t = std::pow(1.0 + 2.0 * pi * pi / (rep.delta * rep.delta), -s / 2.0);
    rep.k_sum_diverges = s <= 1.0;
    rep.B_t = rep.k_sum_diverges
                  ? kInf
                  : rep.A_t * 0.5 * std::sqrt(pi) * std::tgamma((s - 1.0) / 2.0) / std::tgamma(s / 2.0);

    // window sums ring by ring
    CompensatedSum total;
    double prev = 0.0;
    std::vector<double> logN, sums;
    for (long N = 0; N <= max_window; ++N) {
        CompensatedSum ring;
        auto visit = [&](long m, long n) {
            const cplx p = lattice(m, n);
            const double ap = std::abs(p);
            ring.add(std::pow(ap, -rep.exponent));
            if (!rep.k_sum_diverges)
                rep.C = std::max(rep.C, std::pow(std::abs(std::log(ap)), s - 1.0) / std::pow(ap, epsilon));
        };
        if (N == 0) {
            visit(0, 0);
        } else {
            for (long m = -N; m <= N; ++m) {
                visit(m, -N);
                visit(m, N);
            }
            for (long n = -N + 1; n <= N - 1; ++n) {
                visit(-N, n);
                visit(N, n);
            }
        }
        total.merge(ring);
        const double S = total.value();
        if (N >= 1) {
            rep.windows.push_back(LatticeWindow{int(N), S});
            const double inc = S - prev;
            rep.last_increment = inc;
            if (inc >= 1e-4) rep.settled_window = -1;
            else if (rep.settled_window < 0) rep.settled_window = int(N) - 1;
        }
        if (N >= 10) {
            logN.push_back(std::log(double(N)));
            sums.push_back(S);
        }
        prev = S;
    }
    rep.log_fit = fit_line(logN, sums);

    // k-aggregated sums against the integral bound on a spread of (m, n)
    const int K = 4000;
    for (int i = 0; i < k_samples; ++i) {
        KSumSample ks;
        ks.m = -12 + 6 * (i % 5);
        ks.n = -9 + 5 * (i / 5);
        const cplx lp = std::log(lattice(ks.m, ks.n));
        const double u = lp.real(), v = lp.imag();
        if (rep.k_sum_diverges) {
            ks.k_sum = ks.bound = kInf;
            ks.holds = true;
        } else {
            CompensatedSum sum;
            for (int k = -K; k <= K; ++k) sum.add(std::pow(u * u + std::pow(v + 2.0 * pi * k, 2.0), -s / 2.0));
            const double truncated = sum.value();
            ks.bound = rep.B_t / std::pow(std::abs(u), s - 1.0);
            ks.holds = truncated >= ks.bound;
            ks.k_sum = truncated + 2.0 * std::pow(2.0 * pi, -s) * std::pow(K + 0.5, 1.0 - s) / (s - 1.0);
        }
        rep.k_samples.push_back(ks);
    }
    return rep;
}

CoveringReport covering_sum_bound(const PoleAtlas& atlas, double t, double R, int l) {
    const int M = atlas.M;
    if (l < 1) throw InvalidArgument("l must be positive");
    if (!(t > 0.0)) throw InvalidArgument("t must be positive");
    if (R < std::pow(32.0, double(M)))
        throw PreconditionRadius(fmt::format("R = {} is below (16 R0)^M = {}", R, std::pow(32.0, double(M))));
    std::vector<PoleRecord> recs = atlas.records;
    sort_canonical(recs);
    CoveringReport rep;
    rep.R = R;
    rep.n_R = std::size_t(std::count_if(recs.begin(), recs.end(),
                                        [R](const PoleRecord& p) { return std::abs(p.location) <= R; }));
    if (rep.n_R >= recs.size() || atlas.radius <= R)
        throw PreconditionRadius(fmt::format("no poles of the atlas lie beyond R = {}", R));
    CompensatedSum tail, full;
    for (std::size_t j = 0; j < recs.size(); ++j) {
        const double w = series_term(recs[j], t, M);
        full.add(w);
        if (j + 1 >= std::max<std::size_t>(rep.n_R, 1)) tail.add(w);
    }
    rep.tail_sum = tail.value();
    const double c = double(M) * std::pow(std::pow(2.0, 1.0 / M) * 24.0, t);
    rep.prefactor = std::pow(32.0 / (std::pow(2.0 * R, 1.0 / M) * 24.0), t) / double(M);
    rep.bracket = c * rep.tail_sum;
    rep.full_bracket = c * full.value();
    rep.bound = rep.prefactor * std::pow(rep.bracket, double(l));
    rep.contraction = rep.full_bracket < 1.0;
    return rep;
}

}  // namespace escapedim
