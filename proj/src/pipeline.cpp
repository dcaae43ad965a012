#include "escapedim/pipeline.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "escapedim/errors.hpp"

namespace escapedim {

namespace {

constexpr int kStoredTeeth = 20000;
constexpr double kCompletenessRadius = 200.0;

using nlohmann::json;

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
    else j[key] = nullptr;
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<T>();
}

CombSpec comb_for(const RunConfig& config) {
    const double alpha = config.comb_alpha();
    const int N = config.comb_truncation();
    CombSpec spec = config.q > 0 ? build_comb_modified_exp(alpha, config.c, config.q, log_cosh_half_pi, N, kStoredTeeth)
                                 : build_comb_from_sector(alpha, log_cosh_half_pi, N, kStoredTeeth);
    if (config.tooth_scale != 1.0) spec = spec.scaled_teeth(config.tooth_scale);
    return spec;
}

Construction assemble(const RunConfig& config, std::optional<CombSpec> comb) {
    config.validate();
    Construction c;
    c.config = config;
    const EllipticConfig cfg = EllipticConfig::make(config.M);
    FunctionHandle f;
    switch (config.kind()) {
        case FunctionKind::theorem2_exp: f = FunctionHandle::theorem2(cfg); break;
        case FunctionKind::F_arcsin: f = FunctionHandle::F(cfg); break;
        default: {
            if (!comb) comb = comb_for(config);
            MapOptions opt;
            opt.accuracy_target = config.tolerance;
            c.map = std::make_shared<const ConformalMap>(ConformalMap::build(*comb, opt));
            c.comb = comb;
            f = FunctionHandle::composed(cfg, c.map);
            if (config.power_N() > 1) f = FunctionHandle::power(f, config.power_N());
        }
    }
    if (config.lambda != 1.0) f = FunctionHandle::scaled(f, config.lambda);
    c.handle = f;
    return c;
}

// Atlas of f within `radius`, following the handle structure.
PoleAtlas atlas_of(const FunctionHandle& f, double radius, const RunConfig& config) {
    switch (f.kind()) {
        case FunctionKind::F_arcsin: return poles_of_F(radius, f.config());
        case FunctionKind::theorem2_exp: return theorem2_poles(radius, f.config());
        case FunctionKind::composed_f: {
            std::optional<SectorFilter> sector;
            if (config.sector == "delta") sector = kDelta;
            return compose_f_poles(*f.map(), f.config(), radius, sector);
        }
        case FunctionKind::power_trick: {
            const int N = f.power_N();
            return power_trick(atlas_of(*f.base(), std::pow(radius, double(N)), config), N);
        }
        case FunctionKind::scaled:
            return scaled_family(atlas_of(*f.base(), radius * f.lambda(), config), f.lambda());
        default: throw InvalidArgument("no atlas for kind " + kind_name(f.kind()));
    }
}

const FunctionHandle* innermost_composed(const FunctionHandle& f) {
    const FunctionHandle* h = &f;
    while (h && h->kind() != FunctionKind::composed_f) h = h->base();
    return h;
}

}  // namespace

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw InvalidArgument(what); };
    if (M < 1 || M > 4) fail(fmt::format("M = {} must lie in 1..4", M));
    if (!(rho >= 0.0) || !std::isfinite(rho)) fail("rho must be a finite nonnegative number");
    if (radius && !(*radius > 0.0 && std::isfinite(*radius))) fail("radius must be positive");
    if (alpha && !(*alpha > 0.0 && *alpha < 1.0)) fail("alpha must lie in (0, 1)");
    if (!(lambda > 0.0 && lambda <= 1.0)) fail("lambda must lie in (0, 1]");
    if (q < 0) fail("q must be nonnegative");
    if (!(c > 0.0)) fail("c must be positive");
    if (truncation_N && *truncation_N < 8) fail("truncation-N must be at least 8");
    if (!(tolerance > 0.0)) fail("tolerance must be positive");
    if (!(slack > 0.0)) fail("slack must be positive");
    if (!(tooth_scale > 0.0)) fail("tooth_scale must be positive");
    if (out.empty()) fail("output directory must not be empty");
    if (family != "auto" && family != "theorem2") fail("family must be auto or theorem2");
    if (sector != "delta" && sector != "full") fail("sector must be delta or full");
}

FunctionKind RunConfig::kind() const {
    if (family == "theorem2") return FunctionKind::theorem2_exp;
    if (rho == 0.0) return FunctionKind::F_arcsin;
    if (rho >= 2.0) return FunctionKind::power_trick;
    return FunctionKind::composed_f;
}

int RunConfig::power_N() const { return rho >= 2.0 ? int(std::floor(rho)) : 1; }

double RunConfig::base_rho() const { return rho / power_N(); }

double RunConfig::comb_alpha() const { return alpha.value_or(base_rho() / 2.0); }

int RunConfig::comb_truncation() const { return truncation_N.value_or(comb_alpha() > 0.5 ? 256 : 128); }

double RunConfig::atlas_radius() const {
    if (radius) return *radius;
    switch (kind()) {
        case FunctionKind::theorem2_exp: return 5.0;
        case FunctionKind::F_arcsin: return 1e6;
        case FunctionKind::power_trick: return std::pow(2.0, 18.0 / power_N());
        default: return 1e4;
    }
}

double RunConfig::theoretical() const {
    if (kind() == FunctionKind::theorem2_exp) return 2.0;
    return theoretical_bound(M, rho);
}

std::string RunConfig::to_json() const {
    json j;
    j["M"] = M;
    j["rho"] = rho;
    put_optional(j, "radius", radius);
    put_optional(j, "alpha", alpha);
    j["lambda"] = lambda;
    j["q"] = q;
    j["c"] = c;
    put_optional(j, "truncation_N", truncation_N);
    j["tolerance"] = tolerance;
    j["tooth_scale"] = tooth_scale;
    j["slack"] = slack;
    j["check"] = check;
    j["family"] = family;
    j["sector"] = sector;
    return j.dump(1);
}

RunConfig RunConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    RunConfig r;
    r.M = j.at("M").get<int>();
    r.rho = j.at("rho").get<double>();
    r.radius = get_optional<double>(j, "radius");
    r.alpha = get_optional<double>(j, "alpha");
    r.lambda = j.at("lambda").get<double>();
    r.q = j.at("q").get<int>();
    r.c = j.at("c").get<double>();
    r.truncation_N = get_optional<int>(j, "truncation_N");
    r.tolerance = j.at("tolerance").get<double>();
    r.tooth_scale = j.at("tooth_scale").get<double>();
    r.slack = j.at("slack").get<double>();
    r.check = j.at("check").get<bool>();
    r.family = j.at("family").get<std::string>();
    r.sector = j.at("sector").get<std::string>();
    return r;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw InvalidArgument("cannot write " + tmp.string());
        os << content;
        os.flush();
        if (!os) throw InvalidArgument("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidArgument("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Construction construct(const RunConfig& config) { return assemble(config, std::nullopt); }

void save_construction(const Construction& c, const std::filesystem::path& dir) {
    json j;
    j["kind"] = kind_name(c.handle.kind());
    j["config"] = json::parse(c.config.to_json());
    j["power_N"] = c.config.power_N();
    j["base_rho"] = c.config.base_rho();
    j["theoretical"] = c.config.theoretical();
    if (c.comb) j["comb_alpha"] = c.comb->alpha;
    j["handle"] = json::parse(c.handle.descriptor_json());
    write_atomic(dir / "construction.json", j.dump(1) + "\n");
    if (c.comb) write_atomic(dir / "comb.json", c.comb->to_json() + "\n");
}

Construction load_construction(const std::filesystem::path& dir) {
    const std::filesystem::path file = dir / "construction.json";
    if (!std::filesystem::exists(file))
        throw InvalidArgument("no construction in " + dir.string() + "; run construct first");
    const json j = json::parse(read_file(file));
    RunConfig config = RunConfig::from_json(j.at("config").dump());
    config.out = dir.string();
    std::optional<CombSpec> comb;
    if (std::filesystem::exists(dir / "comb.json")) comb = CombSpec::from_json(read_file(dir / "comb.json"));
    return assemble(config, comb);
}

AtlasRun enumerate_poles(const Construction& c, double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    AtlasRun run;
    run.atlas = atlas_of(c.handle, radius, c.config);
    run.atlas.validate();
    if (const FunctionHandle* g = innermost_composed(c.handle)) {
        CompletenessCheck& chk = run.completeness;
        chk.radius = kCompletenessRadius;
        for (const PoleRecord& p : compose_f_poles(*g->map(), g->config(), chk.radius).records)
            chk.atlas_count += p.multiplicity;
        chk.winding_count = growth_curve(*g, {chk.radius}).samples[0].n_r;
        chk.performed = true;
    }
    return run;
}

std::string DimensionRow::to_csv() const {
    return fmt::format("t_star,t_low,t_high,theoretical,gap\n{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", t_star, t_low,
                       t_high, theoretical, gap);
}

DimensionRow dimension_row(const DimensionEstimate& e) {
    DimensionRow r;
    r.t_star = e.t_star;
    r.t_low = e.t_low;
    r.t_high = e.t_high;
    r.theoretical = e.theoretical;
    if (e.theoretical < e.t_low) r.gap = e.t_low - e.theoretical;
    else if (e.theoretical > e.t_high) r.gap = e.theoretical - e.t_high;
    return r;
}

std::vector<double> growth_radii(const Construction& c) {
    const double lo = std::pow(1e2, 1.0 / c.config.power_N());
    const double hi = c.config.atlas_radius();
    if (!(hi >= 4.0 * lo)) throw InvalidArgument(fmt::format("growth needs a radius of at least {}", 4.0 * lo));
    std::vector<double> v;
    for (int i = 0; i < 9; ++i) v.push_back(lo * std::pow(hi / lo, i / 8.0));
    return v;
}

}  // namespace escapedim
