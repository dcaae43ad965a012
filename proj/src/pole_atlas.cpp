#include "escapedim/pole_atlas.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <json.hpp>

#include "escapedim/errors.hpp"

namespace escapedim {

void PoleAtlas::canonicalize() {
    sort_canonical(records);
    // poles next to a zero of g come in conjugate pairs far closer than 1e-8 |a|, so only
    // exact repeats are dropped
    records.erase(std::unique(records.begin(), records.end(),
                              [](const PoleRecord& a, const PoleRecord& b) { return a.location == b.location; }),
                  records.end());
}

void PoleAtlas::validate() const {
    if (M < 1) throw InvalidArgument("atlas multiplicity must be positive");
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].multiplicity != M) throw InvalidArgument("atlas multiplicities are not uniform");
        if (i > 0 && canonical_less(records[i].location, records[i - 1].location))
            throw InvalidArgument("atlas records are not sorted");
        if (i > 0 && records[i].location == records[i - 1].location)
            throw InvalidArgument("atlas has duplicate poles");
    }
}

PoleAtlas PoleAtlas::within(double r) const {
    PoleAtlas out = *this;
    out.records.clear();
    for (const PoleRecord& p : records)
        if (std::abs(p.location) <= r) out.records.push_back(p);
    out.radius = std::min(radius, r);
    return out;
}

PoleAtlas PoleAtlas::restricted(SectorFilter s) const {
    PoleAtlas out = *this;
    out.records.clear();
    for (const PoleRecord& p : records)
        if (s.contains(p.location)) out.records.push_back(p);
    if (sector) {
        out.sector = SectorFilter{std::max(s.lo, sector->lo), std::min(s.hi, sector->hi)};
    } else {
        out.sector = s;
    }
    return out;
}

std::size_t PoleAtlas::count_within(double r) const {
    return std::size_t(std::count_if(records.begin(), records.end(),
                                     [r](const PoleRecord& p) { return std::abs(p.location) <= r; }));
}

std::string PoleAtlas::to_json() const {
    nlohmann::json j;
    j["M"] = M;
    j["radius"] = radius;
    j["provenance"] = provenance;
    j["sector"] = sector ? nlohmann::json::array({sector->lo, sector->hi}) : nlohmann::json(nullptr);
    auto poles = nlohmann::json::array();
    for (const PoleRecord& p : records)
        poles.push_back({{"re", p.location.real()},
                         {"im", p.location.imag()},
                         {"mult", p.multiplicity},
                         {"b_re", p.coefficient.real()},
                         {"b_im", p.coefficient.imag()}});
    j["poles"] = std::move(poles);
    return j.dump(1);
}

PoleAtlas PoleAtlas::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    PoleAtlas a;
    a.M = j.at("M").get<int>();
    a.radius = j.at("radius").get<double>();
    a.provenance = j.value("provenance", "");
    if (j.contains("sector") && !j["sector"].is_null())
        a.sector = SectorFilter{j["sector"].at(0).get<double>(), j["sector"].at(1).get<double>()};
    for (const auto& p : j.at("poles"))
        a.records.push_back(PoleRecord{cplx(p.at("re").get<double>(), p.at("im").get<double>()),
                                       p.at("mult").get<int>(),
                                       cplx(p.at("b_re").get<double>(), p.at("b_im").get<double>())});
    a.validate();
    return a;
}

std::string PoleAtlas::to_csv() const {
    std::string out = "abs_a,arg_a,abs_b,mult\n";
    for (const PoleRecord& p : records)
        out += fmt::format("{},{},{},{}\n", std::abs(p.location), std::arg(p.location), std::abs(p.coefficient),
                           p.multiplicity);
    return out;
}

}  // namespace escapedim
