#pragma once

#include <optional>
#include <string>
#include <vector>

#include "escapedim/elliptic.hpp"

namespace escapedim {

// Closed-open argument interval (lo, hi) in (-pi, pi].
struct SectorFilter {
    double lo = -pi;
    double hi = pi;
    [[nodiscard]] bool contains(cplx z) const {
        const double a = std::arg(z);
        return a > lo && a < hi;
    }
};

// Delta = {-3pi/4 < arg z < -pi/4}
inline constexpr SectorFilter kDelta{-3.0 * pi / 4.0, -pi / 4.0};

struct PoleAtlas {
    std::vector<PoleRecord> records;
    int M = 1;
    double radius = 0.0;  // every pole with |a| <= radius (and inside the sector) is present
    std::optional<SectorFilter> sector;
    std::string provenance;

    // Sort canonically and drop repeated locations.
    void canonicalize();
    // Throws InvalidArgument when sorting, uniqueness or multiplicity fail.
    void validate() const;

    [[nodiscard]] PoleAtlas within(double r) const;
    [[nodiscard]] PoleAtlas restricted(SectorFilter s) const;
    [[nodiscard]] std::size_t count_within(double r) const;

    [[nodiscard]] std::string to_json() const;
    static PoleAtlas from_json(const std::string& text);
    [[nodiscard]] std::string to_csv() const;
};

}  // namespace escapedim
