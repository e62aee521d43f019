#include "paracalc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "paracalc/rng.hpp"

namespace paracalc {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

int lacunary_frequency(int j, Placement placement, std::uint64_t seed)
{
    if (j <= 0) return 1;
    if (j == 1) return 2;
    if (placement == Placement::centered) return 3 << (j - 2);
    if (placement == Placement::jittered) {
        const double base = std::ldexp(1.0, j - 1);
        const double u = rng::uniform(seed, 4, std::uint64_t(j));
        const int k = int(std::lround((1.25 + 0.5 * u) * base));
        return std::clamp(k, (1 << (j - 1)) + 1, 1 << j);
    }
    return 1 << j;
}

Field lacunary_field(const SpaceGrid& g, const LacunarySpec& spec, std::uint64_t seed)
{
    const int j_hi = spec.j_hi < 0 ? g.jmax() - 1 : spec.j_hi;
    require(spec.j_lo >= 0 && j_hi <= g.jmax() && spec.j_lo <= j_hi, ErrorKind::configuration,
            "lacunary field: block range outside the grid band");
    require(spec.modes_per_block >= 1, ErrorKind::configuration, "lacunary field: modes_per_block must be >= 1");
    Field out = Field::constant(g, spec.offset);
    auto& v = out.mutable_values();
    const double h = g.spacing();
    for (int mode = 0; mode < spec.modes_per_block; ++mode) {
        const std::uint64_t s = mode == 0 ? seed : rng::bits(seed, 50, std::uint64_t(mode));
        for (int j = spec.j_lo; j <= j_hi; ++j) {
            const int k = lacunary_frequency(j, spec.placement, s);
            const double amp = spec.amplitude * std::pow(2.0, -j * spec.alpha) * rng::sign(s, 1, std::uint64_t(j)) /
                               double(spec.modes_per_block);
            const double phase = two_pi * rng::uniform(s, 2, std::uint64_t(j));
            int m = 0;
            if (g.dim == 2 && k > 1) {
                // transverse component with |m| < k keeps the mode inside block j
                m = int(std::floor(rng::uniform(s, 3, std::uint64_t(j)) * (2 * k - 1))) - (k - 1);
            }
            if (g.dim == 1) {
                for (int i = 0; i < g.n; ++i) v[std::size_t(i)] += amp * std::cos(two_pi * k * i * h + phase);
            } else {
                for (int i0 = 0; i0 < g.n; ++i0)
                    for (int i1 = 0; i1 < g.n; ++i1)
                        v[std::size_t(i0) * g.n + i1] += amp * std::cos(two_pi * (k * i0 + m * i1) * h + phase);
            }
        }
    }
    return out;
}

Field coordinate_surrogate(const SpaceGrid& g, int axis)
{
    return Field::from_function(g, [axis](double x, double y) {
        return std::sin(two_pi * (axis == 0 ? x : y)) / two_pi;
    });
}

}  // namespace paracalc
