#pragma once

#include <cstdint>

#include "paracalc/torus_fields.hpp"

namespace paracalc {

/// Where each lacunary mode sits inside its dyadic block.
/// edge: 2^j; centered: 3 2^{j-2}; jittered: seeded in the middle half of the block.
enum class Placement { edge, centered, jittered };

struct LacunarySpec {
    double alpha = 0.5;          // target exponent, may be negative
    int j_lo = 1;                // first populated block
    int j_hi = -1;               // last populated block; -1 means J - 1
    Placement placement = Placement::edge;
    double amplitude = 1.0;
    double offset = 0.0;         // constant (block -1) term
    int modes_per_block = 1;     // independent seeded modes per block, amplitudes divided by the count
};

/// Modal frequency of the lacunary term in block j.
int lacunary_frequency(int j, Placement placement, std::uint64_t seed = 0);

/// sum_j 2^{-j alpha} eps_j cos(2 pi k_j . x + phi_j) with seeded signs and phases.
/// In 2d the wave vector is (k_j, m_j) with a seeded |m_j| < k_j, so the max-norm stays k_j.
Field lacunary_field(const SpaceGrid& g, const LacunarySpec& spec, std::uint64_t seed);

/// Band-limited periodic stand-in for the coordinate x_axis: sin(2 pi x)/(2 pi).
Field coordinate_surrogate(const SpaceGrid& g, int axis);

}  // namespace paracalc
