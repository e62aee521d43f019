#pragma once

#include <functional>
#include <vector>

#include "paracalc/littlewood_paley.hpp"
#include "paracalc/torus_fields.hpp"

namespace paracalc {

/// Physical values of each dyadic block on the 2x zero-padded grid.
/// Nyquist coefficients are split evenly between +N/2 and -N/2.
struct PaddedBlocks {
    SpaceGrid grid;  // original grid
    int padded_n = 0;
    std::vector<std::vector<double>> blocks;  // blocks[j + 1]

    const std::vector<double>& block(int j) const { return blocks[std::size_t(j + 1)]; }
    int jmax() const { return int(blocks.size()) - 2; }
};

PaddedBlocks padded_blocks(const Field& f);
/// Physical values of f on the padded grid.
std::vector<double> pad_field(const Field& f);
/// Forward transform of padded values and truncation back to the original band
/// (the +-N/2 pair is folded onto the Nyquist index).
Field truncate_padded(const SpaceGrid& g, const std::vector<double>& padded);

/// sum over block pairs (i, j) accepted by the predicate of Delta_i a * Delta_j b, de-aliased.
Field block_bilinear(const Field& a, const Field& b, const std::function<bool(int, int)>& accept);

/// De-aliased pointwise product.
Field product(const Field& a, const Field& b);
/// P_a b = sum_j S_{j-2} a Delta_j b.
Field para(const Field& a, const Field& b);
/// Pi(a, b) = sum_{|i-j| <= 1} Delta_i a Delta_j b.
Field resonant(const Field& a, const Field& b);

struct ProductParts {
    Field para_ab;   // P_a b
    Field resonant;  // Pi(a, b)
    Field para_ba;   // P_b a
    Field sum() const { return para_ab + resonant + para_ba; }
};

ProductParts decompose_product(const Field& a, const Field& b);

struct SemigroupParts {
    Field q_pp;    // int Q(P a . P b) dt/t
    Field p_qp;    // int P(Q a . P b) dt/t
    Field p_pq;    // int P(P a . Q b) dt/t
    Field smooth;  // P_1(P_1 a . P_1 b)
    Field sum() const { return q_pp + p_qp + p_pq + smooth; }
};

/// Continuous-parameter paraproduct with geometric quadrature in t on [t_min, 1].
SemigroupParts semigroup_para(const Field& a, const Field& b, const OperatorL& op, int b_order, int t_levels,
                              double t_min);

/// Elliptic stand-in for time-constant inputs: L^{-1} P_a (L b) on nonzero modes.
Field para_tilde(const Field& a, const Field& b, const OperatorL& op);

// Space-time versions act slice by slice.
SpaceTimeField product(const SpaceTimeField& a, const SpaceTimeField& b);
SpaceTimeField para(const SpaceTimeField& a, const SpaceTimeField& b);
SpaceTimeField resonant(const SpaceTimeField& a, const SpaceTimeField& b);
/// P~_a b = L^{-1}(P_a(L b)) with zero initial slice for the inversion.
SpaceTimeField para_tilde(const SpaceTimeField& a, const SpaceTimeField& b, const OperatorL& op);
/// Time-constant field promoted to the time grid of a reference.
SpaceTimeField broadcast(const Field& f, const SpaceTimeField& like);

}  // namespace paracalc
