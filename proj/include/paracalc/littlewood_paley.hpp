#pragma once

#include <string>
#include <vector>

#include "paracalc/torus_fields.hpp"

namespace paracalc {

/// Sharp indicator blocks (exact partition) or smooth bumps summing to one.
enum class Cutoff { sharp, smooth };

/// Block index of a frequency under the max-norm: -1 for k = 0,
/// 0 for |k| = 1, j for 2^{j-1} < |k| <= 2^j.
int block_of(const Freq& k);
inline int block_count(const SpaceGrid& g) { return g.jmax() + 2; }
/// Weight of frequency k in block j.
double block_weight(Cutoff cutoff, int j, const Freq& k);

struct DyadicDecomposition {
    std::vector<Field> blocks;  // blocks[j + 1] holds Delta_j
    std::vector<double> block_sups;
    int jmax = 0;

    const Field& block(int j) const { return blocks[std::size_t(j + 1)]; }
    double sup(int j) const { return block_sups[std::size_t(j + 1)]; }
    Field reconstruct() const;
};

DyadicDecomposition decompose(const Field& f, Cutoff cutoff = Cutoff::sharp);
Field block(const Field& f, int j, Cutoff cutoff = Cutoff::sharp);
/// S_j f = sum_{i <= j} Delta_i f (zero for j < -1).
Field low_pass(const Field& f, int j);

/// max_j 2^{j alpha} |Delta_j f|_inf.
double besov_norm(const Field& f, double alpha, Cutoff cutoff = Cutoff::sharp);
/// Sup over time slices of the spatial norm.
double besov_norm(const SpaceTimeField& f, double alpha);
/// Spatial norm sup plus time-Hoelder seminorm with exponent alpha/2.
double parabolic_norm(const SpaceTimeField& f, double alpha);

struct RegularityEstimate {
    double alpha = 0.0;
    double r2 = 0.0;
    double intercept = 0.0;
    int j_min = 0;
    int j_max = 0;
    std::vector<int> js;
    std::vector<double> log2_sups;
    std::vector<double> fitted;
};

inline constexpr double regression_floor = 1e-13;

/// Least-squares fit of log2 |Delta_j f| against j on [j_min, j_max]; blocks
/// under the floor (relative to the largest block) are skipped.
RegularityEstimate estimate_regularity(const Field& f, int j_min, int j_max);
/// Default window [1, J - 2].
RegularityEstimate estimate_regularity(const Field& f);
RegularityEstimate estimate_from_sups(const std::vector<double>& block_sups, int j_min, int j_max);

std::string estimate_csv(const RegularityEstimate& e);
std::string decomposition_csv(const DyadicDecomposition& d);

}  // namespace paracalc
