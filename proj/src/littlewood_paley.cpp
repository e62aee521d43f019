#include "paracalc/littlewood_paley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace paracalc {

namespace {

/// C-infinity transition: 1 for r <= 1, 0 for r >= 2.
double smooth_step_down(double r)
{
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double s = r - 1.0;
    const double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
    return b / (a + b);
}

/// Symbol of S_j in smooth mode.
double smooth_low(int j, const Freq& k)
{
    if (j < -1) return 0.0;
    if (j == -1) return k.max_norm() == 0 ? 1.0 : 0.0;
    return smooth_step_down(double(k.max_norm()) / std::ldexp(1.0, j));
}

}  // namespace

int block_of(const Freq& k)
{
    const int m = k.max_norm();
    if (m == 0) return -1;
    return int(std::bit_width(unsigned(m - 1)));
}

double block_weight(Cutoff cutoff, int j, const Freq& k)
{
    if (cutoff == Cutoff::sharp) return block_of(k) == j ? 1.0 : 0.0;
    return smooth_low(j, k) - smooth_low(j - 1, k);
}

Field DyadicDecomposition::reconstruct() const
{
    Field out(blocks.front().grid());
    for (const auto& b : blocks) out += b;
    return out;
}

DyadicDecomposition decompose(const Field& f, Cutoff cutoff)
{
    DyadicDecomposition d;
    d.jmax = f.grid().jmax();
    const Spectrum& s = f.spectrum();
    for (int j = -1; j <= d.jmax; ++j) {
        Field b = inverse(apply_multiplier(s, [&](const Freq& k) { return block_weight(cutoff, j, k); }));
        d.block_sups.push_back(b.sup_norm());
        d.blocks.push_back(std::move(b));
    }
    return d;
}

Field block(const Field& f, int j, Cutoff cutoff)
{
    return apply_multiplier(f, [&](const Freq& k) { return block_weight(cutoff, j, k); });
}

Field low_pass(const Field& f, int j)
{
    return apply_multiplier(f, [&](const Freq& k) { return block_of(k) <= j ? 1.0 : 0.0; });
}

double besov_norm(const Field& f, double alpha, Cutoff cutoff)
{
    require(alpha > -3.0 && alpha < 3.0, ErrorKind::domain, "besov norm: alpha must lie in (-3,3)");
    auto d = decompose(f, cutoff);
    double m = 0.0;
    for (int j = -1; j <= d.jmax; ++j) m = std::max(m, std::pow(2.0, j * alpha) * d.sup(j));
    return m;
}

double besov_norm(const SpaceTimeField& f, double alpha)
{
    double m = 0.0;
    for (const auto& s : f.slices()) m = std::max(m, besov_norm(s, alpha));
    return m;
}

double parabolic_norm(const SpaceTimeField& f, double alpha)
{
    double hoelder = 0.0;
    if (alpha > 0.0) {
        for (int a = 0; a <= f.steps(); ++a)
            for (int b = a + 1; b <= f.steps(); ++b) {
                double dt = f.time(b) - f.time(a);
                hoelder = std::max(hoelder, (f.slice(b) - f.slice(a)).sup_norm() / std::pow(dt, alpha / 2.0));
            }
    }
    return besov_norm(f, alpha) + hoelder;
}

RegularityEstimate estimate_from_sups(const std::vector<double>& block_sups, int j_min, int j_max)
{
    const int jmax_avail = int(block_sups.size()) - 2;
    require(j_min >= -1 && j_max <= jmax_avail && j_max - j_min >= 3, ErrorKind::configuration,
            "regularity window must hold at least 4 blocks inside [-1, J]");
    double top = 0.0;
    for (int j = j_min; j <= j_max; ++j) top = std::max(top, block_sups[std::size_t(j + 1)]);
    RegularityEstimate e;
    e.j_min = j_min;
    e.j_max = j_max;
    for (int j = j_min; j <= j_max; ++j) {
        double s = block_sups[std::size_t(j + 1)];
        if (s > regression_floor * top && s > 0.0) {
            e.js.push_back(j);
            e.log2_sups.push_back(std::log2(s));
        }
    }
    require(e.js.size() >= 4, ErrorKind::degenerate_input,
            "regularity estimate: fewer than 4 usable blocks above the floor");
    const double n = double(e.js.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < e.js.size(); ++i) mx += e.js[i], my += e.log2_sups[i];
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < e.js.size(); ++i) {
        double dx = e.js[i] - mx, dy = e.log2_sups[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double slope = sxy / sxx;
    e.alpha = -slope;
    e.intercept = my - slope * mx;
    e.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    for (int j : e.js) e.fitted.push_back(e.intercept + slope * j);
    return e;
}

RegularityEstimate estimate_regularity(const Field& f, int j_min, int j_max)
{
    return estimate_from_sups(decompose(f).block_sups, j_min, j_max);
}

RegularityEstimate estimate_regularity(const Field& f)
{
    return estimate_regularity(f, 1, f.grid().jmax() - 2);
}

std::string estimate_csv(const RegularityEstimate& e)
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "j,log2_block_sup,fitted_line,alpha,r2\n";
    for (std::size_t i = 0; i < e.js.size(); ++i)
        os << e.js[i] << ',' << e.log2_sups[i] << ',' << e.fitted[i] << ',' << e.alpha << ',' << e.r2 << '\n';
    return os.str();
}

std::string decomposition_csv(const DyadicDecomposition& d)
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "j,block_sup,log2_block_sup\n";
    for (int j = -1; j <= d.jmax; ++j) {
        double s = d.sup(j);
        os << j << ',' << s << ',';
        if (s > 0.0) os << std::log2(s);
        else os << "-inf";
        os << '\n';
    }
    return os.str();
}

}  // namespace paracalc
