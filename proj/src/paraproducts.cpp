#include "paracalc/paraproducts.hpp"

#include <cmath>

#include "paracalc/fft.hpp"

namespace paracalc {

namespace {

std::size_t padded_size(const SpaceGrid& g) { return g.dim == 1 ? std::size_t(2 * g.n) : std::size_t(4 * g.n * g.n); }

/// Scatter selected coefficients of an N-grid spectrum onto the 2N grid.
std::vector<cplx> scatter_padded(const Spectrum& s, const std::function<bool(const Freq&)>& keep)
{
    const SpaceGrid& g = s.grid;
    const int n2 = 2 * g.n, half = g.n / 2;
    std::vector<cplx> out(padded_size(g));
    auto wrap = [n2](int k) { return k >= 0 ? k : n2 + k; };
    for (std::size_t idx = 0; idx < s.coeffs.size(); ++idx) {
        const Freq f = freq_at(g, idx);
        if (!keep(f)) continue;
        const cplx c = s.coeffs[idx];
        if (c == cplx(0.0, 0.0)) continue;
        // Nyquist components are split between +N/2 and -N/2.
        int targets0[2] = {f.k[0], -half}, targets1[2] = {f.k[1], -half};
        const int c0 = f.k[0] == half ? 2 : 1;
        const int c1 = (g.dim == 2 && f.k[1] == half) ? 2 : 1;
        const double w = 1.0 / double(c0 * c1);
        for (int a = 0; a < c0; ++a) {
            if (g.dim == 1) {
                out[std::size_t(wrap(targets0[a]))] += w * c;
                continue;
            }
            for (int b = 0; b < c1; ++b)
                out[std::size_t(wrap(targets0[a])) * n2 + std::size_t(wrap(targets1[b]))] += w * c;
        }
    }
    return out;
}

std::vector<double> to_physical_padded(const SpaceGrid& g, std::vector<cplx> coeffs)
{
    fft::transform(coeffs, g.dim, 2 * g.n, +1);
    std::vector<double> v(coeffs.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = coeffs[i].real();
    return v;
}

void add_product(std::vector<double>& acc, const std::vector<double>& x, const std::vector<double>& y)
{
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i] * y[i];
}

}  // namespace

std::vector<double> pad_field(const Field& f)
{
    return to_physical_padded(f.grid(), scatter_padded(f.spectrum(), [](const Freq&) { return true; }));
}

PaddedBlocks padded_blocks(const Field& f)
{
    PaddedBlocks pb;
    pb.grid = f.grid();
    pb.padded_n = 2 * f.grid().n;
    const Spectrum& s = f.spectrum();
    for (int j = -1; j <= f.grid().jmax(); ++j)
        pb.blocks.push_back(to_physical_padded(f.grid(), scatter_padded(s, [j](const Freq& k) { return block_of(k) == j; })));
    return pb;
}

Field truncate_padded(const SpaceGrid& g, const std::vector<double>& padded)
{
    const int n = g.n, n2 = 2 * g.n, half = g.n / 2;
    std::vector<cplx> c(padded.size());
    for (std::size_t i = 0; i < padded.size(); ++i) c[i] = cplx(padded[i], 0.0);
    fft::forward_normalized(c, g.dim, n2);
    Spectrum s{g, std::vector<cplx>(g.size())};
    auto freq2 = [n2](int i) { return i <= n2 / 2 ? i : i - n2; };
    auto fold = [n](int k) { return ((k % n) + n) % n; };
    if (g.dim == 1) {
        for (int i = 0; i < n2; ++i) {
            const int k = freq2(i);
            if (std::abs(k) > half) continue;
            s.coeffs[std::size_t(fold(k))] += c[std::size_t(i)];
        }
    } else {
        for (int i0 = 0; i0 < n2; ++i0) {
            const int k0 = freq2(i0);
            if (std::abs(k0) > half) continue;
            for (int i1 = 0; i1 < n2; ++i1) {
                const int k1 = freq2(i1);
                if (std::abs(k1) > half) continue;
                s.coeffs[std::size_t(fold(k0)) * n + std::size_t(fold(k1))] += c[std::size_t(i0) * n2 + i1];
            }
        }
    }
    return inverse(s);
}

Field block_bilinear(const Field& a, const Field& b, const std::function<bool(int, int)>& accept)
{
    check_same_grid(a.grid(), b.grid(), "block bilinear");
    auto pa = padded_blocks(a);
    auto pb = padded_blocks(b);
    std::vector<double> acc(padded_size(a.grid()), 0.0);
    for (int i = -1; i <= pa.jmax(); ++i)
        for (int j = -1; j <= pb.jmax(); ++j)
            if (accept(i, j)) add_product(acc, pa.block(i), pb.block(j));
    return truncate_padded(a.grid(), acc);
}

Field product(const Field& a, const Field& b)
{
    check_same_grid(a.grid(), b.grid(), "product");
    auto x = pad_field(a);
    auto y = pad_field(b);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= y[i];
    return truncate_padded(a.grid(), x);
}

namespace {

std::vector<double> para_padded(const PaddedBlocks& a, const PaddedBlocks& b)
{
    const std::size_t sz = a.blocks.front().size();
    std::vector<double> acc(sz, 0.0), low(sz, 0.0);
    // low holds S_{j-2} a when block j of b is visited
    for (int j = 1; j <= b.jmax(); ++j) {
        const auto& add = a.block(j - 2);
        for (std::size_t i = 0; i < sz; ++i) low[i] += add[i];
        add_product(acc, low, b.block(j));
    }
    return acc;
}

std::vector<double> resonant_padded(const PaddedBlocks& a, const PaddedBlocks& b)
{
    const std::size_t sz = a.blocks.front().size();
    std::vector<double> acc(sz, 0.0), near(sz);
    const int jm = a.jmax();
    for (int i = -1; i <= jm; ++i) {
        std::fill(near.begin(), near.end(), 0.0);
        for (int j = std::max(-1, i - 1); j <= std::min(jm, i + 1); ++j) {
            const auto& bj = b.block(j);
            for (std::size_t p = 0; p < sz; ++p) near[p] += bj[p];
        }
        add_product(acc, a.block(i), near);
    }
    return acc;
}

}  // namespace

Field para(const Field& a, const Field& b)
{
    check_same_grid(a.grid(), b.grid(), "para");
    return truncate_padded(a.grid(), para_padded(padded_blocks(a), padded_blocks(b)));
}

Field resonant(const Field& a, const Field& b)
{
    check_same_grid(a.grid(), b.grid(), "resonant");
    return truncate_padded(a.grid(), resonant_padded(padded_blocks(a), padded_blocks(b)));
}

ProductParts decompose_product(const Field& a, const Field& b)
{
    check_same_grid(a.grid(), b.grid(), "decompose product");
    auto pa = padded_blocks(a);
    auto pb = padded_blocks(b);
    return ProductParts{truncate_padded(a.grid(), para_padded(pa, pb)),
                        truncate_padded(a.grid(), resonant_padded(pa, pb)),
                        truncate_padded(a.grid(), para_padded(pb, pa))};
}

SemigroupParts semigroup_para(const Field& a, const Field& b, const OperatorL& op, int b_order, int t_levels,
                              double t_min)
{
    op.require_constant("semigroup paraproduct");
    check_same_grid(a.grid(), b.grid(), "semigroup paraproduct");
    require(t_levels >= 8, ErrorKind::configuration, "semigroup paraproduct: t_levels must be >= 8");
    require(t_min > 0.0 && t_min < 1.0, ErrorKind::domain, "semigroup paraproduct: t_min must lie in (0,1)");
    require(b_order >= 1, ErrorKind::domain, "semigroup paraproduct: order must be >= 1");
    const SpaceGrid& g = a.grid();
    SemigroupParts parts{Field(g), Field(g), Field(g), Field(g)};
    // trapezoid in s = log t on [log t_min, 0]
    const double s0 = std::log(t_min);
    const double ds = -s0 / double(t_levels - 1);
    for (int l = 0; l < t_levels; ++l) {
        const double t = std::exp(s0 + l * ds);
        const double w = (l == 0 || l == t_levels - 1) ? 0.5 * ds : ds;
        const Field pa = heat_operator(a, op, t, b_order, HeatKind::P);
        const Field pb = heat_operator(b, op, t, b_order, HeatKind::P);
        const Field qa = heat_operator(a, op, t, b_order, HeatKind::Q);
        const Field qb = heat_operator(b, op, t, b_order, HeatKind::Q);
        parts.q_pp += w * heat_operator(product(pa, pb), op, t, b_order, HeatKind::Q);
        parts.p_qp += w * heat_operator(product(qa, pb), op, t, b_order, HeatKind::P);
        parts.p_pq += w * heat_operator(product(pa, qb), op, t, b_order, HeatKind::P);
    }
    const Field p1a = heat_operator(a, op, 1.0, b_order, HeatKind::P);
    const Field p1b = heat_operator(b, op, 1.0, b_order, HeatKind::P);
    parts.smooth = heat_operator(product(p1a, p1b), op, 1.0, b_order, HeatKind::P);
    return parts;
}

Field para_tilde(const Field& a, const Field& b, const OperatorL& op)
{
    return apply_L_inverse(para(a, apply_L(b, op)), op);
}

SpaceTimeField product(const SpaceTimeField& a, const SpaceTimeField& b)
{
    return zip_slices(a, b, [](const Field& x, const Field& y) { return product(x, y); });
}

SpaceTimeField para(const SpaceTimeField& a, const SpaceTimeField& b)
{
    return zip_slices(a, b, [](const Field& x, const Field& y) { return para(x, y); });
}

SpaceTimeField resonant(const SpaceTimeField& a, const SpaceTimeField& b)
{
    return zip_slices(a, b, [](const Field& x, const Field& y) { return resonant(x, y); });
}

SpaceTimeField para_tilde(const SpaceTimeField& a, const SpaceTimeField& b, const OperatorL& op)
{
    check_same_time_grid(a, b, "para tilde");
    return duhamel_inverse(para(a, apply_parabolic(b, op)), op);
}

SpaceTimeField broadcast(const Field& f, const SpaceTimeField& like)
{
    return SpaceTimeField::constant_in_time(f, like.steps(), like.dt());
}

}  // namespace paracalc
