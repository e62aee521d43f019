#include "paracalc/correctors.hpp"

#include <cmath>
#include <numbers>

namespace paracalc {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

Field zero_like(const Field& f) { return Field(f.grid()); }
SpaceTimeField zero_like(const SpaceTimeField& f) { return SpaceTimeField::zeros(f.grid(), f.steps(), f.dt()); }

Field trig_like(const Field& like, int axis, bool sine)
{
    return Field::from_function(like.grid(), [axis, sine](double x, double y) {
        const double t = two_pi * (axis == 0 ? x : y);
        return sine ? std::sin(t) : std::cos(t);
    });
}
SpaceTimeField trig_like(const SpaceTimeField& like, int axis, bool sine)
{
    return broadcast(trig_like(like.slice(0), axis, sine), like);
}

Field grad(const Field& f, int axis) { return partial(f, axis); }
SpaceTimeField grad(const SpaceTimeField& f, int axis)
{
    return map_slices(f, [axis](const Field& s) { return partial(s, axis); });
}

/// sum_i d_i g(x) Op(s(. - x_i))(x), with s(x' - x) = (sin x' cos x - cos x' sin x)/(2 pi).
template <class F, class Op>
F taylor_compensation(const F& g, const Op& op_of)
{
    F out = zero_like(g);
    for (int axis = 0; axis < g.grid().dim; ++axis) {
        const F s = trig_like(g, axis, true), c = trig_like(g, axis, false);
        const F w = product(c, op_of(s)) - product(s, op_of(c));
        out += (1.0 / two_pi) * product(grad(g, axis), w);
    }
    return out;
}

/// Either L or V_i, applied to F.
template <class F>
struct Derivation {
    const OperatorL& op;
    int axis;  // -1 selects L
    F operator()(const F& f) const { return axis < 0 ? apply_L(f, op) : apply_V(f, op, axis); }
};

template <class F>
F cl_generic(CLVariant v, const Derivation<F>& D, const F& x, const F& y, const F& z)
{
    const OperatorL& op = D.op;
    switch (v) {
    case CLVariant::low:
        return para(D(para_tilde(x, y, op)), z) - product(x, para(D(y), z));
    case CLVariant::high: {
        const F dx = D(x);
        return para(dx, para_tilde(y, z, op)) - product(y, para(dx, z));
    }
    case CLVariant::resonant:
        return resonant(D(para_tilde(x, y, op)), z) - product(x, resonant(D(y), z));
    }
    fail(ErrorKind::internal, "unknown corrector variant");
}

template <class F>
F l_depth1(const F& a, const F& b, const OperatorL& op)
{
    return apply_L(para_tilde(a, b, op), op) - para(a, apply_L(b, op));
}

template <class F>
F l_nested(const std::vector<F>& a, std::size_t first, const F& b, const OperatorL& op)
{
    const std::size_t depth = a.size() - first;
    if (depth == 1) return l_depth1(a[first], b, op);
    std::vector<F> merged(a.begin() + std::ptrdiff_t(first), a.end());
    merged[1] = para(a[first], a[first + 1]);
    merged.erase(merged.begin());
    return l_nested(merged, 0, b, op) - para(a[first], l_nested(a, first + 1, b, op));
}

template <class F>
F v_depth1(int axis, const F& a, const F& b, const OperatorL& op)
{
    return apply_V(para_tilde(a, b, op), op, axis) - para(a, apply_V(b, op, axis));
}

template <class F>
void check_axis(const F& f, int axis)
{
    require(axis >= 0 && axis < f.grid().dim, ErrorKind::domain, "axis outside the grid dimension");
}

}  // namespace

template <class F>
F corrector_c(const F& a, const F& b, const F& c, const OperatorL& op)
{
    return resonant(para_tilde(a, b, op), c) - product(a, resonant(b, c));
}

template <class F>
F corrector_c_iterated(const F& a1, const F& a2, const F& b, const F& c, const OperatorL& op)
{
    return corrector_c(para_tilde(a1, a2, op), b, c, op) - product(a1, corrector_c(a2, b, c, op));
}

template <class F>
F corrector_c_refined(const F& a, const F& b, const F& c, const OperatorL& op)
{
    return corrector_c(a, b, c, op) -
           taylor_compensation(a, [&](const F& w) { return resonant(para_tilde(w, b, op), c); });
}

template <class F>
F commutator_d(const F& a, const F& b, const F& c, const OperatorL& op)
{
    return resonant(para_tilde(a, b, op), c) - para(a, resonant(b, c));
}

template <class F>
F merge_r(const F& a, const F& b, const F& c, const OperatorL& op)
{
    return para(a, para_tilde(b, c, op)) - para(product(a, b), c);
}

template <class F>
F merge_r_circ(const F& a, const F& b, const F& c)
{
    return para(a, para(b, c)) - para(product(a, b), c);
}

template <class F>
F iterated_r_circ(RCircVariant v, const F& x1, const F& x2, const F& x3, const F& x4, const OperatorL& op)
{
    if (v == RCircVariant::expand_first)
        return merge_r_circ(para_tilde(x1, x2, op), x3, x4) - para(x1, merge_r_circ(x2, x3, x4));
    return merge_r_circ(x1, para_tilde(x2, x3, op), x4) - merge_r_circ(product(x1, x2), x3, x4);
}

template <class F>
F corrector_cl(CLVariant v, const F& x, const F& y, const F& z, const OperatorL& op)
{
    return cl_generic(v, Derivation<F>{op, -1}, x, y, z);
}

template <class F>
F corrector_cl_refined(CLVariant v, const F& x, const F& y, const F& z, const OperatorL& op)
{
    const F base = corrector_cl(v, x, y, z, op);
    switch (v) {
    case CLVariant::low:
        return base - taylor_compensation(x, [&](const F& w) { return para(apply_L(para_tilde(w, y, op), op), z); });
    case CLVariant::high: {
        const F lx = apply_L(x, op);
        return base - taylor_compensation(y, [&](const F& w) { return para(lx, para_tilde(w, z, op)); });
    }
    case CLVariant::resonant:
        return base -
               taylor_compensation(x, [&](const F& w) { return resonant(apply_L(para_tilde(w, y, op), op), z); });
    }
    fail(ErrorKind::internal, "unknown corrector variant");
}

template <class F>
F corrector_cv(CLVariant v, int axis, const F& x, const F& y, const F& z, const OperatorL& op)
{
    check_axis(x, axis);
    return cl_generic(v, Derivation<F>{op, axis}, x, y, z);
}

template <class F>
F commutator_l(const std::vector<F>& a, const F& b, const OperatorL& op)
{
    require(a.size() >= 1 && a.size() <= 3, ErrorKind::domain, "commutator L: depth must be 1, 2 or 3");
    return l_nested(a, 0, b, op);
}

template <class F>
F commutator_l_refined(const F& a, const F& b, const OperatorL& op)
{
    const F lb = apply_L(b, op);
    F out = l_depth1(a, b, op);
    for (int axis = 0; axis < a.grid().dim; ++axis) {
        const F s = trig_like(a, axis, true), c = trig_like(a, axis, false);
        const F g = grad(a, axis);
        out -= (1.0 / two_pi) * (para(product(g, c), para_tilde(s, lb, op)) - para(product(g, s), para_tilde(c, lb, op)));
    }
    return out;
}

template <class F>
F commutator_v(int axis, const std::vector<F>& a, const F& b, const OperatorL& op)
{
    require(a.size() == 1 || a.size() == 2, ErrorKind::domain, "commutator V: depth must be 1 or 2");
    check_axis(b, axis);
    if (a.size() == 1) return v_depth1(axis, a[0], b, op);
    return v_depth1(axis, para_tilde(a[0], a[1], op), b, op) - para(a[0], v_depth1(axis, a[1], b, op));
}

#define PARACALC_INSTANTIATE(F)                                                                                 \
    template F corrector_c<F>(const F&, const F&, const F&, const OperatorL&);                                  \
    template F corrector_c_iterated<F>(const F&, const F&, const F&, const F&, const OperatorL&);                \
    template F corrector_c_refined<F>(const F&, const F&, const F&, const OperatorL&);                          \
    template F commutator_d<F>(const F&, const F&, const F&, const OperatorL&);                                 \
    template F merge_r<F>(const F&, const F&, const F&, const OperatorL&);                                      \
    template F merge_r_circ<F>(const F&, const F&, const F&);                                                   \
    template F iterated_r_circ<F>(RCircVariant, const F&, const F&, const F&, const F&, const OperatorL&);      \
    template F corrector_cl<F>(CLVariant, const F&, const F&, const F&, const OperatorL&);                      \
    template F corrector_cl_refined<F>(CLVariant, const F&, const F&, const F&, const OperatorL&);              \
    template F corrector_cv<F>(CLVariant, int, const F&, const F&, const F&, const OperatorL&);                 \
    template F commutator_l<F>(const std::vector<F>&, const F&, const OperatorL&);                              \
    template F commutator_l_refined<F>(const F&, const F&, const OperatorL&);                                   \
    template F commutator_v<F>(int, const std::vector<F>&, const F&, const OperatorL&);

PARACALC_INSTANTIATE(Field)
PARACALC_INSTANTIATE(SpaceTimeField)
#undef PARACALC_INSTANTIATE

// ---- expansion ----

Field compose(const ScalarMap& map, int derivative, const Field& u)
{
    require(derivative >= 0 && derivative <= 3, ErrorKind::domain, "compose: derivative order must be 0..3");
    const auto& fn = derivative == 0 ? map.f : derivative == 1 ? map.d1 : derivative == 2 ? map.d2 : map.d3;
    require(bool(fn), ErrorKind::configuration, "compose: missing derivative closure");
    auto padded = pad_field(u);
    for (auto& x : padded) x = fn(x);
    return truncate_padded(u.grid(), padded);
}

ExpansionResult paracontrolled_expansion(const ScalarMap& map, const Field& u, const Field& v)
{
    require(map.complete(), ErrorKind::configuration, "paracontrolled expansion: f, f', f'', f''' are all required");
    check_same_grid(u.grid(), v.grid(), "paracontrolled expansion");
    const Field f0 = compose(map, 0, u), f1 = compose(map, 1, u), f2 = compose(map, 2, u), f3 = compose(map, 3, u);
    const Field u2 = product(u, u), u3 = product(u2, u);
    const Field uv = product(u, v), u2v = product(u2, v);
    ExpansionResult r;
    r.terms.push_back(para(product(f1, v), u));
    r.terms.push_back(0.5 * para(product(f2, v), u2));
    r.terms.push_back(-1.0 * para(product(f2, uv), u));
    r.terms.push_back((1.0 / 6.0) * para(product(f3, v), u3));
    r.terms.push_back(-0.5 * para(product(f3, uv), u2));
    r.terms.push_back(0.5 * para(product(f3, u2v), u));
    r.remainder = product(f0, v);
    for (const auto& t : r.terms) r.remainder -= t;
    return r;
}

}  // namespace paracalc
