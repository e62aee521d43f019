#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "paracalc/paraproducts.hpp"

namespace paracalc {

// Every operator below is a literal composition of para, resonant, para_tilde,
// the de-aliased product and the spectral L / V_i. They are instantiated for
// Field (time-constant data, elliptic P~) and SpaceTimeField (Duhamel P~).
//
// Refined operators subtract a first-order Taylor compensation: the weight
// x' - x is carried by the periodic surrogate s(x' - x) with s(y) = sin(2 pi y)/(2 pi),
// which splits exactly into cos/sin factors in x and x'.

enum class CLVariant { low, high, resonant };
enum class RCircVariant { expand_first, expand_second };

/// C(a,b,c) = Pi(P~_a b, c) - a Pi(b, c).
template <class F>
F corrector_c(const F& a, const F& b, const F& c, const OperatorL& op);
/// C((a1,a2),b,c) = C(P~_{a1} a2, b, c) - a1 C(a2, b, c).
template <class F>
F corrector_c_iterated(const F& a1, const F& a2, const F& b, const F& c, const OperatorL& op);
/// C_(1)(a,b,c)(e) = C(a,b,c)(e) - sum_i d_i a(e) Pi(P~_{s(. - x_i)} b, c)(e).
template <class F>
F corrector_c_refined(const F& a, const F& b, const F& c, const OperatorL& op);

/// D(a,b,c) = Pi(P~_a b, c) - P_a Pi(b, c).
template <class F>
F commutator_d(const F& a, const F& b, const F& c, const OperatorL& op);
/// R(a,b,c) = P_a P~_b c - P_{ab} c.
template <class F>
F merge_r(const F& a, const F& b, const F& c, const OperatorL& op);
/// R°(a,b,c) = P_a P_b c - P_{ab} c.
template <class F>
F merge_r_circ(const F& a, const F& b, const F& c);
/// expand_first:  R°((x1,x2),x3,x4) = R°(P~_{x1} x2, x3, x4) - P_{x1} R°(x2, x3, x4)
/// expand_second: R°(x1,(x2,x3),x4) = R°(x1, P~_{x2} x3, x4) - R°(x1 x2, x3, x4)
template <class F>
F iterated_r_circ(RCircVariant v, const F& x1, const F& x2, const F& x3, const F& x4, const OperatorL& op);

/// low:      C_L^<((x,y),z) = P_{L P~_x y} z - x P_{L y} z
/// high:     C_L^>(x,(y,z)) = P_{L x}(P~_y z) - y P_{L x} z
/// resonant: C_L((x,y),z)   = Pi(L P~_x y, z) - x Pi(L y, z)
template <class F>
F corrector_cl(CLVariant v, const F& x, const F& y, const F& z, const OperatorL& op);
/// C_L family minus the gradient compensation of the first argument
/// (of y for the high variant).
template <class F>
F corrector_cl_refined(CLVariant v, const F& x, const F& y, const F& z, const OperatorL& op);
/// C_{V_i} family: the C_L formulas with V_i = sqrt(c0) d_i in place of L.
template <class F>
F corrector_cv(CLVariant v, int axis, const F& x, const F& y, const F& z, const OperatorL& op);

/// L(a,b) = L P~_a b - P_a L b for a.size() == 1; deeper nestings
/// L((a1,a2),b) = L(P_{a1} a2, b) - P_{a1} L(a2, b) and
/// L(((a1,a2),a3),b) = L((P_{a1} a2, a3), b) - P_{a1} L((a2,a3), b).
template <class F>
F commutator_l(const std::vector<F>& a, const F& b, const OperatorL& op);
/// L_(1)(a,b) = L(a,b) - sum_i P^(i)_{d_i a} L b with
/// P^(i)_g h = (P_{g cos}(P~_{sin} h) - P_{g sin}(P~_{cos} h)) / (2 pi) (trig factors in x_i).
template <class F>
F commutator_l_refined(const F& a, const F& b, const OperatorL& op);
/// V_i(a,b) = V_i P~_a b - P_a V_i b; depth 2: V_i(P~_{a1} a2, b) - P_{a1} V_i(a2, b).
template <class F>
F commutator_v(int axis, const std::vector<F>& a, const F& b, const OperatorL& op);

/// f with its first three derivatives.
struct ScalarMap {
    std::function<double(double)> f, d1, d2, d3;
    bool complete() const { return f && d1 && d2 && d3; }
};

/// f(u) evaluated on the padded grid and projected back to the band.
Field compose(const ScalarMap& map, int derivative, const Field& u);

struct ExpansionResult {
    std::vector<Field> terms;  // six paraproduct terms in display order, coefficients included
    Field remainder;           // f(u) v - sum(terms)
};

/// Third-order paracontrolled expansion of f(u) v.
ExpansionResult paracontrolled_expansion(const ScalarMap& map, const Field& u, const Field& v);

// ---- regularity-gain harness ----

struct OperatorInfo {
    std::string id;
    std::vector<std::string> slots;  // input names, in argument order
    std::string statement;           // the continuity claim being checked
    int order = 0;                   // derivatives applied inside (2 for L-based, 1 for V-based)
};

/// Catalogue of operator ids accepted by regularity_gain_report.
const std::vector<OperatorInfo>& operator_catalogue();
const OperatorInfo& operator_info(const std::string& id);

/// Applies a catalogue operator to time-constant inputs (elliptic P~).
Field apply_catalogue_operator(const std::string& id, const std::vector<Field>& inputs, const OperatorL& op);

/// Predicted output exponent, or the violated hypothesis.
struct Prediction {
    std::optional<double> exponent;
    std::string violated;  // empty when hypotheses hold
};
Prediction predict_exponent(const std::string& id, const std::vector<double>& exponents);

struct HarnessConfig {
    int n = 8192;          // 1d grid size
    int window_lo = -6;    // window [J + lo, J + hi]
    int window_hi = -1;
    double tolerance = 0.15;
    double c0 = 1.0;
    int modes_per_block = 1;
    double offset = 4.0;  // constant added to every synthetic input
};

struct TrialResult {
    std::uint64_t seed = 0;
    std::vector<double> input_exponents_measured;
    std::optional<double> measured;  // empty when the output has no resolvable block above the floor
    double r2 = 0.0;
    std::optional<double> unrefined_measured;  // A/B partner for refined operators
};

struct GainReport {
    std::string op_id;
    std::vector<double> exponents;
    std::string hypotheses;  // "ok" or the violated condition
    std::optional<double> predicted;
    std::vector<TrialResult> trials;
    double mean = 0.0, spread = 0.0;  // over resolved trials
    int unresolved = 0;               // trials whose output is at the roundoff floor
    std::optional<double> unrefined_mean;
    std::string verdict;  // pass | fail | hypothesis-violated
    HarnessConfig config;
};

/// Synthetic inputs of the given exponents: jittered lacunary series plus a constant offset.
std::vector<Field> synthetic_inputs(const SpaceGrid& g, const std::vector<double>& exponents, std::uint64_t seed,
                                    int modes_per_block = 1, double offset = 4.0);

GainReport regularity_gain_report(const std::string& op_id, const std::vector<double>& exponents, std::uint64_t seed,
                                  int trials, const HarnessConfig& cfg = {});
std::string report_json(const GainReport& r);

}  // namespace paracalc
