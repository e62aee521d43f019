#include "paracalc/qpam_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "paracalc/errors.hpp"
#include "paracalc/littlewood_paley.hpp"
#include "paracalc/parallel.hpp"

namespace paracalc {

using nlohmann::json;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

SpaceTimeField compose_stf(const ScalarMap& m, int k, const SpaceTimeField& u)
{
    return map_slices(u, [&](const Field& x) { return compose(m, k, x); });
}

Field lp_field(const Field& f, const OperatorL& op) { return -apply_L(f, op); }

bool known_family(const std::string& f)
{
    return f == "constant" || f == "affine" || f == "sine" || f == "tanh";
}

}  // namespace

// ---- problem specification ----

ScalarMap ClosureSpec::map() const
{
    const double a_ = a, b_ = b, w_ = w, ph = phase;
    if (family == "constant")
        return {[a_](double) { return a_; }, [](double) { return 0.0; }, [](double) { return 0.0; },
                [](double) { return 0.0; }};
    if (family == "affine")
        return {[a_, b_](double x) { return a_ + b_ * x; }, [b_](double) { return b_; }, [](double) { return 0.0; },
                [](double) { return 0.0; }};
    if (family == "sine")
        return {[=](double x) { return a_ + b_ * std::sin(w_ * x + ph); },
                [=](double x) { return b_ * w_ * std::cos(w_ * x + ph); },
                [=](double x) { return -b_ * w_ * w_ * std::sin(w_ * x + ph); },
                [=](double x) { return -b_ * w_ * w_ * w_ * std::cos(w_ * x + ph); }};
    if (family == "tanh") {
        auto th = [=](double x) { return std::tanh(w_ * x + ph); };
        return {[=](double x) { return a_ + b_ * th(x); },
                [=](double x) {
                    const double t = th(x);
                    return b_ * w_ * (1 - t * t);
                },
                [=](double x) {
                    const double t = th(x);
                    return -2.0 * b_ * w_ * w_ * t * (1 - t * t);
                },
                [=](double x) {
                    const double t = th(x);
                    return b_ * w_ * w_ * w_ * (1 - t * t) * (6 * t * t - 2);
                }};
    }
    fail(ErrorKind::configuration, "unknown closure family '" + family + "'");
}

Field InitialDataSpec::field(const SpaceGrid& g) const
{
    const double m = mean, a = amplitude;
    const int k = mode;
    return Field::from_function(g, [=](double x, double) { return m + a * std::cos(two_pi * k * x); });
}

void validate(const ProblemSpec& spec)
{
    auto need = [](bool c, const std::string& what) { require(c, ErrorKind::configuration, what); };
    need(spec.dim == 1 || spec.dim == 2, "grid.dim must be 1 or 2");
    need(spec.n >= 8 && (spec.n & (spec.n - 1)) == 0, "grid.n must be a power of two >= 8");
    need(spec.T > 0 && std::isfinite(spec.T), "time.T must be positive");
    need(spec.steps >= 2, "time.steps must be >= 2");
    need(spec.order >= 1 && spec.order <= 3, "order must be 1, 2 or 3");
    need(spec.chain_cap >= 0 && spec.chain_cap <= 2, "chain_cap must be 0, 1 or 2");
    need(known_family(spec.d.family), "unknown closure family for d: " + spec.d.family);
    need(known_family(spec.f.family), "unknown closure family for f: " + spec.f.family);
    need(spec.u0.mode >= 0 && 2 * spec.u0.mode < spec.n, "u0.mode must lie in the resolved band");
    need(spec.closeness_threshold > 0, "closeness_threshold must be positive");
    need(spec.solver.tol > 0 && spec.solver.max_iter >= 1, "solver.tol > 0 and solver.max_iter >= 1 required");
    need(spec.reference.substeps >= 1 && spec.reference.tolerance > 0,
         "reference.substeps >= 1 and reference.tolerance > 0 required");
    require(spec.alpha > 0.4 && spec.alpha < 0.5, ErrorKind::domain, "alpha must lie in (2/5, 1/2)");
    validate(spec.noise, spec.grid());
}

namespace {

void closure_from(const json& j, ClosureSpec& c)
{
    c.family = j.value("family", c.family);
    c.a = j.value("a", c.a);
    c.b = j.value("b", c.b);
    c.w = j.value("w", c.w);
    c.phase = j.value("phase", c.phase);
}

json closure_json(const ClosureSpec& c)
{
    return {{"family", c.family}, {"a", c.a}, {"b", c.b}, {"w", c.w}, {"phase", c.phase}};
}

}  // namespace

ProblemSpec problem_from_json(const std::string& text)
{
    ProblemSpec s;
    try {
        const json j = json::parse(text);
        if (j.contains("grid")) {
            s.dim = j["grid"].value("dim", s.dim);
            s.n = j["grid"].value("n", s.n);
        }
        if (j.contains("time")) {
            s.T = j["time"].value("T", s.T);
            s.steps = j["time"].value("steps", s.steps);
        }
        s.alpha = j.value("alpha", s.alpha);
        s.order = j.value("order", s.order);
        s.chain_cap = j.value("chain_cap", s.chain_cap);
        if (j.contains("noise")) {
            const json& n = j["noise"];
            s.noise.seed = n.value("seed", s.noise.seed);
            s.noise.mol = n.value("mol", s.noise.mol);
            s.noise.amplitude = n.value("amplitude", s.noise.amplitude);
            s.noise.time_dependent = n.value("time_dependent", s.noise.time_dependent);
            s.noise.time_modes = n.value("time_modes", s.noise.time_modes);
        }
        if (j.contains("d")) closure_from(j["d"], s.d);
        if (j.contains("f")) closure_from(j["f"], s.f);
        if (j.contains("u0")) {
            s.u0.mean = j["u0"].value("mean", s.u0.mean);
            s.u0.amplitude = j["u0"].value("amplitude", s.u0.amplitude);
            s.u0.mode = j["u0"].value("mode", s.u0.mode);
        }
        s.quasilinear = j.value("quasilinear", s.quasilinear);
        s.closeness_threshold = j.value("closeness_threshold", s.closeness_threshold);
        if (j.contains("solver")) {
            s.solver.tol = j["solver"].value("tol", s.solver.tol);
            s.solver.max_iter = j["solver"].value("max_iter", s.solver.max_iter);
        }
        if (j.contains("reference")) {
            s.reference.substeps = j["reference"].value("substeps", s.reference.substeps);
            s.reference.tolerance = j["reference"].value("tolerance", s.reference.tolerance);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::configuration, std::string("problem config: ") + e.what());
    }
    validate(s);
    return s;
}

namespace {

json problem_json(const ProblemSpec& s)
{
    return {{"grid", {{"dim", s.dim}, {"n", s.n}}},
            {"time", {{"T", s.T}, {"steps", s.steps}}},
            {"alpha", s.alpha},
            {"order", s.order},
            {"chain_cap", s.chain_cap},
            {"noise",
             {{"seed", s.noise.seed},
              {"mol", s.noise.mol},
              {"amplitude", s.noise.amplitude},
              {"time_dependent", s.noise.time_dependent},
              {"time_modes", s.noise.time_modes}}},
            {"d", closure_json(s.d)},
            {"f", closure_json(s.f)},
            {"u0", {{"mean", s.u0.mean}, {"amplitude", s.u0.amplitude}, {"mode", s.u0.mode}}},
            {"quasilinear", s.quasilinear},
            {"closeness_threshold", s.closeness_threshold},
            {"solver", {{"tol", s.solver.tol}, {"max_iter", s.solver.max_iter}}},
            {"reference", {{"substeps", s.reference.substeps}, {"tolerance", s.reference.tolerance}}}};
}

}  // namespace

std::string problem_to_json(const ProblemSpec& spec) { return problem_json(spec).dump(2); }

Reformulation reformulate(const ProblemSpec& spec)
{
    validate(spec);
    Reformulation rf;
    const Field u0 = spec.u0.field(spec.grid());
    rf.ubar0 = u0.mean();
    rf.d = spec.d.map();
    rf.f = spec.f.map();
    rf.quasilinear = spec.quasilinear;

    const auto [lo_it, hi_it] = std::minmax_element(u0.values().begin(), u0.values().end());
    const double lo = *lo_it - 1.0, hi = *hi_it + 1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double x = lo + (hi - lo) * i / 1000.0;
        require(rf.d.f(x) > 0.0, ErrorKind::domain,
                "diffusion closure d must be positive on the range of u0 (widened by 1)");
    }
    rf.c0 = rf.d.f(rf.ubar0);
    rf.op = OperatorL::constant(rf.c0);

    if (spec.quasilinear) {
        const ScalarMap d = rf.d;
        const double c0 = rf.c0;
        rf.eps = {[d, c0](double x) { return d.f(x) / c0 - 1.0; }, [d, c0](double x) { return d.d1(x) / c0; },
                  [d, c0](double x) { return d.d2(x) / c0; }, [d, c0](double x) { return d.d3(x) / c0; }};
    } else {
        auto zero = [](double) { return 0.0; };
        rf.eps = {zero, zero, zero, zero};
    }

    rf.closeness = besov_norm(u0 - Field::constant(u0.grid(), rf.ubar0), 4.0 * spec.alpha);
    require(rf.closeness <= spec.closeness_threshold, ErrorKind::domain,
            "initial data too far from its mean: ||u0 - mean||_{C^{4 alpha}} = " + std::to_string(rf.closeness));
    return rf;
}

// ---- coefficient functions ----

namespace {

using MonoKey = std::tuple<char, int, std::vector<int>>;

Coefficient normalize(const Coefficient& in)
{
    std::map<MonoKey, double> acc;
    for (Monomial m : in) {
        std::sort(m.factors.begin(), m.factors.end());
        acc[{m.g, m.m, m.factors}] += m.c;
    }
    Coefficient out;
    for (const auto& [k, c] : acc)
        if (c != 0.0) out.push_back({c, std::get<0>(k), std::get<1>(k), std::get<2>(k)});
    return out;
}

Coefficient base_coefficient(const SystemLayout& L, int letter)
{
    const Alphabet& A = L.alphabet;
    const Letter& l = A.letters[std::size_t(letter)];
    auto w = [&](std::vector<int> ls) {
        const auto i = L.word_index(ls);
        require(i.has_value(), ErrorKind::internal, "coefficient table: missing word");
        return *i;
    };
    if (l.chain > 0) {
        const auto u = A.unchained(letter);
        require(u.has_value(), ErrorKind::internal, "coefficient table: chained letter without base");
        return {{1.0, 'E', 0, {L.letter_word(*u)}}};
    }
    const auto& ch = l.children;
    switch (l.kind) {
    case LetterKind::noise: return {{1.0, 'F', 0, {}}};
    case LetterKind::zeta1:
        if (ch.size() == 1) return {{1.0, 'F', 1, {w({ch[0]})}}};
        return {{1.0, 'F', 1, {w({ch[0], ch[1]})}}, {1.0, 'F', 2, {w({ch[0]}), w({ch[1]})}}};
    case LetterKind::zeta2_word: return {{1.0, 'E', 0, {w(ch)}}};
    case LetterKind::zeta2_sentence:
        if (ch.size() == 2) return {{1.0, 'E', 1, {w({ch[0]}), w({ch[1]})}}};
        return {{1.0, 'E', 2, {w({ch[0]}), w({ch[1]}), w({ch[2]})}}};
    default: return {};
    }
}

Coefficient derive(const SystemLayout& L, const Coefficient& h, int sigma)
{
    const Letter& s = L.alphabet.letters[std::size_t(sigma)];
    const int ws = L.letter_word(sigma);
    auto ext = [&](int word, int letter) {
        auto ls = L.words[std::size_t(word)].letters;
        ls.push_back(letter);
        return L.word_index(ls);
    };
    auto with = [](std::vector<int> f, std::initializer_list<int> extra) {
        f.insert(f.end(), extra);
        return f;
    };
    Coefficient out;
    for (const Monomial& mono : h) {
        const bool has_g = mono.g != '1';
        const auto& fs = mono.factors;
        if (has_g && mono.m + 1 <= 3) out.push_back({mono.c, mono.g, mono.m + 1, with(fs, {ws})});
        for (std::size_t i = 0; i < fs.size(); ++i)
            if (const auto e = ext(fs[i], sigma)) {
                auto f = fs;
                f[i] = *e;
                out.push_back({mono.c, mono.g, mono.m, f});
            }
        if (s.kind != LetterKind::resonant || s.chain != 0) continue;
        // second-order chain rule through the resonant product Pi(gamma, delta)
        const int ga = s.children[0], de = s.children[1];
        const bool same = ga == de;
        const int wg = L.letter_word(ga), wd = L.letter_word(de);
        if (has_g && mono.m + 2 <= 3) out.push_back({same ? 0.5 * mono.c : mono.c, mono.g, mono.m + 2, with(fs, {wg, wd})});
        for (std::size_t i = 0; i < fs.size(); ++i) {
            if (has_g && mono.m + 1 <= 3) {
                if (const auto e = ext(fs[i], de)) {
                    auto f = fs;
                    f[i] = *e;
                    out.push_back({mono.c, mono.g, mono.m + 1, with(f, {wg})});
                }
                if (!same)
                    if (const auto e = ext(fs[i], ga)) {
                        auto f = fs;
                        f[i] = *e;
                        out.push_back({mono.c, mono.g, mono.m + 1, with(f, {wd})});
                    }
            }
            for (std::size_t k = i + 1; k < fs.size(); ++k) {
                auto pair = [&](int x, int y) {
                    const auto ei = ext(fs[i], x), ek = ext(fs[k], y);
                    if (!ei || !ek) return;
                    auto f = fs;
                    f[i] = *ei;
                    f[k] = *ek;
                    out.push_back({mono.c, mono.g, mono.m, f});
                };
                pair(ga, de);
                if (!same) pair(de, ga);
            }
        }
    }
    return normalize(out);
}

}  // namespace

std::vector<Coefficient> coefficient_table(const SystemLayout& L)
{
    std::vector<Coefficient> table(std::size_t(L.word_count()));
    std::vector<int> order(table.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return L.words[std::size_t(a)].count() < L.words[std::size_t(b)].count(); });
    for (int w : order) {
        const Word& word = L.words[std::size_t(w)];
        if (word.empty()) continue;
        if (word.count() == 1) {
            table[std::size_t(w)] = normalize(base_coefficient(L, word.letters[0]));
            continue;
        }
        std::vector<int> prefix(word.letters.begin(), word.letters.end() - 1);
        const auto p = L.word_index(prefix);
        require(p.has_value(), ErrorKind::internal, "coefficient table: word without prefix");
        table[std::size_t(w)] = derive(L, table[std::size_t(*p)], word.letters.back());
    }
    return table;
}

std::string coefficient_label(const SystemLayout& L, const Coefficient& c)
{
    if (c.empty()) return "0";
    std::ostringstream os;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Monomial& m = c[i];
        if (i) os << " + ";
        if (m.c != 1.0) os << m.c << "*";
        bool first = true;
        if (m.g != '1') {
            os << m.g << m.m;
            first = false;
        }
        for (int f : m.factors) {
            os << (first ? "" : "*") << "u" << L.word_label(f);
            first = false;
        }
    }
    return os.str();
}

namespace {

/// Derivatives F^(m)(u), E^(m)(u) of the closures along a coefficient u.
template <class T>
struct Atoms {
    std::array<T, 4> F, E;
};

template <class T>
T compose_any(const ScalarMap& m, int k, const T& u);

template <>
Field compose_any(const ScalarMap& m, int k, const Field& u)
{
    return compose(m, k, u);
}

template <>
SpaceTimeField compose_any(const ScalarMap& m, int k, const SpaceTimeField& u)
{
    return compose_stf(m, k, u);
}

template <class T>
Atoms<T> make_atoms(const Reformulation& rf, const T& u)
{
    Atoms<T> a;
    for (int k = 0; k < 4; ++k) {
        a.F[std::size_t(k)] = compose_any(rf.f, k, u);
        a.E[std::size_t(k)] = compose_any(rf.eps, k, u);
    }
    return a;
}

template <class T>
T evaluate_coefficient(const Coefficient& c, const Atoms<T>& atoms, const std::function<const T&(int)>& factor,
                       T zero)
{
    T acc = std::move(zero);
    for (const Monomial& mono : c) {
        std::optional<T> term;
        if (mono.g == 'F') term = atoms.F[std::size_t(mono.m)];
        if (mono.g == 'E') term = atoms.E[std::size_t(mono.m)];
        for (int b : mono.factors) term = term ? product(*term, factor(b)) : factor(b);
        require(term.has_value(), ErrorKind::internal, "coefficient: empty monomial");
        acc += mono.c * *term;
    }
    return acc;
}

std::string letter_list(const Alphabet& A, std::initializer_list<int> ls, const char* sep)
{
    std::string s;
    bool first = true;
    for (int l : ls) {
        if (!first) s += sep;
        s += A.letters[std::size_t(l)].id;
        first = false;
    }
    return s;
}

int find_letter(const Alphabet& A, const std::string& id)
{
    const auto f = A.find(id);
    return f ? *f : -1;
}

}  // namespace

// ---- canonical right-hand side ----

SpaceTimeField CanonicalRhs::total() const
{
    SpaceTimeField out = remainder();
    for (const auto& t : terms) out += t.value;
    return out;
}

SpaceTimeField CanonicalRhs::remainder() const
{
    require(!terms.empty(), ErrorKind::internal, "canonical RHS is empty");
    SpaceTimeField out = 0.0 * terms.front().value;
    for (const auto& p : pieces) out += p.value;
    return out;
}

SystemState evaluate_state(const SystemLayout& L, const ParacontrolledSystem& s, const ReferenceData& refs)
{
    require(int(s.remainders.size()) == L.word_count(), ErrorKind::incomplete, "system has the wrong number of words");
    for (const auto& r : s.remainders)
        require(r.slice_count() > 0, ErrorKind::incomplete, "system has a missing remainder");
    return {reconstruct(L, s, refs.letters, refs.op), s.remainders};
}

CanonicalRhs rhs_canonical(const SystemState& st, const ReferenceData& refs, const Reformulation& rf)
{
    const SystemLayout& L = refs.layout;
    const Alphabet& A = L.alphabet;
    const OperatorL& op = refs.op;
    const auto& U = st.coefficients;
    const auto& R = st.remainders;
    require(int(U.size()) == L.word_count() && int(R.size()) == L.word_count(), ErrorKind::incomplete,
            "state does not match the layout");
    const SpaceTimeField& zeta = refs.noise;
    const SpaceTimeField& u = U[0];
    const double alpha = A.alpha;
    auto letter = [&](int i) -> const SpaceTimeField& { return refs.letters[std::size_t(i)]; };
    auto Uw = [&](int i) -> const SpaceTimeField& { return U[std::size_t(L.letter_word(i))]; };
    auto E = [&](const SpaceTimeField& x) { return zeta_defect(x, zeta); };
    auto Lc = [&](const std::vector<SpaceTimeField>& a, const SpaceTimeField& b) {
        return -1.0 * commutator_l<SpaceTimeField>(a, b, op);
    };
    auto hom = [&](int i) { return A.homogeneity(i); };

    const SpaceTimeField F0 = compose_stf(rf.f, 0, u), F1 = compose_stf(rf.f, 1, u), F2 = compose_stf(rf.f, 2, u);

    CanonicalRhs out;
    out.terms.push_back({"P_{f(u)} zeta", "zeta", 0, alpha - 2.0, para(F0, zeta)});
    out.pieces.push_back({"E(f(u) - P_{f'(u)} u)", E(F0 - para(F1, u))});
    out.pieces.push_back({"E(P_{f'(u)} u#)", E(para(F1, R[0]))});

    const int nl = A.size();
    std::vector<CanonicalRhs> parts(static_cast<std::size_t>(nl));
    std::vector<int> t1;
    for (int i = 0; i < nl; ++i)
        if (A.letters[std::size_t(i)].level == 1) t1.push_back(i);

    // f(u) zeta branch
    parallel_for(std::size_t(nl), [&](std::size_t ti) {
        const int t = int(ti);
        CanonicalRhs& part = parts[ti];
        const Letter& lt = A.letters[ti];
        const std::string id = lt.id;
        const SpaceTimeField& tau = letter(t);
        const SpaceTimeField c = product(F1, Uw(t));
        const SpaceTimeField ct = para_tilde(c, tau, op);
        part.pieces.push_back({"E(R~(f'(u), u[" + id + "], " + id + "))", E(para(F1, para_tilde(Uw(t), tau, op)) - ct)});
        if (lt.level >= 3) {
            part.pieces.push_back({"E(P~_{f'(u)u[" + id + "]} " + id + ")", E(ct)});
            return;
        }
        const SpaceTimeField& z = refs.term({TermKind::zeta1, {t}, -1});
        part.terms.push_back({"P_{f'(u)u[" + id + "]} zeta1[" + id + "]", "zeta1[" + id + "]",
                              find_letter(A, "I1[" + id + "]"), hom(t) + alpha - 2.0, para(c, z)});
        auto KE = [&](const SpaceTimeField& x) { return E(para_tilde(x, tau, op)) - para(x, z); };
        if (lt.level == 2) {
            part.pieces.push_back({"K_E(f'(u)u[" + id + "], " + id + ")", KE(c)});
            return;
        }
        SpaceTimeField sharp = c;
        for (int s : t1) {
            const std::string pair = letter_list(A, {t, s}, ",");
            const auto w2 = L.word_index({t, s});
            require(w2.has_value(), ErrorKind::internal, "missing two-letter word");
            const SpaceTimeField a = product(F1, U[std::size_t(*w2)]);
            const SpaceTimeField b = product(F2, product(Uw(t), Uw(s)));
            const SpaceTimeField cs = a + b;
            const SpaceTimeField pt = para_tilde(cs, letter(s), op);
            sharp -= pt;
            const SpaceTimeField& z2 = refs.term({TermKind::zeta1, {t, s}, -1});
            const int target = find_letter(A, "I1[" + pair + "]");
            const double nominal = hom(t) + hom(s) + alpha - 2.0;
            part.terms.push_back({"P_{f'(u)u[" + pair + "]} zeta1[" + pair + "]", "zeta1[" + pair + "]", target,
                                  nominal, para(a, z2)});
            part.terms.push_back({"P_{f''(u)u[" + id + "]u[" + A.letters[std::size_t(s)].id + "]} zeta1[" + pair + "]",
                                  "zeta1[" + pair + "]", target, nominal, para(b, z2)});
            part.pieces.push_back({"K_E defect (" + pair + ")", KE(pt) - para(cs, z2)});
        }
        part.pieces.push_back({"K_E(c#, " + id + ")", KE(sharp)});
    });
    for (auto& p : parts) {
        std::move(p.terms.begin(), p.terms.end(), std::back_inserter(out.terms));
        std::move(p.pieces.begin(), p.pieces.end(), std::back_inserter(out.pieces));
        p = {};
    }
    if (!rf.quasilinear) return out;

    // P_{eps(u)} Lp u branch
    const SpaceTimeField E0 = compose_stf(rf.eps, 0, u), E1 = compose_stf(rf.eps, 1, u),
                         E2 = compose_stf(rf.eps, 2, u);
    std::vector<SpaceTimeField> rem_l(static_cast<std::size_t>(nl));
    parallel_for(std::size_t(nl), [&](std::size_t ti) {
        const int t = int(ti);
        CanonicalRhs& part = parts[ti];
        const std::string id = A.letters[ti].id;
        const SpaceTimeField& tau = letter(t);
        const int wt = L.letter_word(t);
        const SpaceTimeField lp_tau = apply_lp(tau, op);
        const auto chained = A.chained(t);
        part.terms.push_back({"P_{eps(u)u[" + id + "]} Lp " + id, "Lp " + id, chained ? *chained : -1, hom(t) - 2.0,
                              para(product(E0, U[std::size_t(wt)]), lp_tau)});
        part.pieces.push_back({"R°(eps(u), u[" + id + "], Lp " + id + ")", merge_r_circ(E0, U[std::size_t(wt)], lp_tau)});
        SpaceTimeField acc = Lc({R[std::size_t(wt)]}, tau);
        for (const auto& [s, w2] : L.extensions[std::size_t(wt)]) {
            const SpaceTimeField& sig = letter(s);
            const SpaceTimeField& c2 = U[std::size_t(w2)];
            const std::string pair = letter_list(A, {t, s}, ",");
            acc += Lc({para_tilde(c2, sig, op) - para(c2, sig)}, tau);
            acc += Lc({R[std::size_t(w2)], sig}, tau);
            const SpaceTimeField& z = refs.term({TermKind::zeta2_word, {t, s}, -1});
            const SpaceTimeField e0c2 = product(E0, c2);
            part.terms.push_back({"P_{eps(u)u[" + pair + "]} zeta2[" + pair + "]", "zeta2[" + pair + "]",
                                  find_letter(A, "I2[" + pair + "]"), hom(t) + hom(s) - 2.0, para(e0c2, z)});
            part.pieces.push_back({"R°(eps(u), u[" + pair + "], zeta2[" + pair + "])", merge_r_circ(E0, c2, z)});
            for (const auto& [g, w3] : L.extensions[std::size_t(w2)]) {
                const SpaceTimeField& gam = letter(g);
                const SpaceTimeField& c3 = U[std::size_t(w3)];
                const std::string triple = letter_list(A, {t, s, g}, ",");
                acc += Lc({para_tilde(c3, gam, op) - para(c3, gam), sig}, tau);
                acc += Lc({c3, gam, sig}, tau);
                const SpaceTimeField& z3 = refs.term({TermKind::zeta2_word, {t, s, g}, -1});
                part.terms.push_back({"P_{eps(u)u[" + triple + "]} zeta2[" + triple + "]", "zeta2[" + triple + "]",
                                      find_letter(A, "I2[" + triple + "]"), hom(t) + hom(s) + hom(g) - 2.0,
                                      para(product(E0, c3), z3)});
                part.pieces.push_back(
                    {"R°(eps(u), u[" + triple + "], zeta2[" + triple + "])", merge_r_circ(E0, c3, z3)});
            }
        }
        rem_l[ti] = std::move(acc);
    });
    SpaceTimeField rem = apply_lp(R[0], op);
    for (auto& r : rem_l) rem += r;
    rem_l.clear();
    for (auto& p : parts) {
        std::move(p.terms.begin(), p.terms.end(), std::back_inserter(out.terms));
        std::move(p.pieces.begin(), p.pieces.end(), std::back_inserter(out.pieces));
        p = {};
    }
    out.pieces.push_back({"P_{eps(u)}(Lp u# + commutator remainders)", para(E0, rem)});

    // G(eps(u), Lp u): sentence terms and what is left of the product
    const SpaceTimeField lpu = apply_lp(u, op);
    SpaceTimeField g_rest = product_defect(E0, lpu);
    for (int w = 1; w < L.word_count(); ++w) {
        const auto& ls = L.words[std::size_t(w)].letters;
        if (ls.size() == 2) {
            const std::string sent = letter_list(A, {ls[0], ls[1]}, "|");
            const SpaceTimeField& z = refs.term({TermKind::zeta2_sentence, ls, -1});
            SpaceTimeField v = para(product(E1, product(Uw(ls[0]), Uw(ls[1]))), z);
            g_rest -= v;
            out.terms.push_back({"P_{eps'(u)u[" + A.letters[std::size_t(ls[0])].id + "]u[" +
                                     A.letters[std::size_t(ls[1])].id + "]} zeta2[" + sent + "]",
                                 "zeta2[" + sent + "]", find_letter(A, "I2[" + sent + "]"),
                                 hom(ls[0]) + hom(ls[1]) - 2.0, std::move(v)});
        } else if (ls.size() == 3) {
            const std::string sent = letter_list(A, {ls[0], ls[1], ls[2]}, "|");
            const SpaceTimeField& z = refs.term({TermKind::zeta2_sentence, ls, -1});
            SpaceTimeField v = para(product(E2, product(Uw(ls[0]), product(Uw(ls[1]), Uw(ls[2])))), z);
            g_rest -= 0.5 * v;
            out.terms.push_back({"P_{eps''(u)/2 u u u} zeta2[" + sent + "]", "zeta2[" + sent + "]",
                                 find_letter(A, "I2[" + sent + "]"), hom(ls[0]) + hom(ls[1]) + hom(ls[2]) - 2.0,
                                 0.5 * v});
        }
    }
    out.pieces.push_back({"G(eps(u), Lp u) - sentence terms", std::move(g_rest)});
    return out;
}

SpaceTimeField rhs_direct(const SpaceTimeField& u, const ReferenceData& refs, const Reformulation& rf)
{
    SpaceTimeField out = product(compose_stf(rf.f, 0, u), refs.noise);
    if (rf.quasilinear) out += product(compose_stf(rf.eps, 0, u), apply_lp(u, refs.op));
    return out;
}

// ---- fixed-point map ----

PhiResult phi_map(const ParacontrolledSystem& s, const ReferenceData& refs, const Reformulation& rf, const Field& u0,
                  const std::vector<Coefficient>& table)
{
    const SystemLayout& L = refs.layout;
    require(int(table.size()) == L.word_count(), ErrorKind::internal, "coefficient table does not match the layout");
    const SystemState st = evaluate_state(L, s, refs);
    PhiResult out;
    {
        const CanonicalRhs rhs = rhs_canonical(st, refs, rf);
        for (const auto& t : rhs.terms)
            if (t.letter < 0) out.truncations.push_back({t.label, t.value.sup_norm()});
        out.psi = duhamel_inverse(rhs.total(), u0, refs.op);
    }
    const std::size_t nw = std::size_t(L.word_count());
    std::vector<SpaceTimeField> H(nw);
    H[0] = out.psi;
    const Atoms<SpaceTimeField> atoms = make_atoms(rf, st.coefficients[0]);
    const SpaceTimeField zero = 0.0 * out.psi;
    std::function<const SpaceTimeField&(int)> factor = [&](int b) -> const SpaceTimeField& {
        return st.coefficients[std::size_t(b)];
    };
    parallel_for(nw - 1, [&](std::size_t i) { H[i + 1] = evaluate_coefficient(table[i + 1], atoms, factor, zero); });
    out.system.remainders.resize(nw);
    parallel_for(nw, [&](std::size_t w) {
        SpaceTimeField r = H[w];
        for (const auto& [l, e] : L.extensions[w]) r -= para_tilde(H[std::size_t(e)], refs.letters[std::size_t(l)], refs.op);
        out.system.remainders[w] = std::move(r);
    });
    return out;
}

ParacontrolledSystem flat_start(const SystemLayout& L, const Reformulation& rf, const Field& u0, int steps, double dt,
                                const std::vector<Coefficient>& table)
{
    const std::size_t nw = std::size_t(L.word_count());
    require(table.size() == nw, ErrorKind::internal, "coefficient table does not match the layout");
    std::vector<std::optional<Field>> val(nw);
    std::vector<char> visiting(nw, 0);
    val[0] = u0;
    const Atoms<Field> atoms = make_atoms(rf, u0);
    const Field zero(u0.grid());
    std::function<const Field&(int)> get = [&](int w) -> const Field& {
        auto& v = val[std::size_t(w)];
        if (v) return *v;
        require(!visiting[std::size_t(w)], ErrorKind::internal, "coefficient table is cyclic");
        visiting[std::size_t(w)] = 1;
        v = evaluate_coefficient(table[std::size_t(w)], atoms, get, zero);
        return *v;
    };
    ParacontrolledSystem s;
    s.remainders.resize(nw);
    s.remainders[0] = free_propagation(u0, rf.op, steps, dt);
    for (std::size_t w = 1; w < nw; ++w) s.remainders[w] = SpaceTimeField::constant_in_time(get(int(w)), steps, dt);
    return s;
}

ReferenceData problem_references(const ProblemSpec& spec)
{
    const Reformulation rf = reformulate(spec);
    const SystemLayout L = make_layout(generate_alphabet(spec.alpha, spec.order, spec.chain_cap, spec.dim), spec.order);
    return build_reference_data(L, spec.noise, spec.grid(), spec.steps, spec.dt(), rf.op);
}

SolveResult solve_fixed_point(const ProblemSpec& spec, const ReferenceData& refs)
{
    const Reformulation rf = reformulate(spec);
    const SystemLayout& L = refs.layout;
    require(refs.steps() == spec.steps && refs.grid() == spec.grid(), ErrorKind::configuration,
            "reference data do not match the problem grid");
    require(std::abs(refs.op.c0 - rf.c0) <= 1e-14 * rf.c0, ErrorKind::configuration,
            "reference data were built for a different operator");
    const auto table = coefficient_table(L);
    const Field u0 = spec.u0.field(spec.grid());

    SolveResult out;
    SolveDiagnostics& d = out.diagnostics;
    ParacontrolledSystem s = flat_start(L, rf, u0, spec.steps, spec.dt(), table);
    int rising = 0;
    for (int k = 0; k < spec.solver.max_iter; ++k) {
        PhiResult phi = phi_map(s, refs, rf, u0, table);
        const double gap = system_distance(L, phi.system, s, refs.letter_norms);
        require(std::isfinite(gap), ErrorKind::numerical, "fixed-point iteration produced a non-finite system");
        if (!d.gaps.empty()) {
            const double ratio = d.gaps.back() > 0.0 ? gap / d.gaps.back() : 0.0;
            d.ratios.push_back(ratio);
            rising = ratio >= 1.0 ? rising + 1 : 0;
            if (rising >= 3)
                fail(ErrorKind::numerical, "fixed-point iteration is not contracting (three non-decreasing gaps); reduce time.T");
        }
        d.gaps.push_back(gap);
        d.truncations = std::move(phi.truncations);
        s = std::move(phi.system);
        d.iterations = k + 1;
        if (gap < spec.solver.tol) {
            d.converged = true;
            break;
        }
    }

    const auto coeffs = reconstruct(L, s, refs.letters, refs.op);
    out.u = coeffs[0];
    const SpaceTimeField direct = rhs_direct(out.u, refs, rf);
    const SpaceTimeField res = apply_parabolic(out.u, refs.op) - direct;
    for (int m = 1; m < spec.steps; ++m) d.residual = std::max(d.residual, res.slice(m).sup_norm());
    d.mild_residual = (out.u - duhamel_inverse(direct, u0, refs.op)).sup_norm();
    d.eps_sup = compose_stf(rf.eps, 0, out.u).sup_norm();
    const Alphabet& A = L.alphabet;
    for (int w = 1; w < L.word_count(); ++w) {
        const auto& ls = L.words[std::size_t(w)].letters;
        const bool boundary = std::any_of(ls.begin(), ls.end(), [&](int l) {
            return A.letters[std::size_t(l)].n_tau == A.chain_cap;
        });
        if (boundary)
            d.truncation_tail += parabolic_norm(s.remainders[std::size_t(w)], L.remainder_exponent(w)) *
                                 word_weight(L, w, refs.letter_norms);
    }
    out.system = std::move(s);
    return out;
}

SolveResult solve_fixed_point(const ProblemSpec& spec) { return solve_fixed_point(spec, problem_references(spec)); }

// ---- reference solver ----

SpaceTimeField etdrk2(const ProblemSpec& spec, const Reformulation& rf, int substeps)
{
    require(substeps >= 1, ErrorKind::configuration, "substeps must be >= 1");
    const SpaceGrid g = spec.grid();
    const int fine = spec.steps * substeps;
    const double h = spec.dt() / substeps;
    const SpaceTimeField noise = sample_noise(spec.noise, g, fine, h);
    const OperatorL& op = rf.op;

    auto phi1 = [](double z) { return z < 1e-4 ? 1.0 - z / 2 + z * z / 6 : -std::expm1(-z) / z; };
    auto phi2 = [](double z) { return z < 1e-4 ? 0.5 - z / 6 + z * z / 24 : (std::expm1(-z) + z) / (z * z); };
    auto nonlinear = [&](const Field& v, const Field& z) {
        Field n = product(compose(rf.f, 0, v), z);
        if (rf.quasilinear) n += product(compose(rf.eps, 0, v), lp_field(v, op));
        return n;
    };
    auto mult = [&](const Field& f, const std::function<double(double)>& fn) {
        return apply_multiplier(f, [&](const Freq& k) { return fn(op.symbol(k) * h); });
    };

    std::vector<Field> out;
    out.reserve(std::size_t(spec.steps) + 1);
    Field v = spec.u0.field(g);
    out.push_back(v);
    for (int n = 0; n < fine; ++n) {
        const Field nv = nonlinear(v, noise.slice(n));
        const Field a = mult(v, [](double z) { return std::exp(-z); }) + h * mult(nv, phi1);
        const Field na = nonlinear(a, noise.slice(n + 1));
        v = a + h * mult(na - nv, phi2);
        require(v.all_finite(), ErrorKind::numerical, "reference solver blew up");
        if ((n + 1) % substeps == 0) out.push_back(v);
    }
    return SpaceTimeField(std::move(out), spec.dt());
}

namespace {

double max_slice_diff(const SpaceTimeField& a, const SpaceTimeField& b)
{
    double m = 0.0;
    for (int i = 0; i <= a.steps(); ++i) m = std::max(m, (a.slice(i) - b.slice(i)).sup_norm());
    return m;
}

}  // namespace

ReferenceRun reference_solver(const ProblemSpec& spec)
{
    const Reformulation rf = reformulate(spec);
    const int s = spec.reference.substeps;
    const SpaceTimeField u1 = etdrk2(spec, rf, s), u2 = etdrk2(spec, rf, 2 * s), u3 = etdrk2(spec, rf, 4 * s);
    const double e1 = max_slice_diff(u1, u2), e2 = max_slice_diff(u2, u3);
    ReferenceRun r;
    r.disagreement = e2;
    r.halving_error = e2 / 3.0;
    r.order = e2 > 0.0 && e1 > 0.0 ? std::log2(e1 / e2) : std::numeric_limits<double>::quiet_NaN();
    require(e2 <= 10.0 * spec.reference.tolerance, ErrorKind::numerical,
            "reference solver unreliable: step-halving disagreement " + std::to_string(e2) + " exceeds 10x tolerance");
    r.u = u3;
    return r;
}

CompareReport compare(const SpaceTimeField& a, const SpaceTimeField& b)
{
    check_same_time_grid(a, b, "compare");
    CompareReport r;
    for (int m = 0; m <= a.steps(); ++m) {
        const Field d = a.slice(m) - b.slice(m);
        r.sup.push_back(d.sup_norm());
        r.l2.push_back(d.l2_norm());
        r.max_sup = std::max(r.max_sup, r.sup.back());
        r.max_l2 = std::max(r.max_l2, r.l2.back());
    }
    return r;
}

std::string compare_json(const CompareReport& r)
{
    return json{{"sup", r.sup}, {"l2", r.l2}, {"max_sup", r.max_sup}, {"max_l2", r.max_l2}}.dump(2);
}

// ---- runs ----

RunOutput run_problem(const ProblemSpec& spec)
{
    RunOutput out;
    out.refs = problem_references(spec);
    out.solve = solve_fixed_point(spec, out.refs);
    // Richardson estimate of the time-discretization error at M steps
    double d1 = 0.0, d2 = 0.0;
    {
        ProblemSpec fine = spec;
        fine.steps = 2 * spec.steps;
        const SpaceTimeField u2 = solve_fixed_point(fine).u;
        fine.steps = 4 * spec.steps;
        const SpaceTimeField u4 = solve_fixed_point(fine).u;
        for (int m = 0; m <= spec.steps; ++m) {
            d1 = std::max(d1, (out.solve.u.slice(m) - u2.slice(2 * m)).sup_norm());
            d2 = std::max(d2, (u2.slice(2 * m) - u4.slice(4 * m)).sup_norm());
        }
    }
    out.solver_order = d1 > 0.0 && d2 > 0.0 ? std::log2(d1 / d2) : std::numeric_limits<double>::quiet_NaN();
    // nominal order 2; a lower measured order widens the budget
    const double p = std::isfinite(out.solver_order) ? std::clamp(out.solver_order, 1.0, 2.0) : 1.0;
    out.reference = reference_solver(spec);
    out.discretization_budget = d1 / (1.0 - std::pow(2.0, -p)) + out.reference.halving_error;
    out.comparison = compare(out.solve.u, out.reference.u);
    out.tolerance_band = 10.0 * spec.solver.tol + out.discretization_budget;
    return out;
}

bool within_band(const RunOutput& out) { return out.comparison.max_sup <= out.tolerance_band; }

namespace {

json diagnostics_json(const SolveDiagnostics& d)
{
    json trunc = json::array();
    for (const auto& t : d.truncations) trunc.push_back({{"term", t.term}, {"magnitude", t.magnitude}});
    return {{"gaps", d.gaps},
            {"ratios", d.ratios},
            {"iterations", d.iterations},
            {"converged", d.converged},
            {"residual", d.residual},
            {"mild_residual", d.mild_residual},
            {"truncation_tail", d.truncation_tail},
            {"eps_sup", d.eps_sup},
            {"truncations", trunc}};
}

}  // namespace

std::string run_manifest_json(const ProblemSpec& spec, const RunOutput& out)
{
    const Reformulation rf = reformulate(spec);
    json j;
    j["problem"] = problem_json(spec);
    j["reformulation"] = {{"ubar0", rf.ubar0}, {"c0", rf.c0}, {"closeness", rf.closeness}};
    j["alphabet"] = {{"letters", out.refs.layout.alphabet.size()}, {"words", out.refs.layout.word_count()}};
    j["solver"] = diagnostics_json(out.solve.diagnostics);
    j["reference"] = {{"halving_error", out.reference.halving_error},
                      {"disagreement", out.reference.disagreement},
                      {"order", out.reference.order}};
    j["comparison"] = json::parse(compare_json(out.comparison));
    j["solver_order"] = out.solver_order;
    j["discretization_budget"] = out.discretization_budget;
    j["tolerance_band"] = out.tolerance_band;
    j["within_band"] = within_band(out);
    j["files"] = {{"solution", "solution.pcf"}, {"reference", "reference.pcf"}};
    return j.dump(2);
}

void write_run(const std::string& dir, const ProblemSpec& spec, const RunOutput& out)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create output directory " + dir);
    auto write_text = [&](const std::string& name, const std::string& text) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        require(bool(f), ErrorKind::io, "cannot write " + name);
        f << text << '\n';
        require(bool(f), ErrorKind::io, "failed writing " + name);
    };
    write_text("manifest.json", run_manifest_json(spec, out));
    write_pcf((fs::path(dir) / "solution.pcf").string(), out.solve.u);
    write_pcf((fs::path(dir) / "reference.pcf").string(), out.reference.u);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ts;
    ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    write_text("metadata.json", json{{"written_at", ts.str()}}.dump(2));
}

}  // namespace paracalc
