/// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "brute_alphabet.hpp"
#include "paracalc/correctors.hpp"
#include "paracalc/littlewood_paley.hpp"
#include "paracalc/paraproducts.hpp"
#include "paracalc/qpam_solver.hpp"
#include "paracalc/reference_data.hpp"
#include "paracalc/synthetic.hpp"
#include "paracalc/word_algebra.hpp"
#include "test_support.hpp"

using namespace paracalc;
using namespace testing_support;

namespace {

// ---- pinned tolerances ----
constexpr double kDecomposeRel = 1e-12;
constexpr double kBonyTol = 0.15;
constexpr double kBonyR2 = 0.95;
constexpr double kGainTol = 0.15;
constexpr double kRefinedGain = 0.3;
constexpr double kQLaw = 1e-10;
constexpr double kExpansionSlack = 0.2;
constexpr double kBoundStability = 0.2;
constexpr double kAmplitudeK = 0.05;  // k ratio within 2 (1 +- 0.05)
constexpr double kAmplitudeC = 0.10;
constexpr double kMasterRel = 1e-10;
constexpr double kSemilinear = 1e-10;

struct Outcome {
    bool pass = true;
    std::vector<std::string> lines;

    void check(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)))
    {
        char buf[512];
        va_list ap;
        va_start(ap, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, ap);
        va_end(ap);
        lines.push_back(std::string(ok ? "    ok   " : "    FAIL ") + buf);
        pass = pass && ok;
    }
    void note(const std::string& s) { lines.push_back("    " + s); }
    /// Reported, not counted.
    void info(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)))
    {
        char buf[512];
        va_list ap;
        va_start(ap, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, ap);
        va_end(ap);
        lines.push_back(std::string(ok ? "    info ok   " : "    info miss ") + buf);
    }
};

double relative(const Field& x, const Field& ref) { return max_abs_diff(x, ref) / std::max(ref.sup_norm(), 1e-300); }

// ---- 1 ----
Outcome decomposition_exactness()
{
    Outcome o;
    const auto g = SpaceGrid::make(1, 64);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto a = random_field(g, seed), b = random_field(g, seed + 500);
        worst = std::max(worst, relative(decompose_product(a, b).sum(), product(a, b)));
    }
    o.check(worst <= kDecomposeRel, "20 pairs at N = 64: worst relative error %.2e (<= %.0e)", worst, kDecomposeRel);
    return o;
}

// ---- 2 ----
Outcome bony_continuity()
{
    Outcome o;
    const auto g = SpaceGrid::make(1, 1024);
    const int j0 = g.jmax() - 4, j1 = g.jmax() - 1;
    struct Case {
        double a, b;
        bool counted;
    };
    // the last case (negative right factor) is outside the corpus and only reported
    for (const Case c : {Case{0.6, 0.4, true}, Case{0.8, 0.3, true}, Case{0.5, -0.3, false}}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            LacunarySpec sa, sb;
            sa.alpha = c.a;
            sb.alpha = c.b;
            sa.placement = sb.placement = Placement::jittered;
            sa.j_lo = sb.j_lo = 0;
            sa.offset = sb.offset = 1.0;
            const auto a = lacunary_field(g, sa, seed);
            const auto b = lacunary_field(g, sb, seed + 1000);
            const double ea = estimate_regularity(a, j0, j1).alpha, eb = estimate_regularity(b, j0, j1).alpha;
            const auto ep = estimate_regularity(para(a, b), j0, j1);
            const auto er = estimate_regularity(resonant(a, b), j0, j1);
            const bool para_ok = std::abs(ep.alpha - eb) <= kBonyTol && ep.r2 >= kBonyR2;
            // resonant is at least as smooth as a + b; only the lower side is a requirement
            const bool res_ok = er.alpha >= ea + eb - kBonyTol && er.r2 >= kBonyR2;
            const char* pf = "(%.1f, %.1f) seed %d: P_a b %.3f vs b %.3f, r2 %.3f";
            const char* rf = "(%.1f, %.1f) seed %d: Pi(a, b) %.3f vs a + b %.3f, r2 %.3f";
            if (c.counted) {
                o.check(para_ok, pf, c.a, c.b, int(seed), ep.alpha, eb, ep.r2);
                o.check(res_ok, rf, c.a, c.b, int(seed), er.alpha, ea + eb, er.r2);
            } else {
                o.info(para_ok, pf, c.a, c.b, int(seed), ep.alpha, eb, ep.r2);
                o.info(res_ok, rf, c.a, c.b, int(seed), er.alpha, ea + eb, er.r2);
            }
        }
    }
    return o;
}

// ---- 3 ----
Outcome corrector_gains()
{
    Outcome o;
    struct Case {
        const char* id;
        std::vector<double> e;
    };
    const std::vector<Case> cases = {
        {"corrector_c", {0.6, -0.4, -0.1}},
        {"corrector_c_iterated", {0.5, 0.4, -0.5, -0.3}},
        {"commutator_d", {0.3, 0.4, 0.5}},
        {"merge_r", {0.3, 0.5, -0.2}},
        {"merge_r_circ", {0.4, 0.4, -0.5}},
        {"iterated_r_circ_first", {0.3, 0.4, 0.2, -0.3}},
        {"iterated_r_circ_second", {0.2, 0.3, 0.4, -0.3}},
        {"corrector_cl_low", {0.8, -0.3, 1.6}},
        {"corrector_cl_high", {1.2, 0.6, 0.5}},
        {"corrector_cl_resonant", {0.8, -0.3, 1.6}},
        {"corrector_cv_low", {0.8, -0.4, 0.8}},
        {"corrector_cv_high", {0.2, 0.7, 0.5}},
        {"corrector_cv_resonant", {0.8, -0.4, 0.8}},
        {"commutator_l1", {0.7, 0.9}},
        {"commutator_l2", {0.5, 0.4, 0.9}},
        {"commutator_l3", {0.4, 0.4, 0.4, 0.9}},
        {"commutator_v1", {0.7, 0.9}},
        {"commutator_v2", {0.5, 0.4, 0.9}},
        {"corrector_c_refined", {1.6, -0.6, -0.6}},
        {"corrector_cl_refined_low", {1.6, -0.3, 1.2}},
        {"corrector_cl_refined_high", {1.2, 1.6, -0.3}},
        {"corrector_cl_refined_resonant", {1.6, -0.3, 1.2}},
        {"commutator_l_refined", {1.4, 0.9}},
    };
    HarnessConfig cfg;
    cfg.tolerance = kGainTol;
    for (const auto& c : cases) {
        const auto r = regularity_gain_report(c.id, c.e, 42, 5, cfg);
        std::string ex;
        for (double x : c.e) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%s%g", ex.empty() ? "" : ",", x);
            ex += buf;
        }
        const bool resolved = r.unresolved < int(r.trials.size());
        if (!resolved)
            o.check(r.verdict == "pass", "%-30s (%s) output at roundoff (smooth), verdict %s", c.id, ex.c_str(),
                    r.verdict.c_str());
        else
            o.check(r.verdict == "pass", "%-30s (%s) measured %.3f predicted %.3f, verdict %s", c.id, ex.c_str(),
                    r.mean, r.predicted.value_or(NAN), r.verdict.c_str());
        if (r.unrefined_mean) {
            const double gain = r.mean - *r.unrefined_mean;
            o.check(gain >= kRefinedGain, "%-30s A/B refined %.3f vs unrefined %.3f, gain %.3f (>= %.1f)", c.id,
                    r.mean, *r.unrefined_mean, gain, kRefinedGain);
        }
    }
    return o;
}

// ---- 4 ----
Outcome semigroup_identities()
{
    Outcome o;
    const auto g = SpaceGrid::make(1, 64);
    const auto op = OperatorL::constant(0.01);
    const auto f = random_field(g, 21);
    const double t = 0.3, s = 0.55;
    const auto lhs = heat_operator(heat_operator(f, op, s, 1, HeatKind::Q), op, t, 1, HeatKind::Q);
    const auto rhs = (t * s / ((t + s) * (t + s))) * heat_operator(f, op, t + s, 2, HeatKind::Q);
    const double e = relative(lhs, rhs);
    o.check(e <= kQLaw, "Q_t Q_s = ts/(t+s)^2 Q^(2)_{t+s}: relative %.2e (<= %.0e)", e, kQLaw);

    const auto g2 = SpaceGrid::make(1, 32);
    const auto op2 = OperatorL::constant(0.05);
    const auto a = smooth_field(g2, 5, 2), b = smooth_field(g2, 6, 2);
    const auto exact = product(a, b);
    std::vector<double> lx, ly;
    bool decreasing = true;
    std::string errs;
    for (double tmin : {4e-3, 2e-3, 1e-3, 5e-4}) {
        const double err = max_abs_diff(semigroup_para(a, b, op2, 1, 160, tmin).sum(), exact);
        if (!ly.empty() && std::log(err) >= ly.back()) decreasing = false;
        lx.push_back(std::log(tmin));
        ly.push_back(std::log(err));
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.2e", err);
        errs += buf;
    }
    const double order = fit_slope(lx, ly);
    o.check(decreasing && order > 0.0, "semigroup paraproduct error under t_min halving:%s, order %.3f", errs.c_str(),
            order);
    return o;
}

// ---- 5 ----
Outcome expansion_remainder()
{
    Outcome o;
    const auto g = SpaceGrid::make(1, 1 << 17);
    const int J = g.jmax();
    const ScalarMap sn{[](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
                       [](double x) { return -std::sin(x); }, [](double x) { return -std::cos(x); }};
    const Field v = Field::from_function(g, [](double x, double) { return 1.0 + 0.5 * std::cos(two_pi * x); });
    for (double alpha : {0.42, 0.45, 0.48})
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto u = synthetic_inputs(g, {alpha}, seed, 1, 0.0)[0];
            const auto r = paracontrolled_expansion(sn, u, v);
            const auto est = estimate_regularity(r.remainder, J - 8, J - 1);
            o.check(est.alpha >= 4 * alpha - kExpansionSlack, "alpha %.2f seed %d: remainder %.3f (>= %.2f), r2 %.3f",
                    alpha, int(seed), est.alpha, 4 * alpha - kExpansionSlack, est.r2);
        }
    return o;
}

// ---- 6 ----
SpaceTimeField smooth_stf(const SpaceGrid& g, int steps, double dt, std::uint64_t seed, double scale)
{
    std::vector<Field> s;
    const Field a = smooth_field(g, seed, 3), b = smooth_field(g, seed + 1, 3);
    for (int m = 0; m <= steps; ++m) s.push_back(scale * (a + (m * dt) * b));
    return SpaceTimeField(std::move(s), dt);
}

Outcome word_algebra_checks()
{
    Outcome o;
    const auto A = generate_alphabet(0.45, 3, 0);
    std::set<std::string> ids;
    for (const auto& l : A.letters) ids.insert(l.id);
    const auto brute = brute_ids(0);
    o.check(ids == brute && ids.size() == A.letters.size(), "K = 0 letters: %zu generated, %zu enumerated",
            A.letters.size(), brute.size());
    const std::array<int, 4> per{0, A.count_level(1), A.count_level(2), A.count_level(3)};
    const long words = long(generate_words(A, 3).size()), expected = word_count_recursive(per, 3);
    o.check(words == expected, "K = 0 words: %ld generated, %ld counted", words, expected);

    long violations = 0;
    for (double alpha : {0.42, 0.45, 0.49}) {
        const auto L = make_layout(generate_alphabet(alpha, 3, 1), 3);
        const auto& b = L.betas.beta;
        for (double x : b)
            if (!(x > 0.4 && x < alpha)) ++violations;
        for (int i = 0; i < L.word_count(); ++i)
            for (int j = 0; j < L.word_count(); ++j) {
                const auto &wi = L.words[std::size_t(i)], &wj = L.words[std::size_t(j)];
                const double bi = b[std::size_t(i)], bj = b[std::size_t(j)];
                if (wi.count() > wj.count() && !(bi > bj)) ++violations;
                if (wi.count() == wj.count() && wi.level < wj.level && !(bi > bj)) ++violations;
                auto si = wi.letters, sj = wj.letters;
                std::sort(si.begin(), si.end());
                std::sort(sj.begin(), sj.end());
                if (si == sj && bi != bj) ++violations;
            }
    }
    o.check(violations == 0, "beta ordering rules at alpha 0.42 / 0.45 / 0.49 (K = 1): %ld violations", violations);

    const auto L = make_layout(A, 3);
    const auto g = SpaceGrid::make(1, 32);
    const auto op = OperatorL::constant(1.0);
    const int steps = 6;
    const double dt = 0.01;
    std::vector<SpaceTimeField> letters;
    std::vector<double> norms;
    for (int l = 0; l < L.alphabet.size(); ++l) {
        letters.push_back(smooth_stf(g, steps, dt, 100 + std::uint64_t(l), 0.3));
        norms.push_back(parabolic_norm(letters.back(), L.alphabet.homogeneity(l)));
    }
    std::vector<double> cs;
    bool bound = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = coefficient_bound_check(L, random_system(L, g, steps, dt, seed), letters, norms, op);
        bound = bound && r.system_norm > 0.0 && r.weighted_sum <= r.constant_sum * r.system_norm * (1 + 1e-12);
        cs.push_back(r.constant_sum);
    }
    double mean = 0.0, dev = 0.0;
    for (double c : cs) mean += c / double(cs.size());
    for (double c : cs) dev = std::max(dev, std::abs(c - mean) / mean);
    o.check(bound, "coefficient bound holds on 5 random systems");
    o.check(dev <= kBoundStability, "fitted constant %.4g, max deviation %.1f%% (<= %.0f%%)", mean, 100 * dev,
            100 * kBoundStability);
    return o;
}

// ---- 7 ----
Outcome assumption_fit()
{
    Outcome o;
    auto refs = [](double amplitude) {
        NoiseSpec s;
        s.amplitude = amplitude;
        return build_reference_data(make_layout(generate_alphabet(0.45, 3, 2), 3), s, SpaceGrid::make(1, 64), 20,
                                    0.05 / 20, OperatorL::constant(1.0));
    };
    const auto r1 = verify_assumption_a(norm_records(refs(1.0)), 2);
    const auto r2 = verify_assumption_a(norm_records(refs(2.0)), 2);
    bool envelope = !r1.degenerate && r1.headline.points == 3;
    for (const auto& c : r1.classes) envelope = envelope && c.k_envelope > 0.0;
    o.check(envelope, "K = 2 headline fit: k %.4g, C %.4g, r2 %.4f, %zu chain classes", r1.k_fit(), r1.c_fit(),
            r1.r2(), r1.classes.size());
    const double kr = r2.k_fit() / r1.k_fit(), cr = r2.c_fit() / r1.c_fit();
    o.check(std::abs(kr / 2.0 - 1.0) <= kAmplitudeK, "amplitude doubling: k ratio %.4f (2 within %.0f%%)", kr,
            100 * kAmplitudeK);
    o.check(std::abs(cr - 1.0) < kAmplitudeC, "amplitude doubling: C ratio %.4f (1 within %.0f%%)", cr,
            100 * kAmplitudeC);
    return o;
}

// ---- 8 ----
Outcome master_identity()
{
    Outcome o;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ProblemSpec s;
        s.n = 32;
        s.steps = 20;
        s.noise.seed = seed;
        const auto refs = problem_references(s);
        const auto rf = reformulate(s);
        const auto st = evaluate_state(refs.layout, random_system(refs.layout, s.grid(), s.steps, s.dt(), seed + 10), refs);
        const auto rhs = rhs_canonical(st, refs, rf);
        const auto direct = rhs_direct(st.coefficients[0], refs, rf);
        const double e = (rhs.total() - direct).sup_norm() / std::max(1.0, direct.sup_norm());
        o.check(e <= kMasterRel, "seed %d: %zu terms + %zu remainder pieces vs direct, relative %.2e (<= %.0e)",
                int(seed), rhs.terms.size(), rhs.pieces.size(), e, kMasterRel);
    }
    return o;
}

// ---- 9 / 10 ----
struct EndToEnd {
    std::string manifest;
    std::vector<unsigned char> solution, reference;
};

Outcome end_to_end(EndToEnd& keep)
{
    Outcome o;
    const ProblemSpec spec;
    const auto out = run_problem(spec);
    const auto& d = out.solve.diagnostics;
    o.check(within_band(out), "T %.2f N %d mol %.3f: max sup %.4e, band %.4e (10 tol %.1e + budget %.4e)", spec.T,
            spec.n, spec.noise.mol, out.comparison.max_sup, out.tolerance_band, 10 * spec.solver.tol,
            out.discretization_budget);
    char buf[160];
    std::snprintf(buf, sizeof buf, "solver order %.3f, reference order %.3f, reference error %.2e", out.solver_order,
                  out.reference.order, out.reference.halving_error);
    o.note(buf);
    const double worst = d.ratios.empty() ? 0.0 : *std::max_element(d.ratios.begin(), d.ratios.end());
    o.check(d.converged && worst < 1.0, "%d iterations, converged %s, largest contraction ratio %.3f", d.iterations,
            d.converged ? "yes" : "no", worst);

    ProblemSpec semi = spec;
    semi.d = ClosureSpec{"constant", 1.0, 0.0, 1.0, 0.0};
    const auto a = solve_fixed_point(semi);
    semi.quasilinear = false;
    const auto b = solve_fixed_point(semi);
    const double e = (a.u - b.u).sup_norm();
    o.check(e <= kSemilinear, "d = 1: quasilinear vs semilinear form %.2e (<= %.0e)", e, kSemilinear);

    keep = {run_manifest_json(spec, out), encode_pcf(out.solve.u.slices()), encode_pcf(out.reference.u.slices())};
    return o;
}

Outcome determinism(const EndToEnd& first)
{
    Outcome o;
    const ProblemSpec spec;
    const auto out = run_problem(spec);
    o.check(run_manifest_json(spec, out) == first.manifest, "manifest byte-identical (%zu bytes)",
            first.manifest.size());
    o.check(encode_pcf(out.solve.u.slices()) == first.solution, "solution field byte-identical (%zu bytes)",
            first.solution.size());
    o.check(encode_pcf(out.reference.u.slices()) == first.reference, "reference field byte-identical (%zu bytes)",
            first.reference.size());
    return o;
}

}  // namespace

int main()
{
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    EndToEnd e2e;
    const std::vector<Criterion> all = {
        {"decomposition exactness", 10, decomposition_exactness},
        {"Bony continuity", 60, bony_continuity},
        {"corrector gains", 600, corrector_gains},
        {"semigroup identities", 60, semigroup_identities},
        {"paracontrolled expansion", 120, expansion_remainder},
        {"word algebra", 10, word_algebra_checks},
        {"chain-letter norm envelope", 60, assumption_fit},
        {"solver master identity", 120, master_identity},
        {"solver end-to-end", 300, [&] { return end_to_end(e2e); }},
        {"determinism", 300, [&] { return determinism(e2e); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = all[i].run();
        } catch (const std::exception& ex) {
            o.check(false, "exception: %s", ex.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (const auto& l : o.lines) std::printf("%s\n", l.c_str());
        std::printf("%s %2zu %-28s %7.1f s (budget %.0f s)\n", o.pass ? "PASS" : "FAIL", i + 1, all[i].name, secs,
                    all[i].budget_s);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %zu criteria failed\n", failed, all.size());
    return failed == 0 ? 0 : 1;
}
