#include <doctest.h>

#include <filesystem>

#include "paracalc/correctors.hpp"
#include "paracalc/littlewood_paley.hpp"
#include "paracalc/reference_data.hpp"
#include "test_support.hpp"

using namespace paracalc;
using namespace testing_support;

namespace {

const auto op1 = OperatorL::constant(1.0);

ReferenceData small_refs(int K, NoiseSpec spec = {}, int steps = 20, double T = 0.05)
{
    return build_reference_data(make_layout(generate_alphabet(0.45, 3, K), 3), spec, SpaceGrid::make(1, 64), steps,
                                T / steps, op1);
}

double stf_diff(const SpaceTimeField& a, const SpaceTimeField& b) { return (a - b).sup_norm(); }

}  // namespace

TEST_CASE("noise: deterministic, linear in amplitude, band checked")
{
    const auto g = SpaceGrid::make(1, 64);
    NoiseSpec s;
    s.seed = 42;
    const Field a = sample_noise_field(s, g), b = sample_noise_field(s, g);
    CHECK(max_abs_diff(a, b) == 0.0);
    s.seed = 43;
    CHECK(max_abs_diff(a, sample_noise_field(s, g)) > 0.1);
    s.amplitude = 0.0;
    CHECK(sample_noise_field(s, g).sup_norm() == 0.0);
    s.amplitude = 2.0;
    s.seed = 42;
    CHECK(max_abs_diff(sample_noise_field(s, g), 2.0 * a) < 1e-13);
    s.mol = 1.0 / 40;
    try {
        sample_noise_field(s, g);
        FAIL("expected a configuration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::configuration);
    }
}

TEST_CASE("noise: coefficients follow the roll-off with unit variance")
{
    const auto g = SpaceGrid::make(1, 256);
    NoiseSpec s;
    s.mol = 1.0 / 32;
    double acc = 0.0;
    int count = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        s.seed = seed;
        const auto c = sample_noise_field(s, g).spectrum().coeffs;
        for (std::size_t i = 1; i < g.size(); ++i) {
            const Freq k = freq_at(g, i);
            if (k.nyquist || std::abs(k.k[0]) > 16) continue;
            acc += std::norm(c[i]) / std::exp(-2.0 * s.mol * s.mol * k.norm2());
            ++count;
        }
    }
    CHECK(acc / count == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("noise: measured exponent decreases as the mollifier shrinks")
{
    const auto g = SpaceGrid::make(1, 1024);
    std::vector<double> means;
    for (double mol : {1.0 / 4, 1.0 / 8, 1.0 / 16}) {
        double m = 0.0;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            NoiseSpec s;
            s.seed = seed;
            s.mol = mol;
            m += estimate_regularity(sample_noise_field(s, g), 0, 5).alpha / 3.0;
        }
        means.push_back(m);
    }
    CHECK(means[0] > means[1]);
    CHECK(means[1] > means[2]);
    CHECK(means[2] > -0.5 - 0.2);
}

TEST_CASE("noise: space-time mode varies in time and stays deterministic")
{
    const auto g = SpaceGrid::make(1, 32);
    NoiseSpec s;
    s.time_dependent = true;
    const auto a = sample_noise(s, g, 10, 0.01), b = sample_noise(s, g, 10, 0.01);
    CHECK(stf_diff(a, b) == 0.0);
    CHECK(max_abs_diff(a.slice(0), a.slice(5)) > 1e-3);
    s.time_dependent = false;
    const auto c = sample_noise(s, g, 10, 0.01);
    CHECK(max_abs_diff(c.slice(0), c.slice(10)) == 0.0);
}

TEST_CASE("letters: seed, chain residual, resonant symmetry, vector-field term")
{
    const auto R = small_refs(2);
    const Alphabet& A = R.layout.alphabet;
    const auto& Z1 = R.letters[0];
    CHECK(Z1.slice(0).sup_norm() == 0.0);
    CHECK(stf_diff(Z1, duhamel_inverse(R.noise, op1)) == 0.0);

    const int z2 = *A.find("IL(Z)");
    const int z3 = *A.find("IL^2(Z)");
    CHECK(R.letters[std::size_t(z2)].slice(0).sup_norm() == 0.0);
    // (d_t + L) Z3 = Lp Z2 away from the initial layer, second order in dt
    auto residual = [&](const ReferenceData& r) {
        const int mid = r.steps() / 2;
        const auto res = apply_parabolic(r.letters[std::size_t(z3)], op1) - apply_lp(r.letters[std::size_t(z2)], op1);
        return res.slice(mid).sup_norm() / apply_lp(r.letters[std::size_t(z2)], op1).slice(mid).sup_norm();
    };
    const auto Rf = small_refs(2, {}, 40);
    const double coarse = residual(R), fine = residual(Rf);
    CHECK(coarse < 1e-2);
    CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.15));

    const int pi = *A.find("Pi(Z,Z)");
    CHECK(stf_diff(R.letters[std::size_t(pi)], resonant(Z1, Z1)) == 0.0);
    const auto& sym = R.letters[std::size_t(pi)];
    CHECK(stf_diff(resonant(Z1, Z1), sym) < 1e-15);

    const auto& v = R.term({TermKind::zeta_v, {0}, 0});
    CHECK(stf_diff(v, apply_V(Z1, op1, 0)) == 0.0);
    const int iv = *A.find("IV0[Z]");
    CHECK(stf_diff(R.letters[std::size_t(iv)], duhamel_inverse(v, op1)) < 1e-15);
}

TEST_CASE("terms: defining compositions")
{
    const auto R = small_refs(1);
    const Alphabet& A = R.layout.alphabet;
    const auto& Z = R.letters[0];
    const auto& zeta = R.noise;
    CHECK(stf_diff(R.term({TermKind::zeta1, {0}, -1}), product(Z, zeta) - para(Z, zeta)) < 1e-14);
    const int z2 = *A.find("IL(Z)");
    const auto& Z2 = R.letters[std::size_t(z2)];
    CHECK(stf_diff(R.term({TermKind::zeta2_word, {0, z2}, -1}),
                   -1.0 * (apply_L(para_tilde(Z2, Z, op1), op1) - para(Z2, apply_L(Z, op1)))) < 1e-12);
    CHECK(stf_diff(R.term({TermKind::zeta2_sentence, {0, z2}, -1}),
                   product(Z, apply_lp(Z2, op1)) - para(Z, apply_lp(Z2, op1))) < 1e-14);
    // terms exist even where the chain cap removed the letter
    CHECK_FALSE(A.find("I1[IL(Z),IL(Z)]").has_value());
    CHECK(R.find({TermKind::zeta1, {z2, z2}, -1}) != nullptr);
    CHECK_THROWS_AS(evaluate_term({TermKind::zeta_v, {0, 0}, 0}, R.letters, R.noise, op1), Error);
}

TEST_CASE("zero noise gives zero data")
{
    NoiseSpec s;
    s.amplitude = 0.0;
    const auto R = small_refs(1, s);
    for (const auto& l : R.letters) CHECK(l.sup_norm() == 0.0);
    for (const auto& t : R.terms) CHECK(t.field.sup_norm() == 0.0);
    const auto rep = verify_assumption_a(norm_records(R), 2);
    CHECK(rep.degenerate);
}

TEST_CASE("exponent table at mol = 1/8: measured >= nominal - 0.2")
{
    const auto R = small_refs(1);
    for (std::size_t i = 0; i < R.letters.size(); ++i) CHECK(R.letter_exponents[i].ok(0.2));
    for (const auto& t : R.terms) CHECK(t.exponent.ok(0.2));
}

TEST_CASE("cache coherence: single-letter re-evaluation matches the build")
{
    const auto R = small_refs(1);
    const Alphabet& A = R.layout.alphabet;
    std::vector<std::optional<SpaceTimeField>> done(R.letters.begin(), R.letters.end());
    for (int i = 0; i < A.size(); i += 7) {
        const auto again = evaluate_letter(A, i, done, R.noise, op1);
        CHECK(stf_diff(again, R.letters[std::size_t(i)]) <= 1e-12 * std::max(1.0, again.sup_norm()));
    }
    std::vector<std::optional<SpaceTimeField>> empty(R.letters.size());
    CHECK_THROWS_AS(evaluate_letter(A, *A.find("IL(Z)"), empty, R.noise, op1), Error);
}

TEST_CASE("determinism: manifests and fields byte-identical")
{
    const auto a = small_refs(1), b = small_refs(1);
    CHECK(reference_manifest_json(a) == reference_manifest_json(b));
    for (std::size_t i = 0; i < a.letters.size(); ++i)
        CHECK(encode_pcf(a.letters[i].slices()) == encode_pcf(b.letters[i].slices()));
}

TEST_CASE("chain-letter norm envelope: bound, amplitude scaling and insufficient data")
{
    NoiseSpec s;
    const auto R = small_refs(2, s);
    CHECK_THROWS_AS(verify_assumption_a(norm_records(R), 1), Error);
    const auto rep = verify_assumption_a(norm_records(R), 2);
    CHECK(rep.headline.skeleton_id == "Z");
    CHECK(rep.headline.points == 3);
    CHECK(rep.r2() > 0.0);
    for (const auto& r : norm_records(R))
        if (r.skeleton_id == "Z") CHECK(r.norm <= rep.headline.k_envelope * std::pow(rep.c_fit(), r.n_tau) * (1 + 1e-12));
    s.amplitude = 2.0;
    const auto rep2 = verify_assumption_a(norm_records(small_refs(2, s)), 2);
    CHECK(rep2.k_fit() / rep.k_fit() == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::abs(rep2.c_fit() / rep.c_fit() - 1.0) < 0.1);
}

TEST_CASE("reference store round trip")
{
    const auto R = small_refs(0);
    const auto dir = std::filesystem::temp_directory_path() / "paracalc_refs_test";
    std::filesystem::remove_all(dir);
    write_reference_store(R, dir.string());
    const auto [records, cap] = read_store_norms(dir.string());
    CHECK(cap == 0);
    REQUIRE(records.size() == R.letters.size());
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(records[i].norm == R.letter_norms[i]);
    const auto back = read_pcf((dir / "letters" / "3.pcf").string());
    CHECK(back.slices.size() == R.letters[3].slice_count());
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(read_store_norms(dir.string()), Error);
}
