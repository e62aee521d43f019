#include <doctest.h>

#include <cmath>

#include "paracalc/littlewood_paley.hpp"
#include "paracalc/synthetic.hpp"
#include "test_support.hpp"

using namespace paracalc;
using namespace testing_support;

TEST_CASE("block index rule")
{
    auto g = SpaceGrid::make(1, 64);
    auto at = [&](int k) { return block_of(freq_at(g, std::size_t(k >= 0 ? k : g.n + k))); };
    CHECK(at(0) == -1);
    CHECK(at(1) == 0);
    CHECK(at(-1) == 0);
    CHECK(at(2) == 1);
    CHECK(at(3) == 2);
    CHECK(at(4) == 2);
    CHECK(at(5) == 3);
    CHECK(at(32) == 5);
    CHECK(block_count(g) == 7);
}

TEST_CASE("decompose: single-block oracles")
{
    auto g = SpaceGrid::make(1, 32);
    auto c4 = Field::from_function(g, [](double x, double) { return std::cos(two_pi * 4 * x); });
    auto d = decompose(c4);
    for (int j = -1; j <= d.jmax; ++j) {
        if (j == 2) CHECK(d.sup(j) == doctest::Approx(1.0).epsilon(1e-12));
        else CHECK(d.sup(j) < 1e-14);
    }
    auto one = decompose(Field::constant(g, 1.0));
    CHECK(one.sup(-1) == doctest::Approx(1.0));
    for (int j = 0; j <= one.jmax; ++j) CHECK(one.sup(j) < 1e-15);
}

TEST_CASE("decompose: partition and orthogonality on a seeded corpus")
{
    for (int dim : {1, 2}) {
        auto g = SpaceGrid::make(dim, dim == 1 ? 64 : 16);
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            auto f = random_field(g, seed);
            auto d = decompose(f);
            CHECK(max_abs_diff(d.reconstruct(), f) <= 1e-12 * f.sup_norm());
            for (int i = -1; i <= d.jmax; ++i)
                for (int j = -1; j <= d.jmax; ++j)
                    if (i != j) CHECK(block(d.block(j), i).sup_norm() <= 1e-13 * f.sup_norm());
            auto ds = decompose(f, Cutoff::smooth);
            CHECK(max_abs_diff(ds.reconstruct(), f) <= 1e-12 * f.sup_norm());
        }
    }
}

TEST_CASE("low pass equals partial block sums")
{
    auto g = SpaceGrid::make(1, 64);
    auto f = random_field(g, 8);
    auto d = decompose(f);
    Field acc(g);
    for (int j = -1; j <= 3; ++j) acc += d.block(j);
    CHECK(max_abs_diff(low_pass(f, 3), acc) < 1e-12);
    CHECK(low_pass(f, -2).sup_norm() == 0.0);
}

TEST_CASE("besov norm")
{
    auto g = SpaceGrid::make(1, 32);
    auto c4 = Field::from_function(g, [](double x, double) { return std::cos(two_pi * 4 * x); });
    CHECK(besov_norm(c4, 1.0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(besov_norm(Field(g), 0.5) == 0.0);
    auto f = random_field(g, 3);
    CHECK(besov_norm(-2.5 * f, 0.3) == doctest::Approx(2.5 * besov_norm(f, 0.3)).epsilon(1e-12));
    CHECK_THROWS_AS(besov_norm(f, 3.5), Error);
    // finite-resolution monotonicity bound
    for (double a : {0.2, 0.9}) {
        for (double ap : {-0.5, 0.1}) {
            if (a < ap) continue;
            const int J = g.jmax();
            CHECK(besov_norm(f, a) <= besov_norm(f, ap) * std::pow(2.0, J * (a - ap)) * (1 + 1e-12));
        }
    }
}

TEST_CASE("estimate_regularity: constructed decay oracle")
{
    auto g = SpaceGrid::make(1, 256);
    auto f = Field::from_function(g, [](double x, double) {
        double s = 0;
        for (int j = 2; j <= 6; ++j) s += std::pow(2.0, -0.7 * j) * std::cos(two_pi * std::ldexp(1.0, j) * x);
        return s;
    });
    auto e = estimate_regularity(f, 2, 6);
    CHECK(std::abs(e.alpha - 0.7) <= 0.05);
    auto e_def = estimate_regularity(f);
    CHECK(std::abs(e_def.alpha - 0.7) <= 0.05);
    CHECK(e.r2 >= 0.0);
    CHECK(e.r2 <= 1.0);
    auto csv = estimate_csv(e);
    CHECK(csv.rfind("j,log2_block_sup,fitted_line,alpha,r2\n", 0) == 0);
}

TEST_CASE("estimate_regularity: degenerate inputs")
{
    auto g = SpaceGrid::make(1, 128);
    auto single = Field::from_function(g, [](double x, double) { return std::cos(two_pi * 8 * x); });
    try {
        estimate_regularity(single);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::degenerate_input);
    }
    CHECK_THROWS_AS(estimate_regularity(single, 1, 3), Error);
}

TEST_CASE("estimate_regularity: smooth bump")
{
    auto g = SpaceGrid::make(1, 128);
    auto bump = Field::from_function(g, [](double x, double) {
        double s = 0;
        for (int p = -2; p <= 2; ++p) s += std::exp(-std::pow(x - 0.5 + p, 2) / (2 * 0.06 * 0.06));
        return s;
    });
    auto e = estimate_regularity(bump);
    MESSAGE("bump exponent " << e.alpha);
    CHECK(e.alpha >= 2.0);
}

TEST_CASE("estimate_regularity: synthetic lacunary family")
{
    auto g = SpaceGrid::make(1, 256);
    for (double beta : {0.3, 0.5, 0.9, 1.4}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            LacunarySpec spec;
            spec.alpha = beta;
            auto f = lacunary_field(g, spec, seed);
            auto e = estimate_regularity(f);
            CHECK(std::abs(e.alpha - beta) <= 0.05);
            CHECK(e.r2 >= 0.98);
        }
    }
    auto g2 = SpaceGrid::make(2, 128);
    LacunarySpec spec;
    spec.alpha = -0.4;
    auto e2 = estimate_regularity(lacunary_field(g2, spec, 3));
    CHECK(std::abs(e2.alpha + 0.4) <= 0.05);
}

TEST_CASE("space-time norms")
{
    auto g = SpaceGrid::make(1, 32);
    auto f = Field::from_function(g, [](double x, double) { return std::cos(two_pi * 4 * x); });
    std::vector<Field> sl{f, 2.0 * f, 3.0 * f};
    SpaceTimeField u(sl, 0.25);
    CHECK(besov_norm(u, 1.0) == doctest::Approx(12.0));
    // Hoelder part: |3f - f| / (0.5)^{1/2} = 2 / sqrt(0.5)
    CHECK(parabolic_norm(u, 1.0) == doctest::Approx(12.0 + 2.0 / std::sqrt(0.5)));
}
