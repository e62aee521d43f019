#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "paracalc/torus_fields.hpp"
#include "test_support.hpp"

using namespace paracalc;
using namespace testing_support;

namespace {

/// Naive O(N^2) DFT of a 1d field, normalized by 1/N.
std::vector<cplx> naive_dft(const Field& f)
{
    const int n = f.grid().n;
    std::vector<cplx> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        cplx s = 0;
        for (int j = 0; j < n; ++j) s += f[std::size_t(j)] * std::polar(1.0, -two_pi * k * j / n);
        out[std::size_t(k)] = s / double(n);
    }
    return out;
}

}  // namespace

TEST_CASE("grid validation")
{
    CHECK_NOTHROW(SpaceGrid::make(1, 8));
    CHECK_NOTHROW(SpaceGrid::make(2, 64));
    CHECK_THROWS_AS(SpaceGrid::make(1, 12), Error);
    CHECK_THROWS_AS(SpaceGrid::make(1, 4), Error);
    CHECK_THROWS_AS(SpaceGrid::make(3, 8), Error);
    try {
        SpaceGrid::make(1, 24);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::configuration);
    }
    CHECK(SpaceGrid::make(1, 64).jmax() == 5);
    CHECK(SpaceGrid::make(2, 16).size() == 256);
}

TEST_CASE("frequency layout")
{
    auto g = SpaceGrid::make(1, 16);
    CHECK(freq_at(g, 0).k[0] == 0);
    CHECK(freq_at(g, 8).k[0] == 8);
    CHECK(freq_at(g, 8).nyquist);
    CHECK(freq_at(g, 9).k[0] == -7);
    auto g2 = SpaceGrid::make(2, 8);
    auto f = freq_at(g2, 7 * 8 + 4);
    CHECK(f.k[0] == -1);
    CHECK(f.k[1] == 4);
    CHECK(f.max_norm() == 4);
}

TEST_CASE("transform: constant and cosine oracles")
{
    auto g = SpaceGrid::make(1, 16);
    auto one = Field::constant(g, 1.0);
    const auto& s1 = forward(one).coeffs;
    CHECK(std::abs(s1[0] - cplx(1.0)) < 1e-15);
    for (std::size_t i = 1; i < s1.size(); ++i) CHECK(std::abs(s1[i]) < 1e-15);

    auto c = Field::from_function(g, [](double x, double) { return std::cos(two_pi * x); });
    auto spec = forward(c).coeffs;
    auto oracle = naive_dft(c);
    for (std::size_t i = 0; i < spec.size(); ++i) CHECK(std::abs(spec[i] - oracle[i]) < 1e-14);
    CHECK(std::abs(spec[1] - cplx(0.5)) < 1e-14);
    CHECK(std::abs(spec[15] - cplx(0.5)) < 1e-14);
}

TEST_CASE("transform: round trip, Parseval, Hermitian symmetry")
{
    for (int dim : {1, 2}) {
        auto g = SpaceGrid::make(dim, dim == 1 ? 128 : 32);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto f = random_field(g, seed);
            auto s = forward(f);
            auto back = inverse(s);
            CHECK(max_abs_diff(back, f) <= 1e-12 * f.sup_norm());
            double energy_x = 0, energy_k = 0;
            for (double v : f.values()) energy_x += v * v;
            energy_x /= double(g.size());
            for (auto c : s.coeffs) energy_k += std::norm(c);
            CHECK(std::abs(energy_x - energy_k) <= 1e-10 * energy_x);
            if (dim == 1) {
                for (int k = 1; k < g.n; ++k)
                    CHECK(std::abs(s.coeffs[std::size_t(k)] - std::conj(s.coeffs[std::size_t(g.n - k)])) < 1e-12);
            }
        }
    }
}

TEST_CASE("spectrum cache is invalidated on mutation")
{
    auto g = SpaceGrid::make(1, 16);
    auto f = Field::constant(g, 1.0);
    CHECK(std::abs(f.spectrum().coeffs[0] - cplx(1.0)) < 1e-15);
    f.mutable_values()[0] = 17.0;
    CHECK(std::abs(f.spectrum().coeffs[0] - cplx(2.0)) < 1e-14);
}

TEST_CASE("multipliers")
{
    auto g = SpaceGrid::make(1, 64);
    auto c = Field::from_function(g, [](double x, double) { return std::cos(two_pi * x); });
    CHECK(max_abs_diff(apply_multiplier(c, [](const Freq&) { return 1.0; }), c) < 1e-14);
    CHECK(apply_multiplier(c, [](const Freq&) { return 0.0; }).sup_norm() == 0.0);

    auto lap = apply_multiplier(c, [](const Freq& k) { return -two_pi * two_pi * k.norm2(); });
    // Finite-difference Laplacian converges to the spectral one at O(h^2).
    Field fd(g);
    const double h = g.spacing();
    for (int i = 0; i < g.n; ++i)
        fd.mutable_values()[std::size_t(i)] =
            (c[std::size_t((i + 1) % g.n)] - 2 * c[std::size_t(i)] + c[std::size_t((i + g.n - 1) % g.n)]) / (h * h);
    CHECK(max_abs_diff(lap, fd) < 0.05);
    CHECK(max_abs_diff(lap, -two_pi * two_pi * c) < 1e-10);

    CHECK_THROWS_AS(apply_multiplier(c, [](const Freq&) { return std::nan(""); }), Error);

    auto f = random_field(SpaceGrid::make(2, 16), 3);
    auto m1 = [](const Freq& k) { return 1.0 / (1.0 + k.norm2()); };
    auto m2 = [](const Freq& k) { return std::cos(0.3 * k.k[0]) + 2.0; };
    auto lhs = apply_multiplier(apply_multiplier(f, m1), m2);
    auto rhs = apply_multiplier(f, [&](const Freq& k) { return m1(k) * m2(k); });
    CHECK(max_abs_diff(lhs, rhs) < 1e-12 * f.sup_norm());
}

TEST_CASE("derivatives and L")
{
    auto g = SpaceGrid::make(2, 32);
    auto f = Field::from_function(g, [](double x, double y) { return std::sin(two_pi * 2 * x) * std::cos(two_pi * y); });
    auto dx = partial(f, 0);
    auto oracle = Field::from_function(
        g, [](double x, double y) { return two_pi * 2 * std::cos(two_pi * 2 * x) * std::cos(two_pi * y); });
    CHECK(max_abs_diff(dx, oracle) < 1e-11);
    auto op = OperatorL::constant(0.7);
    auto lf = apply_L(f, op);
    CHECK(max_abs_diff(lf, 0.7 * two_pi * two_pi * 5.0 * f) < 1e-9);
    // L = -sum V_i^2 on band-limited inputs without Nyquist content.
    Field vv(g);
    for (int i = 0; i < 2; ++i) vv -= apply_V(apply_V(f, op, i), op, i);
    CHECK(max_abs_diff(vv, lf) < 1e-9);
    // Nyquist mode is removed by odd symbols.
    auto ny = Field::from_function(SpaceGrid::make(1, 8), [](double x, double) { return std::cos(two_pi * 4 * x); });
    CHECK(partial(ny, 0).sup_norm() < 1e-12);
    CHECK_THROWS_AS(OperatorL::constant(-1.0), Error);
}

TEST_CASE("variable-coefficient L is pseudo-spectral only")
{
    auto g = SpaceGrid::make(1, 32);
    auto c = Field::constant(g, 2.0);
    auto op = OperatorL::variable_coefficient(c);
    auto f = smooth_field(g, 4);
    CHECK(max_abs_diff(apply_L(f, op), apply_L(f, OperatorL::constant(2.0))) < 1e-9);
    CHECK_THROWS_AS(heat_operator(f, op, 0.1, 1, HeatKind::Q), Error);
    try {
        heat_semigroup(f, op, 0.1);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unsupported);
    }
    CHECK_THROWS_AS(OperatorL::variable_coefficient(Field::constant(g, -1.0)), Error);
}

TEST_CASE("heat operators")
{
    auto g = SpaceGrid::make(1, 64);
    auto op = OperatorL::constant(1.0);
    auto f = smooth_field(g, 11, 4);
    CHECK(max_abs_diff(heat_operator(f, op, 1e-8, 2, HeatKind::P), f) <= 1e-6);
    CHECK(heat_operator(Field::constant(g, 3.0), op, 0.2, 1, HeatKind::Q).sup_norm() < 1e-15);
    CHECK_THROWS_AS(heat_operator(f, op, 0.0, 1, HeatKind::P), Error);
    CHECK_THROWS_AS(heat_operator(f, op, -1.0, 1, HeatKind::Q), Error);

    // -t d/dt P_t = Q_t, checked by a centered difference in t on the symbol.
    for (int b = 1; b <= 4; ++b) {
        for (double x : {0.1, 0.7, 2.5, 9.0}) {
            double h = 1e-5 * x;
            double dp = (heat_symbol(HeatKind::P, b, x + h) - heat_symbol(HeatKind::P, b, x - h)) / (2 * h);
            CHECK(std::abs(-x * dp - heat_symbol(HeatKind::Q, b, x)) < 1e-8);
        }
        CHECK(heat_symbol(HeatKind::P, b, 0.0) == 1.0);
    }
}

TEST_CASE("Q composition law")
{
    auto g = SpaceGrid::make(1, 64);
    auto op = OperatorL::constant(0.01);
    auto f = random_field(g, 21);
    const double t = 0.3, s = 0.55;
    for (int b = 1; b <= 3; ++b) {
        auto lhs = heat_operator(heat_operator(f, op, s, b, HeatKind::Q), op, t, b, HeatKind::Q);
        auto rhs = heat_operator(f, op, t + s, 2 * b, HeatKind::Q);
        double factor = std::pow(t * s / ((t + s) * (t + s)), b);
        // Exact for b = 1; higher orders carry the combinatorial factor (2b-1)!/((b-1)!)^2.
        double comb = std::tgamma(2.0 * b) / std::pow(std::tgamma(double(b)), 2);
        auto expected = (factor * comb) * rhs;
        CHECK(max_abs_diff(lhs, expected) <= 1e-10 * lhs.sup_norm());
        if (b == 1) CHECK(comb == doctest::Approx(1.0));
    }
}

TEST_CASE("semigroup property")
{
    auto g = SpaceGrid::make(2, 16);
    auto op = OperatorL::constant(0.05);
    auto f = random_field(g, 5);
    auto lhs = heat_semigroup(heat_semigroup(f, op, 0.01), op, 0.02);
    auto rhs = heat_semigroup(f, op, 0.03);
    CHECK(max_abs_diff(lhs, rhs) < 1e-12 * f.sup_norm());
}

TEST_CASE("space-time field invariants")
{
    auto g = SpaceGrid::make(1, 8);
    CHECK_THROWS_AS(SpaceTimeField({Field(g), Field(g)}, 0.1), Error);
    CHECK_THROWS_AS(SpaceTimeField({Field(g), Field(g), Field(SpaceGrid::make(1, 16))}, 0.1), Error);
    auto z = SpaceTimeField::zeros(g, 4, 0.25);
    CHECK(z.steps() == 4);
    CHECK(z.horizon() == doctest::Approx(1.0));
}

TEST_CASE("apply_parabolic")
{
    auto g = SpaceGrid::make(1, 32);
    auto op = OperatorL::constant(0.5);
    const double c0 = 0.5;

    // u = t gives 1 exactly (second-order stencils are exact on linear data).
    std::vector<Field> slices;
    const int M = 10;
    const double dt = 0.01;
    for (int m = 0; m <= M; ++m) slices.push_back(Field::constant(g, m * dt));
    auto lu = apply_parabolic(SpaceTimeField(slices, dt), op);
    for (const auto& s : lu.slices()) CHECK(max_abs_diff(s, Field::constant(g, 1.0)) < 1e-10);

    // time-constant field gives L u.
    auto f = smooth_field(g, 9);
    auto tc = apply_parabolic(SpaceTimeField::constant_in_time(f, 5, 0.1), op);
    for (const auto& s : tc.slices()) CHECK(max_abs_diff(s, apply_L(f, op)) < 1e-12 * apply_L(f, op).sup_norm());

    // heat solution: residual is O(dt^2).
    std::vector<double> errs;
    for (int mm : {20, 40, 80}) {
        double h = 0.1 / mm;
        std::vector<Field> sl;
        for (int m = 0; m <= mm; ++m) {
            double t = m * h;
            sl.push_back(Field::from_function(
                g, [&](double x, double) { return std::exp(-c0 * two_pi * two_pi * t) * std::cos(two_pi * x); }));
        }
        errs.push_back(apply_parabolic(SpaceTimeField(sl, h), op).sup_norm());
    }
    CHECK(errs[1] < errs[0] / 3.5);
    CHECK(errs[2] < errs[1] / 3.5);
}

TEST_CASE("duhamel_inverse: free flow and constant source")
{
    auto g = SpaceGrid::make(1, 32);
    auto op = OperatorL::constant(0.3);
    auto u0 = Field::from_function(g, [](double x, double) { return std::cos(two_pi * x); });
    auto u = duhamel_inverse(SpaceTimeField::zeros(g, 8, 0.01), u0, op);
    for (int m = 0; m <= 8; ++m) {
        double decay = std::exp(-0.3 * two_pi * two_pi * m * 0.01);
        CHECK(max_abs_diff(u.slice(m), decay * u0) <= 1e-8 * decay);
    }

    auto v = duhamel_inverse(SpaceTimeField::constant_in_time(Field::constant(g, 1.0), 8, 0.01), Field(g), op);
    for (int m = 0; m <= 8; ++m) CHECK(max_abs_diff(v.slice(m), Field::constant(g, m * 0.01)) < 1e-10);

    CHECK_THROWS_AS(duhamel_inverse(SpaceTimeField::zeros(g, 4, 0.1), Field(SpaceGrid::make(1, 16)), op), Error);
}

TEST_CASE("duhamel_inverse: residual converges at second order")
{
    auto g = SpaceGrid::make(1, 32);
    auto op = OperatorL::constant(0.1);
    auto a = smooth_field(g, 31, 3);
    auto b = smooth_field(g, 32, 3);
    const double T = 0.2;
    std::vector<double> lx, ly;
    for (int M : {40, 80, 160, 320}) {
        const double h = T / M;
        std::vector<Field> src;
        for (int m = 0; m <= M; ++m) {
            double t = m * h;
            src.push_back(std::cos(7.0 * t) * a + std::sin(3.0 * t + 0.4) * b);
        }
        SpaceTimeField gsrc(src, h);
        auto u = duhamel_inverse(gsrc, op);
        double res = (apply_parabolic(u, op) - gsrc).sup_norm();
        lx.push_back(std::log(h));
        ly.push_back(std::log(res));
    }
    double slope = fit_slope(lx, ly);
    MESSAGE("duhamel residual order " << slope);
    CHECK(slope >= 1.8);
    CHECK(slope <= 2.2);
}

TEST_CASE("duhamel discrete solution operator is contractive per mode")
{
    // (L + d_t)^{-1} L applied to bounded data stays bounded by the data at every stiffness.
    auto g = SpaceGrid::make(1, 64);
    auto op = OperatorL::constant(1.0);
    auto f = random_field(g, 77);
    auto lf = apply_L(SpaceTimeField::constant_in_time(f, 10, 0.01), op);
    auto u = duhamel_inverse(lf, op);
    for (const auto& s : u.slices()) {
        const auto& su = s.spectrum().coeffs;
        const auto& sf = f.spectrum().coeffs;
        for (std::size_t i = 0; i < su.size(); ++i) CHECK(std::abs(su[i]) <= std::abs(sf[i]) * (1 + 1e-12) + 1e-15);
    }
}

TEST_CASE("PCF round trip")
{
    auto g = SpaceGrid::make(2, 8);
    std::vector<Field> sl{random_field(g, 1), random_field(g, 2), random_field(g, 3)};
    auto bytes = encode_pcf(sl);
    CHECK(bytes.size() == 16 + 3 * 64 * 8);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[4] == 2);
    CHECK(bytes[8] == 8);
    CHECK(bytes[12] == 3);
    auto back = decode_pcf(bytes);
    REQUIRE(back.slices.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(max_abs_diff(back.slices[std::size_t(i)], sl[std::size_t(i)]) == 0.0);

    auto path = (std::filesystem::temp_directory_path() / "paracalc_rt.pcf").string();
    write_pcf(path, SpaceTimeField(sl, 0.1));
    auto again = read_pcf(path);
    CHECK(again.grid == g);
    CHECK(max_abs_diff(again.slices[2], sl[2]) == 0.0);
    std::filesystem::remove(path);

    bytes[0] = 'X';
    try {
        decode_pcf(bytes);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
    }
    CHECK_THROWS_AS(read_pcf("/nonexistent/dir/file.pcf"), Error);
}
