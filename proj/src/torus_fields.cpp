#include "paracalc/torus_fields.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "paracalc/fft.hpp"

namespace paracalc {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::vector<cplx> to_complex(std::span<const double> v)
{
    std::vector<cplx> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = cplx(v[i], 0.0);
    return out;
}

}  // namespace

// ---------------------------------------------------------------- grid

SpaceGrid SpaceGrid::make(int dim, int n)
{
    require(dim == 1 || dim == 2, ErrorKind::configuration, "grid dimension must be 1 or 2");
    require(n >= 8 && std::has_single_bit(unsigned(n)), ErrorKind::configuration,
            "grid size must be a power of two >= 8, got " + std::to_string(n));
    return SpaceGrid{dim, n};
}

int SpaceGrid::jmax() const { return std::bit_width(unsigned(n)) - 2; }

double Freq::norm() const { return std::sqrt(norm2()); }

int Freq::max_norm() const { return dim == 1 ? std::abs(k[0]) : std::max(std::abs(k[0]), std::abs(k[1])); }

Freq freq_at(const SpaceGrid& g, std::size_t idx)
{
    const int half = g.n / 2;
    auto wrap = [&](int i) { return i <= half ? i : i - g.n; };
    Freq f;
    f.dim = g.dim;
    if (g.dim == 1) {
        f.k = {wrap(int(idx)), 0};
        f.nyquist = f.k[0] == half;
    } else {
        f.k = {wrap(int(idx / g.n)), wrap(int(idx % g.n))};
        f.nyquist = f.k[0] == half || f.k[1] == half;
    }
    return f;
}

void check_same_grid(const SpaceGrid& a, const SpaceGrid& b, const char* where)
{
    if (a != b)
        fail(ErrorKind::configuration, std::string(where) + ": grid mismatch (" + std::to_string(a.dim) + "d N=" +
                                           std::to_string(a.n) + " vs " + std::to_string(b.dim) + "d N=" +
                                           std::to_string(b.n) + ")");
}

// ---------------------------------------------------------------- field

Field::Field(const SpaceGrid& g) : grid_(g), values_(g.size(), 0.0) {}

Field::Field(const SpaceGrid& g, std::vector<double> values) : grid_(g), values_(std::move(values))
{
    require(values_.size() == g.size(), ErrorKind::configuration, "field value count does not match grid");
}

std::vector<double>& Field::mutable_values()
{
    std::atomic_store(&spec_, std::shared_ptr<const Spectrum>());
    return values_;
}

const Spectrum& Field::spectrum() const
{
    auto cur = std::atomic_load(&spec_);
    if (!cur) {
        auto s = std::make_shared<Spectrum>();
        s->grid = grid_;
        s->coeffs = to_complex(values_);
        fft::forward_normalized(s->coeffs, grid_.dim, grid_.n);
        cur = s;
        std::atomic_store(&spec_, cur);
    }
    return *cur;
}

double Field::sup_norm() const
{
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double Field::l2_norm() const
{
    double s = 0.0;
    for (double v : values_) s += v * v;
    return values_.empty() ? 0.0 : std::sqrt(s / double(values_.size()));
}

double Field::mean() const
{
    double s = 0.0;
    for (double v : values_) s += v;
    return values_.empty() ? 0.0 : s / double(values_.size());
}

bool Field::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Field& Field::operator+=(const Field& o)
{
    check_same_grid(grid_, o.grid_, "field +=");
    auto& v = mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.values_[i];
    return *this;
}

Field& Field::operator-=(const Field& o)
{
    check_same_grid(grid_, o.grid_, "field -=");
    auto& v = mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.values_[i];
    return *this;
}

Field& Field::operator*=(double s)
{
    auto& v = mutable_values();
    for (auto& x : v) x *= s;
    return *this;
}

Field Field::from_function(const SpaceGrid& g, const std::function<double(double, double)>& f)
{
    Field out(g);
    auto& v = out.values_;
    const double h = g.spacing();
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i) v[std::size_t(i)] = f(i * h, 0.0);
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) v[std::size_t(i) * g.n + j] = f(i * h, j * h);
    }
    return out;
}

Field Field::constant(const SpaceGrid& g, double c) { return Field(g, std::vector<double>(g.size(), c)); }

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }
Field operator*(Field a, double s) { return a *= s; }
Field operator-(Field a) { return a *= -1.0; }

Field pointwise(const Field& a, const Field& b)
{
    check_same_grid(a.grid(), b.grid(), "pointwise");
    Field out(a.grid());
    auto& v = out.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] * b[i];
    return out;
}

Field map_values(const Field& a, const std::function<double(double)>& fn)
{
    Field out(a.grid());
    auto& v = out.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(a[i]);
    return out;
}

// ---------------------------------------------------------------- transforms

Spectrum forward(const Field& f)
{
    require(f.all_finite(), ErrorKind::domain, "transform: non-finite field values");
    return f.spectrum();
}

Field inverse(const Spectrum& s)
{
    std::vector<cplx> data = s.coeffs;
    fft::transform(data, s.grid.dim, s.grid.n, +1);
    std::vector<double> v(data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = data[i].real();
    return Field(s.grid, std::move(v));
}

Spectrum apply_multiplier(const Spectrum& s, const RealSymbol& symbol)
{
    Spectrum out = s;
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) {
        double m = symbol(freq_at(s.grid, i));
        require(!std::isnan(m), ErrorKind::domain, "multiplier symbol is NaN");
        out.coeffs[i] *= m;
    }
    return out;
}

Field apply_multiplier(const Field& f, const RealSymbol& symbol)
{
    return inverse(apply_multiplier(f.spectrum(), symbol));
}

Field apply_complex_multiplier(const Field& f, const ComplexSymbol& symbol)
{
    Spectrum out = f.spectrum();
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) {
        cplx m = symbol(freq_at(out.grid, i));
        require(!std::isnan(m.real()) && !std::isnan(m.imag()), ErrorKind::domain, "multiplier symbol is NaN");
        out.coeffs[i] *= m;
    }
    return inverse(out);
}

// ---------------------------------------------------------------- operator L

OperatorL OperatorL::constant(double c0)
{
    require(c0 > 0.0 && std::isfinite(c0), ErrorKind::domain, "reference diffusivity must be positive");
    OperatorL op;
    op.c0 = c0;
    return op;
}

OperatorL OperatorL::variable_coefficient(const Field& c)
{
    double lo = *std::min_element(c.values().begin(), c.values().end());
    require(lo > 0.0, ErrorKind::domain, "variable diffusivity must be positive on the grid");
    OperatorL op;
    op.c0 = c.mean();
    op.variable = c;
    return op;
}

double OperatorL::symbol(const Freq& k) const { return c0 * two_pi * two_pi * k.norm2(); }

void OperatorL::require_constant(const char* where) const
{
    if (!is_constant())
        fail(ErrorKind::unsupported, std::string(where) + ": unsupported in variable-coefficient mode");
}

Field partial(const Field& f, int axis)
{
    require(axis >= 0 && axis < f.grid().dim, ErrorKind::configuration, "axis out of range");
    const int half = f.grid().n / 2;
    return apply_complex_multiplier(f, [&](const Freq& k) {
        if (k.k[std::size_t(axis)] == half) return cplx(0.0, 0.0);
        return cplx(0.0, two_pi * k.k[std::size_t(axis)]);
    });
}

Field apply_V(const Field& f, const OperatorL& op, int axis)
{
    if (op.is_constant()) return std::sqrt(op.c0) * partial(f, axis);
    Field root = map_values(*op.variable, [](double c) { return std::sqrt(c); });
    return pointwise(root, partial(f, axis));
}

Field apply_L(const Field& f, const OperatorL& op)
{
    if (op.is_constant()) return apply_multiplier(f, [&](const Freq& k) { return op.symbol(k); });
    // Pseudo-spectral: L f = -sum_i V_i V_i f with V_i = sqrt(c) d_i.
    Field out(f.grid());
    for (int i = 0; i < f.grid().dim; ++i) out -= apply_V(apply_V(f, op, i), op, i);
    return out;
}

Field apply_L_inverse(const Field& f, const OperatorL& op)
{
    op.require_constant("L inverse");
    return apply_multiplier(f, [&](const Freq& k) {
        double m = op.symbol(k);
        return m > 0.0 ? 1.0 / m : 0.0;
    });
}

Field heat_semigroup(const Field& f, const OperatorL& op, double t)
{
    op.require_constant("heat semigroup");
    require(t >= 0.0, ErrorKind::domain, "heat semigroup: negative time");
    return apply_multiplier(f, [&](const Freq& k) { return std::exp(-t * op.symbol(k)); });
}

double heat_symbol(HeatKind kind, int b, double x)
{
    if (kind == HeatKind::Q) {
        double fact = std::tgamma(double(b));
        return x == 0.0 ? 0.0 : std::exp(b * std::log(x) - x) / fact;
    }
    double poly = 0.0, term = 1.0;
    for (int j = 0; j < b; ++j) {
        poly += term;
        term *= x / double(j + 1);
    }
    return poly * std::exp(-x);
}

Field heat_operator(const Field& f, const OperatorL& op, double t, int b, HeatKind kind)
{
    op.require_constant("heat operator");
    require(t > 0.0, ErrorKind::domain, "heat operator: t must be positive");
    require(b >= 1, ErrorKind::domain, "heat operator: order b must be >= 1");
    return apply_multiplier(f, [&](const Freq& k) { return heat_symbol(kind, b, t * op.symbol(k)); });
}

// ---------------------------------------------------------------- space-time

SpaceTimeField::SpaceTimeField(std::vector<Field> slices, double dt) : slices_(std::move(slices)), dt_(dt)
{
    require(slices_.size() >= 3, ErrorKind::configuration, "space-time field needs at least 3 slices (M >= 2)");
    require(dt > 0.0 && std::isfinite(dt), ErrorKind::configuration, "time step must be positive");
    for (const auto& s : slices_) check_same_grid(slices_.front().grid(), s.grid(), "space-time field");
}

SpaceTimeField SpaceTimeField::constant_in_time(const Field& f, int m_steps, double dt)
{
    return SpaceTimeField(std::vector<Field>(std::size_t(m_steps) + 1, f), dt);
}

SpaceTimeField SpaceTimeField::zeros(const SpaceGrid& g, int m_steps, double dt)
{
    return constant_in_time(Field(g), m_steps, dt);
}

double SpaceTimeField::sup_norm() const
{
    double m = 0.0;
    for (const auto& s : slices_) m = std::max(m, s.sup_norm());
    return m;
}

bool SpaceTimeField::same_time_grid(const SpaceTimeField& o) const
{
    return slices_.size() == o.slices_.size() && std::abs(dt_ - o.dt_) <= 1e-14 * dt_ && grid() == o.grid();
}

void check_same_time_grid(const SpaceTimeField& a, const SpaceTimeField& b, const char* where)
{
    check_same_grid(a.grid(), b.grid(), where);
    if (!a.same_time_grid(b)) fail(ErrorKind::configuration, std::string(where) + ": time grid mismatch");
}

SpaceTimeField& SpaceTimeField::operator+=(const SpaceTimeField& o)
{
    check_same_time_grid(*this, o, "space-time +=");
    for (std::size_t m = 0; m < slices_.size(); ++m) slices_[m] += o.slices_[m];
    return *this;
}

SpaceTimeField& SpaceTimeField::operator-=(const SpaceTimeField& o)
{
    check_same_time_grid(*this, o, "space-time -=");
    for (std::size_t m = 0; m < slices_.size(); ++m) slices_[m] -= o.slices_[m];
    return *this;
}

SpaceTimeField& SpaceTimeField::operator*=(double s)
{
    for (auto& f : slices_) f *= s;
    return *this;
}

SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b) { return a += b; }
SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b) { return a -= b; }
SpaceTimeField operator*(double s, SpaceTimeField a) { return a *= s; }

SpaceTimeField map_slices(const SpaceTimeField& a, const std::function<Field(const Field&)>& fn)
{
    std::vector<Field> out;
    out.reserve(a.slice_count());
    for (const auto& s : a.slices()) out.push_back(fn(s));
    return SpaceTimeField(std::move(out), a.dt());
}

SpaceTimeField zip_slices(const SpaceTimeField& a, const SpaceTimeField& b,
                          const std::function<Field(const Field&, const Field&)>& fn)
{
    check_same_time_grid(a, b, "zip slices");
    std::vector<Field> out;
    out.reserve(a.slice_count());
    for (std::size_t m = 0; m < a.slice_count(); ++m) out.push_back(fn(a.slices()[m], b.slices()[m]));
    return SpaceTimeField(std::move(out), a.dt());
}

SpaceTimeField apply_L(const SpaceTimeField& f, const OperatorL& op)
{
    return map_slices(f, [&](const Field& s) { return apply_L(s, op); });
}

SpaceTimeField apply_V(const SpaceTimeField& f, const OperatorL& op, int axis)
{
    return map_slices(f, [&](const Field& s) { return apply_V(s, op, axis); });
}

SpaceTimeField time_derivative(const SpaceTimeField& u)
{
    const int m_last = u.steps();
    require(m_last >= 2, ErrorKind::configuration, "time derivative needs at least 3 slices");
    const double inv = 1.0 / (2.0 * u.dt());
    std::vector<Field> out;
    out.reserve(u.slice_count());
    for (int m = 0; m <= m_last; ++m) {
        Field d(u.grid());
        if (m == 0) {
            d = (-3.0 * inv) * u.slice(0) + (4.0 * inv) * u.slice(1) - inv * u.slice(2);
        } else if (m == m_last) {
            d = (3.0 * inv) * u.slice(m) - (4.0 * inv) * u.slice(m - 1) + inv * u.slice(m - 2);
        } else {
            d = inv * (u.slice(m + 1) - u.slice(m - 1));
        }
        out.push_back(std::move(d));
    }
    return SpaceTimeField(std::move(out), u.dt());
}

SpaceTimeField apply_parabolic(const SpaceTimeField& u, const OperatorL& op)
{
    return time_derivative(u) + apply_L(u, op);
}

SpaceTimeField duhamel_inverse(const SpaceTimeField& source, const Field& u0, const OperatorL& op)
{
    op.require_constant("duhamel inverse");
    check_same_grid(source.grid(), u0.grid(), "duhamel inverse");
    const SpaceGrid g = source.grid();
    const double h = source.dt();
    const std::size_t modes = g.size();

    std::vector<double> decay(modes), w0(modes), w1(modes);
    for (std::size_t i = 0; i < modes; ++i) {
        const double z = h * op.symbol(freq_at(g, i));
        const double e = std::exp(-z);
        decay[i] = e;
        if (z < 1e-3) {
            w0[i] = h * (0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0);
            w1[i] = h * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0);
        } else {
            w0[i] = h * (1.0 - e * (1.0 + z)) / (z * z);
            w1[i] = h * (z - 1.0 + e) / (z * z);
        }
    }

    std::vector<Field> out;
    out.reserve(source.slice_count());
    out.push_back(u0);
    std::vector<cplx> u = u0.spectrum().coeffs;
    const std::vector<cplx>* g_prev = &source.slice(0).spectrum().coeffs;
    for (int m = 1; m <= source.steps(); ++m) {
        const std::vector<cplx>& g_next = source.slice(m).spectrum().coeffs;
        for (std::size_t i = 0; i < modes; ++i) u[i] = decay[i] * u[i] + w0[i] * (*g_prev)[i] + w1[i] * g_next[i];
        out.push_back(inverse(Spectrum{g, u}));
        g_prev = &g_next;
    }
    return SpaceTimeField(std::move(out), h);
}

SpaceTimeField duhamel_inverse(const SpaceTimeField& source, const OperatorL& op)
{
    return duhamel_inverse(source, Field(source.grid()), op);
}

SpaceTimeField free_propagation(const Field& u0, const OperatorL& op, int m_steps, double dt)
{
    std::vector<Field> out;
    out.reserve(std::size_t(m_steps) + 1);
    for (int m = 0; m <= m_steps; ++m) out.push_back(m == 0 ? u0 : heat_semigroup(u0, op, m * dt));
    return SpaceTimeField(std::move(out), dt);
}

// ---------------------------------------------------------------- PCF files

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32(const std::vector<unsigned char>& in, std::size_t pos)
{
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t(in[pos + std::size_t(b)]) << (8 * b);
    return v;
}

}  // namespace

std::vector<unsigned char> encode_pcf(const std::vector<Field>& slices)
{
    require(!slices.empty(), ErrorKind::configuration, "pcf: no slices to write");
    const SpaceGrid g = slices.front().grid();
    std::vector<unsigned char> out{'P', 'C', 'F', '1'};
    put_u32(out, std::uint32_t(g.dim));
    put_u32(out, std::uint32_t(g.n));
    put_u32(out, std::uint32_t(slices.size()));
    out.reserve(16 + slices.size() * g.size() * 8);
    for (const auto& s : slices) {
        check_same_grid(g, s.grid(), "pcf encode");
        for (double v : s.values()) {
            std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xffu));
        }
    }
    return out;
}

PcfContents decode_pcf(const std::vector<unsigned char>& bytes)
{
    require(bytes.size() >= 16 && std::memcmp(bytes.data(), "PCF1", 4) == 0, ErrorKind::io,
            "pcf: missing PCF1 header");
    const int dim = int(get_u32(bytes, 4));
    const int n = int(get_u32(bytes, 8));
    const std::size_t count = get_u32(bytes, 12);
    PcfContents c;
    try {
        c.grid = SpaceGrid::make(dim, n);
    } catch (const Error& e) {
        fail(ErrorKind::io, std::string("pcf: invalid grid in header: ") + e.what());
    }
    const std::size_t per = c.grid.size();
    require(bytes.size() == 16 + count * per * 8, ErrorKind::io, "pcf: payload size does not match header");
    std::size_t pos = 16;
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> v(per);
        for (std::size_t i = 0; i < per; ++i) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[pos + std::size_t(b)]) << (8 * b);
            pos += 8;
            v[i] = std::bit_cast<double>(bits);
        }
        c.slices.emplace_back(c.grid, std::move(v));
    }
    return c;
}

void write_pcf(const std::string& path, const SpaceTimeField& f)
{
    auto bytes = encode_pcf(f.slices());
    std::ofstream os(path, std::ios::binary);
    require(bool(os), ErrorKind::io, "cannot open for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    require(bool(os), ErrorKind::io, "write failed: " + path);
}

void write_pcf(const std::string& path, const Field& f)
{
    auto bytes = encode_pcf({f});
    std::ofstream os(path, std::ios::binary);
    require(bool(os), ErrorKind::io, "cannot open for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    require(bool(os), ErrorKind::io, "write failed: " + path);
}

PcfContents read_pcf(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorKind::io, "cannot open for reading: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_pcf(bytes);
}

}  // namespace paracalc
