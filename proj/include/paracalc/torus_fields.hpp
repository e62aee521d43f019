#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paracalc/errors.hpp"

namespace paracalc {

using cplx = std::complex<double>;

/// Periodic grid on [0,1)^d with N points per axis.
struct SpaceGrid {
    int dim = 1;
    int n = 8;

    static SpaceGrid make(int dim, int n);

    std::size_t size() const { return dim == 1 ? std::size_t(n) : std::size_t(n) * std::size_t(n); }
    /// Index of the finest dyadic block, log2(N) - 1.
    int jmax() const;
    double spacing() const { return 1.0 / n; }
    bool operator==(const SpaceGrid& o) const { return dim == o.dim && n == o.n; }
    bool operator!=(const SpaceGrid& o) const { return !(*this == o); }
};

/// Integer frequency attached to a storage index (FFT ordering, Nyquist taken positive).
struct Freq {
    std::array<int, 2> k{0, 0};
    int dim = 1;
    bool nyquist = false;  // true if any component equals N/2

    double norm2() const { return double(k[0]) * k[0] + (dim == 2 ? double(k[1]) * k[1] : 0.0); }
    double norm() const;
    int max_norm() const;
};

Freq freq_at(const SpaceGrid& g, std::size_t idx);
void check_same_grid(const SpaceGrid& a, const SpaceGrid& b, const char* where);

struct Spectrum {
    SpaceGrid grid;
    std::vector<cplx> coeffs;  // normalized: f(x) = sum_k c_k e^{2 pi i k.x}
};

/// Real samples on a SpaceGrid. Value semantics; the spectrum is cached lazily.
class Field {
public:
    Field() = default;
    explicit Field(const SpaceGrid& g);
    Field(const SpaceGrid& g, std::vector<double> values);

    const SpaceGrid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double at(int i0, int i1 = 0) const { return values_[index(i0, i1)]; }
    std::size_t index(int i0, int i1 = 0) const
    {
        return grid_.dim == 1 ? std::size_t(i0) : std::size_t(i0) * grid_.n + std::size_t(i1);
    }

    /// Mutable access; drops the cached spectrum.
    std::vector<double>& mutable_values();

    const Spectrum& spectrum() const;

    double sup_norm() const;
    double l2_norm() const;  // sqrt of the mean of squares
    double mean() const;
    bool all_finite() const;

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(double s);

    static Field from_function(const SpaceGrid& g, const std::function<double(double, double)>& f);
    static Field constant(const SpaceGrid& g, double c);

private:
    SpaceGrid grid_{};
    std::vector<double> values_;
    mutable std::shared_ptr<const Spectrum> spec_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);
Field operator*(Field a, double s);
Field operator-(Field a);
/// Pointwise product on the grid (no de-aliasing).
Field pointwise(const Field& a, const Field& b);
Field map_values(const Field& a, const std::function<double(double)>& fn);

enum class Direction { forward, inverse };

Spectrum forward(const Field& f);
/// Inverse transform; keeps the real part.
Field inverse(const Spectrum& s);

using RealSymbol = std::function<double(const Freq&)>;
using ComplexSymbol = std::function<cplx(const Freq&)>;

Field apply_multiplier(const Field& f, const RealSymbol& symbol);
Field apply_complex_multiplier(const Field& f, const ComplexSymbol& symbol);
Spectrum apply_multiplier(const Spectrum& s, const RealSymbol& symbol);

/// L = -sum V_i^2 with V_i = sqrt(c0) d_i. Constant mode has symbol c0 (2 pi |k|)^2.
struct OperatorL {
    double c0 = 1.0;
    std::optional<Field> variable;  // experimental variable-coefficient mode

    static OperatorL constant(double c0);
    static OperatorL variable_coefficient(const Field& c);
    bool is_constant() const { return !variable.has_value(); }
    double symbol(const Freq& k) const;
    void require_constant(const char* where) const;
};

Field apply_L(const Field& f, const OperatorL& op);
/// V_i = sqrt(c0) d_i, multiplier i 2 pi k_i sqrt(c0); Nyquist modes are zeroed.
Field apply_V(const Field& f, const OperatorL& op, int axis);
/// Spectral partial derivative d_i.
Field partial(const Field& f, int axis);
/// L^{-1} on nonzero modes, zero mean output.
Field apply_L_inverse(const Field& f, const OperatorL& op);
Field heat_semigroup(const Field& f, const OperatorL& op, double t);

enum class HeatKind { P, Q };

/// Symbol of Q_t^{(b)} or P_t^{(b)} as a function of x = t m(k).
double heat_symbol(HeatKind kind, int b, double x);
Field heat_operator(const Field& f, const OperatorL& op, double t, int b, HeatKind kind);

/// Uniform time grid t_m = m dt, m = 0..M, one Field per slice.
class SpaceTimeField {
public:
    SpaceTimeField() = default;
    SpaceTimeField(std::vector<Field> slices, double dt);
    static SpaceTimeField constant_in_time(const Field& f, int m_steps, double dt);
    static SpaceTimeField zeros(const SpaceGrid& g, int m_steps, double dt);

    const SpaceGrid& grid() const { return slices_.front().grid(); }
    int steps() const { return int(slices_.size()) - 1; }
    std::size_t slice_count() const { return slices_.size(); }
    double dt() const { return dt_; }
    double horizon() const { return dt_ * steps(); }
    double time(int m) const { return dt_ * m; }
    const Field& slice(int m) const { return slices_[std::size_t(m)]; }
    Field& slice(int m) { return slices_[std::size_t(m)]; }
    const std::vector<Field>& slices() const { return slices_; }
    const Field& final_slice() const { return slices_.back(); }

    double sup_norm() const;
    bool same_time_grid(const SpaceTimeField& o) const;

    SpaceTimeField& operator+=(const SpaceTimeField& o);
    SpaceTimeField& operator-=(const SpaceTimeField& o);
    SpaceTimeField& operator*=(double s);

private:
    std::vector<Field> slices_;
    double dt_ = 0.0;
};

SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b);
SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b);
SpaceTimeField operator*(double s, SpaceTimeField a);
SpaceTimeField map_slices(const SpaceTimeField& a, const std::function<Field(const Field&)>& fn);
SpaceTimeField zip_slices(const SpaceTimeField& a, const SpaceTimeField& b,
                          const std::function<Field(const Field&, const Field&)>& fn);
void check_same_time_grid(const SpaceTimeField& a, const SpaceTimeField& b, const char* where);

SpaceTimeField apply_L(const SpaceTimeField& f, const OperatorL& op);
SpaceTimeField apply_V(const SpaceTimeField& f, const OperatorL& op, int axis);

/// (d_t + L) u: spectral L per slice, second-order differences in time.
SpaceTimeField apply_parabolic(const SpaceTimeField& u, const OperatorL& op);
/// Time derivative part only.
SpaceTimeField time_derivative(const SpaceTimeField& u);

/// Solves (d_t + L) u = g with u(0) = u0: exact propagator per step, source
/// interpolated linearly in time and integrated exactly against the kernel.
SpaceTimeField duhamel_inverse(const SpaceTimeField& source, const Field& u0, const OperatorL& op);
/// Zero initial slice variant.
SpaceTimeField duhamel_inverse(const SpaceTimeField& source, const OperatorL& op);
/// e^{-t_m L} u0 on the given time grid.
SpaceTimeField free_propagation(const Field& u0, const OperatorL& op, int m_steps, double dt);

/// Contents of a binary field file: one or more slices on a common grid.
struct PcfContents {
    SpaceGrid grid;
    std::vector<Field> slices;

    SpaceTimeField as_space_time(double dt) const { return SpaceTimeField(slices, dt); }
};

/// Binary field files ("PCF1" header, little-endian float64 payload, time-major).
std::vector<unsigned char> encode_pcf(const std::vector<Field>& slices);
PcfContents decode_pcf(const std::vector<unsigned char>& bytes);
void write_pcf(const std::string& path, const SpaceTimeField& f);
void write_pcf(const std::string& path, const Field& f);
PcfContents read_pcf(const std::string& path);

}  // namespace paracalc
