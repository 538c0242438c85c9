#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "ddbh/errors.hpp"

namespace ddbh {

/// Periodic lattice geometry: a ring of lx sites (dims 1) or an lx-by-ly torus.
struct Shape {
    int dims = 1;
    int lx = 1;
    int ly = 1;

    static Shape ring(int l) { return Shape{1, l, 1}; }
    static Shape torus(int lx, int ly) { return Shape{2, lx, ly}; }

    std::size_t size() const noexcept { return static_cast<std::size_t>(lx) * static_cast<std::size_t>(ly); }
    int z() const noexcept { return 2 * dims; }
    std::size_t index(int x, int y = 0) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(lx) + static_cast<std::size_t>(x);
    }

    void validate() const {
        if (dims != 1 && dims != 2) throw ParameterError("lattice dims must be 1 or 2");
        if (lx < 1 || ly < 1) throw ParameterError("lattice extents must be positive");
        if (dims == 1 && ly != 1) throw ParameterError("1D lattice must have ly = 1");
    }

    bool operator==(const Shape&) const = default;
};

/// Row-major field over a Shape (x fastest).
template <class T>
struct Field {
    Shape shape;
    std::vector<T> values;

    Field() = default;
    explicit Field(Shape s, T fill = T{}) : shape(s), values(s.size(), fill) { s.validate(); }

    std::size_t size() const noexcept { return values.size(); }
    T& operator[](std::size_t i) { return values[i]; }
    const T& operator[](std::size_t i) const { return values[i]; }
    T& operator()(int x, int y = 0) { return values[shape.index(x, y)]; }
    const T& operator()(int x, int y = 0) const { return values[shape.index(x, y)]; }

    bool operator==(const Field&) const = default;
};

using LatticeField = Field<std::complex<double>>;
using RealLatticeField = Field<double>;

/**
 * Discrete Laplacian  lap(a)_j = -z a_j + sum of the nearest neighbours,
 * periodic in every direction. Neighbours are summed in the fixed order
 * left, right, down, up so that a lattice translation commutes with the
 * stencil bit for bit.
 */
template <class T>
void laplacian_into(const Field<T>& f, Field<T>& out) {
    const Shape& s = f.shape;
    out.shape = s;
    out.values.resize(f.size());
    const double z = s.z();
    for (int y = 0; y < s.ly; ++y) {
        const int yd = y == 0 ? s.ly - 1 : y - 1;
        const int yu = y == s.ly - 1 ? 0 : y + 1;
        for (int x = 0; x < s.lx; ++x) {
            const int xl = x == 0 ? s.lx - 1 : x - 1;
            const int xr = x == s.lx - 1 ? 0 : x + 1;
            T acc = f(xl, y) + f(xr, y);
            if (s.dims == 2) acc = acc + f(x, yd) + f(x, yu);
            out(x, y) = acc - z * f(x, y);
        }
    }
}

template <class T>
Field<T> laplacian(const Field<T>& f) {
    Field<T> out;
    laplacian_into(f, out);
    return out;
}

template <class T>
Field<T> uniform_field(Shape s, T value) {
    return Field<T>(s, value);
}

inline LatticeField uniform_field(Shape s, std::complex<double> value) {
    return Field<std::complex<double>>(s, value);
}

/// Piecewise-constant along x: sites with x < pos take `left`, the rest
/// `right`. On a ring the second interface sits at the x = 0 boundary.
template <class T>
Field<T> domain_wall_field(Shape s, T left, T right, int pos) {
    s.validate();
    if (pos < 1 || pos > s.lx - 1)
        throw ParameterError("interface position " + std::to_string(pos) + " outside lattice");
    Field<T> f(s, right);
    for (int y = 0; y < s.ly; ++y)
        for (int x = 0; x < pos; ++x) f(x, y) = left;
    return f;
}

inline LatticeField domain_wall_field(Shape s, std::complex<double> left, std::complex<double> right, int pos) {
    return domain_wall_field<std::complex<double>>(s, left, right, pos);
}

/// Copy of f translated by (dx, dy): out(x+dx, y+dy) = f(x, y).
template <class T>
Field<T> shifted(const Field<T>& f, int dx, int dy = 0) {
    const Shape& s = f.shape;
    Field<T> out(s);
    for (int y = 0; y < s.ly; ++y)
        for (int x = 0; x < s.lx; ++x)
            out(((x + dx) % s.lx + s.lx) % s.lx, ((y + dy) % s.ly + s.ly) % s.ly) = f(x, y);
    return out;
}

template <class T>
bool all_finite(const Field<T>& f) {
    for (const auto& v : f.values) {
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(v)) return false;
        } else {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        }
    }
    return true;
}

inline double mean_density(const LatticeField& f) {
    double s = 0.0;
    for (const auto& v : f.values) s += std::norm(v);
    return s / static_cast<double>(f.size());
}

} // namespace ddbh
