// volume.hpp - Voxel grid containers shared by every tagflow module.
//
// All volumes live on a regular grid indexed (i, j, k) with x fastest in memory.
// Displacements and velocities are stored in voxel units; the physical spacing is
// carried along as metadata and only matters for resampling and file export.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "tagflow/errors.hpp"

namespace tagflow {

using Vec3 = std::array<double, 3>;

// Row-major 3x3 matrix. For Jacobians, m[c][a] = d u_c / d x_a.
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 operator+(const Vec3 &a, const Vec3 &b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3 &a, const Vec3 &b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3 &a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 &operator+=(Vec3 &a, const Vec3 &b) {
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
    return a;
}
inline double dot(const Vec3 &a, const Vec3 &b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3 &a, const Vec3 &b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3 &a);

double determinant(const Mat3 &m);

// Transposed adjugate: d det(m) / d m[r][c] = cofactor(m)[r][c].
Mat3 cofactor(const Mat3 &m);

struct Geometry {
    std::array<std::size_t, 3> dims{2, 2, 2};
    Vec3 spacing{1.0, 1.0, 1.0};

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + dims[0] * (j + dims[1] * k); }

    std::array<std::size_t, 3> coords(std::size_t idx) const {
        const std::size_t i = idx % dims[0];
        const std::size_t j = (idx / dims[0]) % dims[1];
        const std::size_t k = idx / (dims[0] * dims[1]);
        return {i, j, k};
    }

    Vec3 position(std::size_t idx) const {
        const auto c = coords(idx);
        return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])};
    }

    // Throws std::invalid_argument unless every dim >= 2 and every spacing > 0.
    void validate() const;

    // Same voxel lattice; spacing is compared too since it is part of the contract.
    bool operator==(const Geometry &) const = default;
};

Geometry cube_geometry(std::size_t n, double spacing = 1.0);

void require_same_geometry(const Geometry &a, const Geometry &b, const char *what);

class ScalarVolume {
  public:
    ScalarVolume() = default;
    explicit ScalarVolume(const Geometry &geom, double fill = 0.0);
    ScalarVolume(const Geometry &geom, std::vector<double> values);

    const Geometry &geometry() const { return geom_; }
    std::size_t size() const { return data_.size(); }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    double operator[](std::size_t idx) const { return data_[idx]; }
    double &operator[](std::size_t idx) { return data_[idx]; }

    double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[geom_.index(i, j, k)]; }
    double &operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[geom_.index(i, j, k)]; }

    bool all_finite() const;

    bool operator==(const ScalarVolume &) const = default;

  private:
    Geometry geom_;
    std::vector<double> data_;
};

class VectorField {
  public:
    VectorField() = default;
    explicit VectorField(const Geometry &geom, const Vec3 &fill = {0.0, 0.0, 0.0});
    VectorField(const Geometry &geom, std::vector<Vec3> vectors);

    const Geometry &geometry() const { return geom_; }
    std::size_t size() const { return data_.size(); }

    std::span<const Vec3> vectors() const { return data_; }
    std::span<Vec3> vectors() { return data_; }

    const Vec3 &operator[](std::size_t idx) const { return data_[idx]; }
    Vec3 &operator[](std::size_t idx) { return data_[idx]; }

    const Vec3 &operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[geom_.index(i, j, k)]; }
    Vec3 &operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[geom_.index(i, j, k)]; }

    // One scalar component as its own volume.
    ScalarVolume component(std::size_t c) const;

    bool all_finite() const;
    double max_norm() const;

    VectorField &operator+=(const VectorField &other);
    VectorField &operator*=(double s);

    bool operator==(const VectorField &) const = default;

  private:
    Geometry geom_;
    std::vector<Vec3> data_;
};

VectorField operator+(VectorField a, const VectorField &b);
VectorField operator*(double s, VectorField a);

// Sum over voxels and components of a[x] . b[x], in index order.
double inner_product(const VectorField &a, const VectorField &b);

} // namespace tagflow
