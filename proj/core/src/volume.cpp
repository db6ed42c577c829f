// volume.cpp - Voxel grid containers.

#include "tagflow/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tagflow {

double norm(const Vec3 &a) { return std::sqrt(dot(a, a)); }

double determinant(const Mat3 &m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 cofactor(const Mat3 &m) {
    Mat3 c{};
    c[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    c[0][1] = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    c[0][2] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    c[1][0] = m[0][2] * m[2][1] - m[0][1] * m[2][2];
    c[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    c[1][2] = m[0][1] * m[2][0] - m[0][0] * m[2][1];
    c[2][0] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
    c[2][1] = m[0][2] * m[1][0] - m[0][0] * m[1][2];
    c[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    return c;
}

void Geometry::validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
        if (dims[a] < 2) {
            throw std::invalid_argument("geometry: every dimension must be >= 2");
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw std::invalid_argument("geometry: every spacing must be finite and > 0");
        }
    }
}

Geometry cube_geometry(std::size_t n, double spacing) {
    Geometry g;
    g.dims = {n, n, n};
    g.spacing = {spacing, spacing, spacing};
    g.validate();
    return g;
}

void require_same_geometry(const Geometry &a, const Geometry &b, const char *what) {
    if (a == b) {
        return;
    }
    std::ostringstream ss;
    ss << what << ": geometry mismatch (" << a.dims[0] << "x" << a.dims[1] << "x" << a.dims[2] << " vs " << b.dims[0]
       << "x" << b.dims[1] << "x" << b.dims[2] << ")";
    throw GeometryMismatch(ss.str());
}

ScalarVolume::ScalarVolume(const Geometry &geom, double fill) : geom_(geom), data_(geom.voxel_count(), fill) {
    geom_.validate();
}

ScalarVolume::ScalarVolume(const Geometry &geom, std::vector<double> values) : geom_(geom), data_(std::move(values)) {
    geom_.validate();
    if (data_.size() != geom_.voxel_count()) {
        throw std::invalid_argument("ScalarVolume: value count does not match geometry");
    }
}

bool ScalarVolume::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

VectorField::VectorField(const Geometry &geom, const Vec3 &fill) : geom_(geom), data_(geom.voxel_count(), fill) {
    geom_.validate();
}

VectorField::VectorField(const Geometry &geom, std::vector<Vec3> vectors) : geom_(geom), data_(std::move(vectors)) {
    geom_.validate();
    if (data_.size() != geom_.voxel_count()) {
        throw std::invalid_argument("VectorField: vector count does not match geometry");
    }
}

ScalarVolume VectorField::component(std::size_t c) const {
    ScalarVolume out(geom_);
    for (std::size_t n = 0; n < data_.size(); ++n) {
        out[n] = data_[n][c];
    }
    return out;
}

bool VectorField::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](const Vec3 &v) {
        return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
    });
}

double VectorField::max_norm() const {
    double m = 0.0;
    for (const auto &v : data_) {
        m = std::max(m, norm(v));
    }
    return m;
}

VectorField &VectorField::operator+=(const VectorField &other) {
    require_same_geometry(geom_, other.geom_, "VectorField::operator+=");
    for (std::size_t n = 0; n < data_.size(); ++n) {
        data_[n] += other.data_[n];
    }
    return *this;
}

VectorField &VectorField::operator*=(double s) {
    for (auto &v : data_) {
        v = s * v;
    }
    return *this;
}

VectorField operator+(VectorField a, const VectorField &b) {
    a += b;
    return a;
}

VectorField operator*(double s, VectorField a) {
    a *= s;
    return a;
}

double inner_product(const VectorField &a, const VectorField &b) {
    require_same_geometry(a.geometry(), b.geometry(), "inner_product");
    double sum = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        sum += dot(a[n], b[n]);
    }
    return sum;
}

} // namespace tagflow
