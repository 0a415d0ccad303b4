#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "msd/errors.hpp"

namespace msd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// First two columns of a rotation matrix (the continuous 6D representation).
struct Rotation6D {
    Vec3 a1{1.0, 0.0, 0.0};
    Vec3 a2{0.0, 1.0, 0.0};

    bool operator==(const Rotation6D& o) const {
        return (a1.array() == o.a1.array()).all() && (a2.array() == o.a2.array()).all();
    }
};

// Gram-Schmidt decode: normalize a1, orthogonalize a2 against it, third
// column from the cross product. Scale-invariant in both inputs.
inline Mat3 rot6d_decode(const Rotation6D& r) {
    double n1 = r.a1.norm();
    if (n1 < 1e-8) throw DegenerateRotation("rot6d_decode: a1 near zero");
    Vec3 b1 = r.a1 / n1;
    Vec3 b2 = r.a2 - b1.dot(r.a2) * b1;
    double n2 = b2.norm();
    if (n2 < 1e-8) throw DegenerateRotation("rot6d_decode: a2 parallel to a1");
    b2 /= n2;
    Vec3 b3 = b1.cross(b2);
    Mat3 m;
    m.col(0) = b1;
    m.col(1) = b2;
    m.col(2) = b3;
    return m;
}

inline Rotation6D rot6d_encode(const Mat3& m) {
    return Rotation6D{m.col(0), m.col(1)};
}

inline Mat3 rot_y(double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}
inline Mat3 rot_x(double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix();
}
inline Mat3 rot_z(double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

// Intrinsic Z-Y-X Euler angles (R = Rz * Ry * Rx), the BVH channel order
// used by the exporter. Returns radians.
inline Vec3 euler_zyx(const Mat3& m) {
    double y = std::asin(-std::clamp(m(2, 0), -1.0, 1.0));
    double z, x;
    if (std::abs(m(2, 0)) < 1.0 - 1e-12) {
        z = std::atan2(m(1, 0), m(0, 0));
        x = std::atan2(m(2, 1), m(2, 2));
    } else {
        // gimbal lock: fold the whole twist into z
        z = std::atan2(-m(0, 1), m(1, 1));
        x = 0.0;
    }
    return Vec3{z, y, x};
}

inline double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0) a += 2.0 * M_PI;
    return a - M_PI;
}

}  // namespace msd
