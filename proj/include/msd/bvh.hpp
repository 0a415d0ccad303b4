#pragma once

// BVH export: offsets and root positions in centimeters, rotation channels
// Zrotation Yrotation Xrotation (intrinsic Z-Y-X) in degrees.

#include <cstdio>
#include <fstream>
#include <string>

#include "msd/motion.hpp"
#include "msd/rotation.hpp"
#include "msd/skeleton.hpp"

namespace msd {

namespace detail {

inline void write_bvh_joint(std::ostream& os, const Skeleton& sk, size_t j, int depth) {
    std::string indent(size_t(depth) * 2, ' ');
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%sOFFSET %.6f %.6f %.6f\n", (indent + "  ").c_str(),
                  sk.offsets[j].x() * 100.0, sk.offsets[j].y() * 100.0, sk.offsets[j].z() * 100.0);
    if (j == 0) {
        os << indent << "ROOT " << sk.joint_names[j] << "\n" << indent << "{\n";
        os << buf;
        os << indent << "  CHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation\n";
    } else {
        os << indent << "JOINT " << sk.joint_names[j] << "\n" << indent << "{\n";
        os << buf;
        os << indent << "  CHANNELS 3 Zrotation Yrotation Xrotation\n";
    }
    bool leaf = true;
    for (size_t k = j + 1; k < sk.joint_count(); ++k) {
        if (size_t(sk.parent_index[k]) == j) {
            leaf = false;
            write_bvh_joint(os, sk, k, depth + 1);
        }
    }
    if (leaf) {
        os << indent << "  End Site\n" << indent << "  {\n";
        os << indent << "    OFFSET 0.000000 8.000000 0.000000\n";
        os << indent << "  }\n";
    }
    os << indent << "}\n";
}

}  // namespace detail

inline void export_bvh(const std::string& path, const Skeleton& sk, const Motion& m,
                       const RootTransform& initial = RootTransform{}) {
    WorldMotion w = globalize(sk, m, initial);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IOFailure("cannot write bvh: " + path);
    os << "HIERARCHY\n";
    detail::write_bvh_joint(os, sk, 0, 0);
    os << "MOTION\n";
    os << "Frames: " << w.frames.size() << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "Frame Time: %.6f\n", 1.0 / m.framerate);
    os << buf;
    const double rad2deg = 180.0 / M_PI;
    // joints in BVH hierarchy order = skeleton order (parents precede children)
    for (const auto& pose : w.frames) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f", pose.root_pos.x() * 100.0,
                      pose.root_pos.y() * 100.0, pose.root_pos.z() * 100.0);
        os << buf;
        for (size_t j = 0; j < sk.joint_count(); ++j) {
            Vec3 zyx = euler_zyx(pose.rot[j]);
            std::snprintf(buf, sizeof(buf), " %.6f %.6f %.6f", zyx[0] * rad2deg, zyx[1] * rad2deg,
                          zyx[2] * rad2deg);
            os << buf;
        }
        os << "\n";
    }
    if (!os) throw IOFailure("bvh write failed: " + path);
}

}  // namespace msd
