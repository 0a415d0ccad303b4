#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "msd/errors.hpp"
#include "msd/rotation.hpp"

namespace msd {

// Joints the representation needs to resolve by role rather than by index.
struct SpecialJoints {
    int root = 0;
    int left_hip = -1;
    int right_hip = -1;
    int left_shoulder = -1;
    int right_shoulder = -1;
    int left_foot = -1;
    int right_foot = -1;
};

struct Skeleton {
    std::string id;
    std::vector<std::string> joint_names;
    std::vector<int> parent_index;  // root's parent is -1
    std::vector<Vec3> offsets;      // rest-pose translation from parent, meters
    SpecialJoints special;

    size_t joint_count() const { return joint_names.size(); }
    // Flat pose-vector dimension: o(4) + p(3*(J-1)) + r(6*J).
    size_t pose_dim() const { return 4 + 3 * (joint_count() - 1) + 6 * joint_count(); }
};

inline void validate(const Skeleton& s) {
    size_t j = s.joint_count();
    if (j == 0 || s.parent_index.size() != j || s.offsets.size() != j)
        throw InvalidSkeleton("inconsistent joint arrays");
    if (s.parent_index[0] != -1) throw InvalidSkeleton("joint 0 must be the root");
    for (size_t i = 1; i < j; ++i) {
        int p = s.parent_index[i];
        if (p < 0 || static_cast<size_t>(p) >= i)
            throw InvalidSkeleton("parents must precede children (tree order)");
    }
    for (const auto& o : s.offsets)
        if (!o.allFinite()) throw InvalidSkeleton("non-finite offset");
    const int specials[] = {s.special.root,          s.special.left_hip,
                            s.special.right_hip,     s.special.left_shoulder,
                            s.special.right_shoulder, s.special.left_foot,
                            s.special.right_foot};
    for (int idx : specials)
        if (idx < 0 || static_cast<size_t>(idx) >= j)
            throw InvalidSkeleton("special joint out of range");
}

// Default 13-joint desk skeleton. Left side sits on +x so a character built
// from these offsets faces +z. Rest feet touch the ground plane (y = 0) when
// the root is at its rest height.
inline Skeleton default_skeleton() {
    Skeleton s;
    s.id = "desk13";
    auto add = [&](const std::string& name, int parent, double x, double y, double z) {
        s.joint_names.push_back(name);
        s.parent_index.push_back(parent);
        s.offsets.emplace_back(x, y, z);
        return static_cast<int>(s.joint_names.size()) - 1;
    };
    int root = add("root", -1, 0.0, 0.0, 0.0);
    int spine = add("spine", root, 0.0, 0.25, 0.0);
    add("head", spine, 0.0, 0.30, 0.0);
    int hip_l = add("hip_l", root, 0.10, -0.05, 0.0);
    int knee_l = add("knee_l", hip_l, 0.0, -0.40, 0.0);
    int foot_l = add("foot_l", knee_l, 0.0, -0.45, 0.0);
    int hip_r = add("hip_r", root, -0.10, -0.05, 0.0);
    int knee_r = add("knee_r", hip_r, 0.0, -0.40, 0.0);
    int foot_r = add("foot_r", knee_r, 0.0, -0.45, 0.0);
    int sho_l = add("shoulder_l", spine, 0.18, 0.22, 0.0);
    add("hand_l", sho_l, 0.0, -0.55, 0.0);
    int sho_r = add("shoulder_r", spine, -0.18, 0.22, 0.0);
    add("hand_r", sho_r, 0.0, -0.55, 0.0);
    s.special = SpecialJoints{root, hip_l, hip_r, sho_l, sho_r, foot_l, foot_r};
    validate(s);
    return s;
}

// Rest height of the root above the ground plane for the default skeleton.
inline constexpr double kDefaultRootHeight = 0.90;

}  // namespace msd
