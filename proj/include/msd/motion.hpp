#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "msd/errors.hpp"
#include "msd/rotation.hpp"
#include "msd/skeleton.hpp"

namespace msd {

// Pose feature v = [o, p, r]:
//   o = (y-axis angular velocity rad/frame, facing-local xz linear velocity
//        m/frame, absolute root height m)
//   p = facing-local joint positions relative to the root, J-1 entries
//   r = 6D joint rotations; r[0] is the facing-localized root orientation,
//       the rest are parent-local
struct PoseVector {
    std::array<double, 4> o{0.0, 0.0, 0.0, 0.0};  // o_r, o_x, o_z, o_h
    std::vector<Vec3> p;
    std::vector<Rotation6D> r;
};

struct Motion {
    std::string skeleton_id;
    double framerate = 20.0;
    std::vector<PoseVector> frames;

    size_t frame_count() const { return frames.size(); }
};

// World-frame pose: root position plus rotations (rot[0] is the root's world
// orientation, the rest stay parent-local).
struct WorldPose {
    Vec3 root_pos{0.0, 0.0, 0.0};
    std::vector<Mat3> rot;
};

struct WorldMotion {
    std::string skeleton_id;
    double framerate = 20.0;
    std::vector<WorldPose> frames;
};

struct RootTransform {
    double yaw = 0.0;  // facing angle, radians about +y
    double x = 0.0;
    double z = 0.0;
};

// --- flat layout -----------------------------------------------------------

inline constexpr size_t kChannelOx = 1;
inline constexpr size_t kChannelOz = 2;

inline std::vector<double> flatten_pose(const PoseVector& v) {
    std::vector<double> out;
    out.reserve(4 + 3 * v.p.size() + 6 * v.r.size());
    out.insert(out.end(), v.o.begin(), v.o.end());
    for (const auto& p : v.p) out.insert(out.end(), {p.x(), p.y(), p.z()});
    for (const auto& r : v.r) {
        out.insert(out.end(), {r.a1.x(), r.a1.y(), r.a1.z()});
        out.insert(out.end(), {r.a2.x(), r.a2.y(), r.a2.z()});
    }
    return out;
}

inline PoseVector unflatten_pose(const double* data, size_t joints) {
    PoseVector v;
    size_t k = 0;
    for (auto& o : v.o) o = data[k++];
    v.p.resize(joints - 1);
    for (auto& p : v.p) {
        p = Vec3(data[k], data[k + 1], data[k + 2]);
        k += 3;
    }
    v.r.resize(joints);
    for (auto& r : v.r) {
        r.a1 = Vec3(data[k], data[k + 1], data[k + 2]);
        r.a2 = Vec3(data[k + 3], data[k + 4], data[k + 5]);
        k += 6;
    }
    return v;
}

// Row-major (frames x pose_dim) buffer for the learning stack.
inline std::vector<double> motion_to_rows(const Motion& m) {
    std::vector<double> rows;
    for (const auto& f : m.frames) {
        auto flat = flatten_pose(f);
        rows.insert(rows.end(), flat.begin(), flat.end());
    }
    return rows;
}

inline Motion rows_to_motion(const std::vector<double>& rows, size_t joints,
                             const std::string& skeleton_id, double framerate) {
    size_t dim = 4 + 3 * (joints - 1) + 6 * joints;
    if (rows.size() % dim != 0) throw InvalidMotion("row buffer does not tile pose_dim");
    Motion m;
    m.skeleton_id = skeleton_id;
    m.framerate = framerate;
    size_t f = rows.size() / dim;
    m.frames.reserve(f);
    for (size_t i = 0; i < f; ++i) m.frames.push_back(unflatten_pose(rows.data() + i * dim, joints));
    return m;
}

// --- kinematics ------------------------------------------------------------

// World joint positions of a single world-frame pose.
inline std::vector<Vec3> world_joint_positions(const Skeleton& sk, const WorldPose& pose) {
    size_t j = sk.joint_count();
    std::vector<Vec3> pos(j);
    std::vector<Mat3> world_rot(j);
    pos[0] = pose.root_pos;
    world_rot[0] = pose.rot[0];
    for (size_t i = 1; i < j; ++i) {
        int parent = sk.parent_index[i];
        pos[i] = pos[parent] + world_rot[parent] * sk.offsets[i];
        world_rot[i] = world_rot[parent] * pose.rot[i];
    }
    return pos;
}

// Facing direction in the xz-plane: average the across-body vectors between
// hips and between shoulders, cross with +y, project to xz and normalize.
inline Eigen::Vector2d facing_direction(const Skeleton& sk, const std::vector<Vec3>& world_pos) {
    const auto& sp = sk.special;
    Vec3 across = 0.5 * ((world_pos[sp.left_hip] - world_pos[sp.right_hip]) +
                         (world_pos[sp.left_shoulder] - world_pos[sp.right_shoulder]));
    Vec3 f = across.cross(Vec3::UnitY());
    Eigen::Vector2d xz{f.x(), f.z()};
    double n = xz.norm();
    if (n < 1e-8) throw DegeneratePose("facing_direction: across-body vector parallel to up-axis");
    return xz / n;
}

inline double facing_angle(const Skeleton& sk, const std::vector<Vec3>& world_pos) {
    Eigen::Vector2d f = facing_direction(sk, world_pos);
    return std::atan2(f.x(), f.y());  // yaw with +z <-> 0
}

inline RootTransform initial_root_transform(const Skeleton& sk, const WorldMotion& w) {
    auto pos = world_joint_positions(sk, w.frames.at(0));
    return RootTransform{facing_angle(sk, pos), w.frames[0].root_pos.x(), w.frames[0].root_pos.z()};
}

// World-frame motion -> facing-local representation. The root displacement of
// frame i is expressed in frame i-1's facing frame; p and the root rotation
// are expressed in frame i's own facing frame. Frame 0 copies frame 1's
// velocity channels (no backward difference exists).
inline Motion localize(const Skeleton& sk, const WorldMotion& w) {
    if (w.frames.size() < 2) throw InvalidMotion("localize needs at least 2 frames");
    size_t f = w.frames.size();
    size_t j = sk.joint_count();

    std::vector<double> psi(f);
    std::vector<std::vector<Vec3>> pos(f);
    for (size_t i = 0; i < f; ++i) {
        pos[i] = world_joint_positions(sk, w.frames[i]);
        psi[i] = facing_angle(sk, pos[i]);
    }

    Motion m;
    m.skeleton_id = w.skeleton_id;
    m.framerate = w.framerate;
    m.frames.resize(f);
    for (size_t i = 0; i < f; ++i) {
        PoseVector& v = m.frames[i];
        if (i >= 1) {
            v.o[0] = wrap_angle(psi[i] - psi[i - 1]);
            Vec3 disp = rot_y(-psi[i - 1]) * (w.frames[i].root_pos - w.frames[i - 1].root_pos);
            v.o[1] = disp.x();
            v.o[2] = disp.z();
        }
        v.o[3] = w.frames[i].root_pos.y();
        Mat3 unfacing = rot_y(-psi[i]);
        v.p.resize(j - 1);
        for (size_t k = 1; k < j; ++k) v.p[k - 1] = unfacing * (pos[i][k] - w.frames[i].root_pos);
        v.r.resize(j);
        v.r[0] = rot6d_encode(unfacing * w.frames[i].rot[0]);
        for (size_t k = 1; k < j; ++k) v.r[k] = rot6d_encode(w.frames[i].rot[k]);
    }
    // frame-0 velocity convention
    m.frames[0].o[0] = m.frames[1].o[0];
    m.frames[0].o[1] = m.frames[1].o[1];
    m.frames[0].o[2] = m.frames[1].o[2];
    return m;
}

// Integrate o back into a world-frame trajectory. Inverse of localize given
// the same initial transform.
inline WorldMotion globalize(const Skeleton& sk, const Motion& m,
                             const RootTransform& initial = RootTransform{}) {
    if (m.frames.empty()) throw InvalidMotion("globalize: empty motion");
    size_t f = m.frames.size();
    size_t j = sk.joint_count();
    WorldMotion w;
    w.skeleton_id = m.skeleton_id;
    w.framerate = m.framerate;
    w.frames.resize(f);

    double psi = initial.yaw;
    Vec3 root{initial.x, m.frames[0].o[3], initial.z};
    for (size_t i = 0; i < f; ++i) {
        if (i >= 1) {
            Vec3 disp = rot_y(psi) * Vec3(m.frames[i].o[1], 0.0, m.frames[i].o[2]);
            root.x() += disp.x();
            root.z() += disp.z();
            psi += m.frames[i].o[0];
        }
        root.y() = m.frames[i].o[3];
        WorldPose& pose = w.frames[i];
        pose.root_pos = root;
        pose.rot.resize(j);
        pose.rot[0] = rot_y(psi) * rot6d_decode(m.frames[i].r[0]);
        for (size_t k = 1; k < j; ++k) pose.rot[k] = rot6d_decode(m.frames[i].r[k]);
    }
    return w;
}

// Per-frame world joint positions (root placed by globalize from `initial`).
inline std::vector<std::vector<Vec3>> forward_kinematics(
    const Skeleton& sk, const Motion& m, const RootTransform& initial = RootTransform{}) {
    WorldMotion w = globalize(sk, m, initial);
    std::vector<std::vector<Vec3>> out(w.frames.size());
    for (size_t i = 0; i < w.frames.size(); ++i) out[i] = world_joint_positions(sk, w.frames[i]);
    return out;
}

// --- velocities -------------------------------------------------------------

// Per-frame per-joint local speed magnitudes. Non-root joints difference the
// facing-local positions p; the root uses its o channels. Frame 0 copies
// frame 1.
inline std::vector<std::vector<double>> local_joint_velocities(const Motion& m) {
    if (m.frames.size() < 2) throw InvalidMotion("local_joint_velocities needs >= 2 frames");
    size_t f = m.frames.size();
    size_t j = m.frames[0].r.size();
    std::vector<std::vector<double>> u(f, std::vector<double>(j, 0.0));
    for (size_t i = 1; i < f; ++i) {
        const PoseVector& a = m.frames[i - 1];
        const PoseVector& b = m.frames[i];
        double dh = b.o[3] - a.o[3];
        u[i][0] = std::sqrt(b.o[1] * b.o[1] + b.o[2] * b.o[2] + dh * dh);
        for (size_t k = 1; k < j; ++k) u[i][k] = (b.p[k - 1] - a.p[k - 1]).norm();
    }
    u[0] = u[1];
    return u;
}

// Temporal average of the per-frame maximal joint speed.
inline double velocity_vector_U(const Motion& m) {
    auto u = local_joint_velocities(m);
    double sum = 0.0;
    for (const auto& frame : u) {
        double mx = 0.0;
        for (double s : frame) mx = std::max(mx, s);
        sum += mx;
    }
    return sum / static_cast<double>(u.size());
}

// Scale the root's global velocity channels (o_r, o_x, o_z) by `factor`.
inline Motion warp_global_velocity(const Motion& m, double factor) {
    if (!(std::isfinite(factor)) || factor <= 0.0)
        throw InvalidFactor("warp_global_velocity: factor must be finite and > 0");
    Motion out = m;
    for (auto& v : out.frames) {
        v.o[0] *= factor;
        v.o[1] *= factor;
        v.o[2] *= factor;
    }
    return out;
}

// O_hori = [o_1^x, o_1^z, ..., o_f^x, o_f^z].
inline std::vector<double> extract_horizontal_root_track(const Motion& m) {
    std::vector<double> track;
    track.reserve(2 * m.frames.size());
    for (const auto& v : m.frames) {
        track.push_back(v.o[1]);
        track.push_back(v.o[2]);
    }
    return track;
}

inline void write_horizontal_root_track(Motion& m, const std::vector<double>& track) {
    if (track.size() != 2 * m.frames.size())
        throw LengthMismatch("write_horizontal_root_track: track length != 2f");
    for (size_t i = 0; i < m.frames.size(); ++i) {
        m.frames[i].o[1] = track[2 * i];
        m.frames[i].o[2] = track[2 * i + 1];
    }
}

inline void check_motion_finite(const Motion& m) {
    for (const auto& v : m.frames) {
        for (double x : v.o)
            if (!std::isfinite(x)) throw InvalidMotion("non-finite o channel");
        for (const auto& p : v.p)
            if (!p.allFinite()) throw InvalidMotion("non-finite position");
        for (const auto& r : v.r)
            if (!r.a1.allFinite() || !r.a2.allFinite()) throw InvalidMotion("non-finite rotation");
    }
}

}  // namespace msd
