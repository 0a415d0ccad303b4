#pragma once

// Motion files: {"skeleton_id", "framerate", "frames": [[o p r flat]...]}.
// Each frame is the flat pose vector [o(4), p(3(J-1)), r(6J)].

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "msd/errors.hpp"
#include "msd/motion.hpp"

namespace msd {

using Json = nlohmann::ordered_json;

inline Json motion_to_json(const Motion& m) {
    Json j;
    j["skeleton_id"] = m.skeleton_id;
    j["framerate"] = m.framerate;
    Json frames = Json::array();
    for (const auto& f : m.frames) frames.push_back(flatten_pose(f));
    j["frames"] = std::move(frames);
    return j;
}

inline Motion motion_from_json(const Json& j, size_t joints) {
    Motion m;
    m.skeleton_id = j.at("skeleton_id").get<std::string>();
    m.framerate = j.at("framerate").get<double>();
    size_t dim = 4 + 3 * (joints - 1) + 6 * joints;
    for (const auto& frame : j.at("frames")) {
        auto flat = frame.get<std::vector<double>>();
        if (flat.size() != dim) throw InvalidMotion("frame length != pose_dim");
        m.frames.push_back(unflatten_pose(flat.data(), joints));
    }
    return m;
}

inline void save_motion(const std::string& path, const Motion& m) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IOFailure("cannot write motion file: " + path);
    os << motion_to_json(m).dump(2) << "\n";
    if (!os) throw IOFailure("motion write failed: " + path);
}

inline Motion load_motion(const std::string& path, size_t joints) {
    std::ifstream is(path);
    if (!is) throw MissingArtifact("cannot open motion file: " + path);
    Json j = Json::parse(is);
    return motion_from_json(j, joints);
}

inline Json skeleton_to_json(const Skeleton& sk) {
    Json j;
    j["id"] = sk.id;
    j["joint_names"] = sk.joint_names;
    j["parent_index"] = sk.parent_index;
    Json offs = Json::array();
    for (const auto& o : sk.offsets) offs.push_back({o.x(), o.y(), o.z()});
    j["offsets"] = std::move(offs);
    j["special"] = {{"root", sk.special.root},
                    {"left_hip", sk.special.left_hip},
                    {"right_hip", sk.special.right_hip},
                    {"left_shoulder", sk.special.left_shoulder},
                    {"right_shoulder", sk.special.right_shoulder},
                    {"left_foot", sk.special.left_foot},
                    {"right_foot", sk.special.right_foot}};
    return j;
}

inline Skeleton skeleton_from_json(const Json& j) {
    Skeleton sk;
    sk.id = j.at("id").get<std::string>();
    sk.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    sk.parent_index = j.at("parent_index").get<std::vector<int>>();
    for (const auto& o : j.at("offsets"))
        sk.offsets.emplace_back(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
    const auto& sp = j.at("special");
    sk.special = SpecialJoints{sp.at("root").get<int>(),          sp.at("left_hip").get<int>(),
                               sp.at("right_hip").get<int>(),     sp.at("left_shoulder").get<int>(),
                               sp.at("right_shoulder").get<int>(), sp.at("left_foot").get<int>(),
                               sp.at("right_foot").get<int>()};
    validate(sk);
    return sk;
}

}  // namespace msd
