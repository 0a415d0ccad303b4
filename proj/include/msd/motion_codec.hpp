#pragma once

// Motion <-> tensor codec. The diffusion stack operates on per-channel
// standardized (f x pose_dim) tensors; the codec owns the dataset statistics
// and travels inside every checkpoint.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msd/dataset.hpp"
#include "msd/motion.hpp"
#include "msd/tensor.hpp"

namespace msd {

struct MotionCodec {
    std::string skeleton_id;
    size_t joints = 0;
    double framerate = 20.0;
    std::vector<double> mean, stddev;  // per pose channel

    size_t pose_dim() const { return 4 + 3 * (joints - 1) + 6 * joints; }

    static MotionCodec fit(const Skeleton& sk, const std::vector<MotionSample>& samples) {
        if (samples.empty()) throw EmptyDataset("MotionCodec::fit: no samples");
        MotionCodec c;
        c.skeleton_id = sk.id;
        c.joints = sk.joint_count();
        c.framerate = samples[0].motion.framerate;
        size_t dim = c.pose_dim();
        c.mean.assign(dim, 0.0);
        c.stddev.assign(dim, 0.0);
        size_t n = 0;
        for (const auto& s : samples) {
            auto rows = motion_to_rows(s.motion);
            for (size_t i = 0; i < rows.size(); ++i) c.mean[i % dim] += rows[i];
            n += s.motion.frame_count();
        }
        for (auto& m : c.mean) m /= double(n);
        for (const auto& s : samples) {
            auto rows = motion_to_rows(s.motion);
            for (size_t i = 0; i < rows.size(); ++i) {
                double d = rows[i] - c.mean[i % dim];
                c.stddev[i % dim] += d * d;
            }
        }
        for (auto& v : c.stddev) v = std::max(std::sqrt(v / double(n)), 1e-4);
        return c;
    }

    std::vector<double> encode_rows(const Motion& m) const {
        auto rows = motion_to_rows(m);
        size_t dim = pose_dim();
        for (size_t i = 0; i < rows.size(); ++i) rows[i] = (rows[i] - mean[i % dim]) / stddev[i % dim];
        return rows;
    }

    Tensor encode(const Motion& m) const {
        return Tensor::constant(m.frame_count(), pose_dim(), encode_rows(m));
    }

    Motion decode(const std::vector<double>& rows) const {
        size_t dim = pose_dim();
        std::vector<double> raw(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) raw[i] = rows[i] * stddev[i % dim] + mean[i % dim];
        return rows_to_motion(raw, joints, skeleton_id, framerate);
    }
    Motion decode(const Tensor& t) const { return decode(t.values()); }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["skeleton_id"] = skeleton_id;
        j["joints"] = joints;
        j["framerate"] = framerate;
        j["mean"] = mean;
        j["stddev"] = stddev;
        return j;
    }
    static MotionCodec from_json(const nlohmann::ordered_json& j) {
        MotionCodec c;
        c.skeleton_id = j.at("skeleton_id").get<std::string>();
        c.joints = j.at("joints").get<size_t>();
        c.framerate = j.at("framerate").get<double>();
        c.mean = j.at("mean").get<std::vector<double>>();
        c.stddev = j.at("stddev").get<std::vector<double>>();
        return c;
    }
};

// Normalized-space view of the horizontal root track channels (o_x, o_z).
inline void overwrite_root_track_norm(std::vector<double>& rows, const MotionCodec& codec,
                                      const std::vector<double>& track_norm) {
    size_t dim = codec.pose_dim();
    size_t f = rows.size() / dim;
    if (track_norm.size() != 2 * f) throw LengthMismatch("root track length != 2f");
    for (size_t i = 0; i < f; ++i) {
        rows[i * dim + kChannelOx] = track_norm[2 * i];
        rows[i * dim + kChannelOz] = track_norm[2 * i + 1];
    }
}

inline std::vector<double> extract_root_track_norm(const std::vector<double>& rows,
                                                   const MotionCodec& codec) {
    size_t dim = codec.pose_dim();
    size_t f = rows.size() / dim;
    std::vector<double> track(2 * f);
    for (size_t i = 0; i < f; ++i) {
        track[2 * i] = rows[i * dim + kChannelOx];
        track[2 * i + 1] = rows[i * dim + kChannelOz];
    }
    return track;
}

}  // namespace msd
