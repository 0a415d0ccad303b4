#pragma once

// Procedural text-annotated stylized motion data. Contents are parametric
// sinusoidal gaits/gestures on the desk skeleton; styles are analytic
// modulations of the neutral parameters, so ground-truth stylized
// counterparts exist for every sample.

#include <fstream>
#include <string>
#include <vector>

#include "msd/motion.hpp"
#include "msd/motion_json.hpp"
#include "msd/prompts.hpp"
#include "msd/rng.hpp"
#include "msd/skeleton.hpp"

namespace msd {

struct MotionSample {
    Motion motion;
    ContentLabel content = ContentLabel::walk;
    StyleLabel style = StyleLabel::neutral;
    std::string text;
};

struct DatasetSpec {
    uint64_t seed = 7;
    size_t per_cell = 10;        // per (content, style) cell at uniform weights
    size_t min_len = 32;         // frames
    size_t max_len = 48;
    double neutral_weight = 0.7; // share of neutral samples per content row
    double split_ratio = 0.9;    // train fraction
    double framerate = 20.0;
};

struct Dataset {
    std::vector<MotionSample> train;
    std::vector<MotionSample> test;
};

namespace gait {

struct Params {
    double speed = 0.0;       // forward m/frame
    double freq = 1.0;        // cycles per second
    double leg_amp = 0.0;
    double knee_amp = 0.0;
    double arm_amp = 0.0;
    double bob_amp = 0.0;
    double sway_amp = 0.0;    // lateral root sway, m
    double spine_lean = 0.0;  // +forward pitch, rad
    double head_pitch = 0.0;  // +down, rad
    double wave_arm = 0.0;    // lateral raise angle for the waving arm
    double wave_osc = 0.0;
    double kick_amp = 0.0;
    double jitter = 0.0;      // rad of seeded per-frame noise on limb joints
};

inline Params content_params(ContentLabel c) {
    Params p;
    switch (c) {
        case ContentLabel::walk:
            p.speed = 0.040;
            p.freq = 1.0;
            p.leg_amp = 0.25;
            p.knee_amp = 0.55;
            p.arm_amp = 0.30;
            p.bob_amp = 0.012;
            p.sway_amp = 0.010;
            break;
        case ContentLabel::run:
            p.speed = 0.085;
            p.freq = 1.5;
            p.leg_amp = 0.38;
            p.knee_amp = 0.95;
            p.arm_amp = 0.55;
            p.bob_amp = 0.025;
            p.sway_amp = 0.012;
            break;
        case ContentLabel::jump:
            p.freq = 0.75;
            p.arm_amp = 0.9;   // arm swing into the leap
            p.bob_amp = 0.0;
            break;
        case ContentLabel::wave:
            p.freq = 1.2;
            p.wave_arm = 2.4;
            p.wave_osc = 0.35;
            break;
        case ContentLabel::kick:
            p.freq = 0.8;
            p.kick_amp = 1.05;
            p.arm_amp = 0.12;
            break;
    }
    return p;
}

inline void apply_style(Params& p, StyleLabel s) {
    switch (s) {
        case StyleLabel::neutral:
            break;
        case StyleLabel::old:
            // reduced amplitude, slower translation, forward lean
            p.leg_amp *= 0.6;
            p.knee_amp *= 0.6;
            p.arm_amp *= 0.6;
            p.wave_osc *= 0.6;
            p.kick_amp *= 0.6;
            p.bob_amp *= 0.6;
            p.speed *= 0.7;
            p.spine_lean += 0.35;
            break;
        case StyleLabel::proud:
            // chest raised, bigger arm swing
            p.spine_lean -= 0.25;
            p.head_pitch -= 0.15;
            p.arm_amp *= 1.2;
            p.wave_osc *= 1.2;
            break;
        case StyleLabel::angry:
            p.freq *= 1.4;
            p.jitter = 0.035;
            break;
        case StyleLabel::depressed:
            p.head_pitch += 0.50;
            p.speed *= 0.6;
            break;
    }
}

// Analytic world-space gait; facing fixed at +z, styles and per-sample
// variation already folded into `p`.
inline WorldMotion synthesize(const Skeleton& sk, ContentLabel content, const Params& p,
                              size_t length, double framerate, uint64_t jitter_seed) {
    WorldMotion w;
    w.skeleton_id = sk.id;
    w.framerate = framerate;
    Rng jrng(jitter_seed);
    for (size_t i = 0; i < length; ++i) {
        double phase = 2.0 * M_PI * p.freq * double(i) / framerate;
        WorldPose pose;
        pose.rot.assign(sk.joint_count(), Mat3::Identity());
        double height = kDefaultRootHeight + p.bob_amp * std::cos(2.0 * phase);
        double crouch = 0.0, flight = 0.0;
        if (content == ContentLabel::jump) {
            crouch = std::max(0.0, -std::sin(phase));
            flight = std::max(0.0, std::sin(phase));
            height = kDefaultRootHeight - 0.05 * crouch * crouch + 0.09 * flight * flight;
        }
        pose.root_pos = Vec3(p.sway_amp * std::sin(phase), height, p.speed * double(i));
        pose.rot[0] = Mat3::Identity();
        pose.rot[1] = rot_x(p.spine_lean);   // spine
        pose.rot[2] = rot_x(p.head_pitch);   // head

        double jit = p.jitter;
        auto noisy = [&](double angle) { return jit > 0.0 ? angle + jit * jrng.normal() : angle; };

        switch (content) {
            case ContentLabel::walk:
            case ContentLabel::run: {
                double hip_l = p.leg_amp * std::sin(phase);
                double hip_r = p.leg_amp * std::sin(phase + M_PI);
                double knee_l = p.knee_amp * std::max(0.0, -std::cos(phase));
                double knee_r = p.knee_amp * std::max(0.0, std::cos(phase));
                pose.rot[3] = rot_x(noisy(hip_l));
                pose.rot[4] = rot_x(noisy(knee_l));
                pose.rot[6] = rot_x(noisy(hip_r));
                pose.rot[7] = rot_x(noisy(knee_r));
                pose.rot[9] = rot_x(noisy(-p.arm_amp * std::sin(phase)));
                pose.rot[11] = rot_x(noisy(p.arm_amp * std::sin(phase)));
                break;
            }
            case ContentLabel::jump: {
                double knee = 0.52 * crouch;
                pose.rot[4] = rot_x(noisy(knee));
                pose.rot[7] = rot_x(noisy(knee));
                pose.rot[3] = rot_x(noisy(-0.25 * crouch));
                pose.rot[6] = rot_x(noisy(-0.25 * crouch));
                double arm = -p.arm_amp * flight;
                pose.rot[9] = rot_x(noisy(arm));
                pose.rot[11] = rot_x(noisy(arm));
                break;
            }
            case ContentLabel::wave: {
                pose.rot[11] = rot_z(noisy(-p.wave_arm + p.wave_osc * std::sin(2.0 * phase)));
                pose.rot[9] = rot_x(noisy(0.05 * std::sin(phase)));
                break;
            }
            case ContentLabel::kick: {
                double kick = p.kick_amp * std::max(0.0, std::sin(phase));
                pose.rot[6] = rot_x(noisy(-kick * kick / std::max(p.kick_amp, 1e-9)));
                pose.rot[9] = rot_x(noisy(p.arm_amp * std::sin(phase)));
                pose.rot[11] = rot_x(noisy(-p.arm_amp * std::sin(phase)));
                break;
            }
        }
        w.frames.push_back(std::move(pose));
    }
    return w;
}

}  // namespace gait

// Deterministic in all arguments. Per-sample variation jitters amplitudes
// (8%) and frequency (3%); the gait phase itself is fixed so class
// prototypes stay temporally aligned across samples.
inline MotionSample generate_sample(const Skeleton& sk, ContentLabel content, StyleLabel style,
                                    size_t length, uint64_t seed, double framerate = 20.0) {
    gait::Params p = gait::content_params(content);
    gait::apply_style(p, style);
    Rng vrng(derive_seed(seed, 0x76617279));
    double amp_jit = 1.0 + 0.08 * vrng.uniform(-1.0, 1.0);
    double freq_jit = 1.0 + 0.03 * vrng.uniform(-1.0, 1.0);
    p.leg_amp *= amp_jit;
    p.knee_amp *= amp_jit;
    p.arm_amp *= amp_jit;
    p.wave_osc *= amp_jit;
    p.kick_amp *= amp_jit;
    p.freq *= freq_jit;

    WorldMotion w =
        gait::synthesize(sk, content, p, length, framerate, derive_seed(seed, 0x6a697474));
    MotionSample s;
    s.motion = localize(sk, w);
    s.content = content;
    s.style = style;
    s.text = render_prompt(content, style);
    return s;
}

// --- dataset assembly ------------------------------------------------------------

// Per-content row: neutral gets round(row_total * neutral_weight) samples,
// the remaining styles split the rest (deterministic remainder handling).
inline std::vector<size_t> style_cell_counts(const DatasetSpec& spec) {
    size_t row_total = spec.per_cell * kStyleCount;
    std::vector<size_t> counts(kStyleCount, 0);
    counts[0] = size_t(std::llround(double(row_total) * spec.neutral_weight));
    size_t rest = row_total - counts[0];
    size_t base = rest / (kStyleCount - 1);
    size_t rem = rest % (kStyleCount - 1);
    for (size_t s = 1; s < kStyleCount; ++s) counts[s] = base + (s - 1 < rem ? 1 : 0);
    return counts;
}

inline Dataset build_dataset(const Skeleton& sk, const DatasetSpec& spec) {
    if (spec.min_len < 16 || spec.max_len < spec.min_len)
        throw ConfigInvalid("dataset length range must be >= 16 frames");
    auto counts = style_cell_counts(spec);
    std::vector<MotionSample> all;
    for (size_t c = 0; c < kContentCount; ++c) {
        for (size_t s = 0; s < kStyleCount; ++s) {
            for (size_t k = 0; k < counts[s]; ++k) {
                uint64_t sample_seed = derive_seed(spec.seed, c, s, k);
                Rng lrng(derive_seed(sample_seed, 0x6c656e));
                size_t len = size_t(lrng.uniform_int(int64_t(spec.min_len), int64_t(spec.max_len)));
                all.push_back(generate_sample(sk, ContentLabel(c), StyleLabel(s), len, sample_seed,
                                              spec.framerate));
            }
        }
    }
    std::vector<size_t> order(all.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(spec.seed, 0x73706c6974));
    shuffle_rng.shuffle(order);
    size_t n_train = size_t(std::llround(double(all.size()) * spec.split_ratio));
    Dataset out;
    for (size_t i = 0; i < order.size(); ++i) {
        if (i < n_train)
            out.train.push_back(std::move(all[order[i]]));
        else
            out.test.push_back(std::move(all[order[i]]));
    }
    return out;
}

// --- JSONL ------------------------------------------------------------------------

inline Json sample_to_json(const MotionSample& s) {
    Json j;
    j["content"] = to_string(s.content);
    j["style"] = to_string(s.style);
    j["text"] = s.text;
    j["motion"] = motion_to_json(s.motion);
    return j;
}

inline MotionSample sample_from_json(const Json& j, size_t joints) {
    MotionSample s;
    s.content = content_from_string(j.at("content").get<std::string>());
    s.style = style_from_string(j.at("style").get<std::string>());
    s.text = j.at("text").get<std::string>();
    s.motion = motion_from_json(j.at("motion"), joints);
    return s;
}

inline void save_jsonl(const std::string& path, const std::vector<MotionSample>& samples) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IOFailure("cannot write dataset: " + path);
    for (const auto& s : samples) os << sample_to_json(s).dump() << "\n";
    if (!os) throw IOFailure("dataset write failed: " + path);
}

inline std::vector<MotionSample> load_jsonl(const std::string& path, size_t joints) {
    std::ifstream is(path);
    if (!is) throw MissingArtifact("cannot open dataset: " + path);
    std::vector<MotionSample> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(sample_from_json(Json::parse(line), joints));
    }
    return out;
}

}  // namespace msd
