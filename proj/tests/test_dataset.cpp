#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "msd/bvh.hpp"
#include "msd/dataset.hpp"
#include "msd/motion_json.hpp"
#include "support/motion_builders.hpp"

using namespace msd;

namespace {
const Skeleton sk = default_skeleton();
}

TEST_CASE("prompt templates match the fixed annotations") {
    REQUIRE(render_prompt(ContentLabel::run, StyleLabel::depressed) ==
            "a person is running in depression");
    REQUIRE(neutralize_prompt("a person is running in depression") ==
            "a person is running neutrally");
    REQUIRE(stylize_prompt("a person jumps neutrally", StyleLabel::depressed) ==
            "a person jumps in depression");
}

TEST_CASE("neutralize(stylize(t, s)) == t over the whole template grid") {
    for (size_t c = 0; c < kContentCount; ++c) {
        std::string t = render_prompt(ContentLabel(c), StyleLabel::neutral);
        for (size_t s = 0; s < kStyleCount; ++s) {
            std::string styled = stylize_prompt(t, StyleLabel(s));
            REQUIRE(neutralize_prompt(styled) == t);
        }
    }
}

TEST_CASE("unknown template raises") {
    REQUIRE_THROWS_AS(neutralize_prompt("a cat sits quietly"), UnknownTemplate);
    REQUIRE_THROWS_AS(stylize_prompt("no style words here", StyleLabel::old), UnknownTemplate);
}

TEST_CASE("generate_sample is deterministic") {
    auto a = generate_sample(sk, ContentLabel::walk, StyleLabel::neutral, 60, 7);
    auto b = generate_sample(sk, ContentLabel::walk, StyleLabel::neutral, 60, 7);
    REQUIRE(motion_to_rows(a.motion) == motion_to_rows(b.motion));
    REQUIRE(a.text == "a person is walking neutrally");
    REQUIRE(a.motion.frame_count() == 60);
}

TEST_CASE("old style slows the velocity vector") {
    auto old_walk = generate_sample(sk, ContentLabel::walk, StyleLabel::old, 60, 7);
    auto neutral = generate_sample(sk, ContentLabel::walk, StyleLabel::neutral, 60, 7);
    REQUIRE(velocity_vector_U(old_walk.motion) < velocity_vector_U(neutral.motion));
}

TEST_CASE("kick keeps the root horizontally still") {
    auto kick = generate_sample(sk, ContentLabel::kick, StyleLabel::neutral, 60, 7);
    for (const auto& v : kick.motion.frames) {
        REQUIRE(std::abs(v.o[1]) < 1e-3);
        REQUIRE(std::abs(v.o[2]) < 1e-3);
    }
}

TEST_CASE("every generated cell passes the motion invariants") {
    for (size_t c = 0; c < kContentCount; ++c) {
        for (size_t s = 0; s < kStyleCount; ++s) {
            auto sample = generate_sample(sk, ContentLabel(c), StyleLabel(s), 40, 11);
            REQUIRE_NOTHROW(check_motion_finite(sample.motion));
            for (const auto& f : sample.motion.frames)
                for (const auto& r : f.r) REQUIRE_NOTHROW(rot6d_decode(r));
        }
    }
}

TEST_CASE("walk alternates foot contacts on the ground plane") {
    auto walk = generate_sample(sk, ContentLabel::walk, StyleLabel::neutral, 60, 3);
    auto pos = forward_kinematics(sk, walk.motion);
    int left_down = 0, right_down = 0, both_up = 0;
    for (size_t i = 0; i < pos.size(); ++i) {
        bool l = pos[i][sk.special.left_foot].y() < 0.05;
        bool r = pos[i][sk.special.right_foot].y() < 0.05;
        left_down += l;
        right_down += r;
        both_up += (!l && !r);
    }
    // both feet spend real time near the ground, in alternation
    REQUIRE(left_down > 10);
    REQUIRE(right_down > 10);
    REQUIRE(both_up < 30);
}

TEST_CASE("dataset counting, weights and split") {
    DatasetSpec spec;
    spec.seed = 3;
    spec.per_cell = 10;
    spec.min_len = 16;
    spec.max_len = 20;
    spec.neutral_weight = 0.7;
    spec.split_ratio = 0.9;

    auto counts = style_cell_counts(spec);
    size_t row = 0;
    for (size_t v : counts) row += v;
    REQUIRE(row == 50);            // per-content row preserves per_cell * styles
    REQUIRE(counts[0] == 35);      // 70% neutral

    Dataset ds = build_dataset(sk, spec);
    REQUIRE(ds.train.size() + ds.test.size() == 250);
    REQUIRE(ds.train.size() == 225);
    REQUIRE(ds.test.size() == 25);

    size_t neutral = 0;
    for (const auto& s : ds.train) neutral += s.style == StyleLabel::neutral;
    for (const auto& s : ds.test) neutral += s.style == StyleLabel::neutral;
    REQUIRE(neutral == 35 * 5);

    // uniform weights reduce to the plain per-cell grid
    DatasetSpec uniform = spec;
    uniform.neutral_weight = 0.2;
    auto ucounts = style_cell_counts(uniform);
    for (size_t v : ucounts) REQUIRE(v == 10);
}

TEST_CASE("jsonl round trip is byte-identical") {
    DatasetSpec spec;
    spec.seed = 5;
    spec.per_cell = 2;
    spec.min_len = 16;
    spec.max_len = 18;
    Dataset ds = build_dataset(sk, spec);

    std::string path = "/tmp/msd_test_dataset.jsonl";
    save_jsonl(path, ds.train);
    std::ifstream f1(path);
    std::stringstream buf1;
    buf1 << f1.rdbuf();

    auto loaded = load_jsonl(path, sk.joint_count());
    REQUIRE(loaded.size() == ds.train.size());
    save_jsonl(path, loaded);
    std::ifstream f2(path);
    std::stringstream buf2;
    buf2 << f2.rdbuf();
    REQUIRE(buf1.str() == buf2.str());
    std::remove(path.c_str());

    // same seed rebuild gives identical bytes
    Dataset ds2 = build_dataset(sk, spec);
    save_jsonl(path, ds2.train);
    std::ifstream f3(path);
    std::stringstream buf3;
    buf3 << f3.rdbuf();
    REQUIRE(buf3.str() == buf1.str());
    std::remove(path.c_str());
}

TEST_CASE("motion json round-trips exactly") {
    auto s = generate_sample(sk, ContentLabel::run, StyleLabel::proud, 24, 9);
    Json j = motion_to_json(s.motion);
    Motion back = motion_from_json(j, sk.joint_count());
    REQUIRE(motion_to_rows(back) == motion_to_rows(s.motion));
    REQUIRE(back.framerate == s.motion.framerate);
}

TEST_CASE("bvh export writes a parsable file") {
    auto s = generate_sample(sk, ContentLabel::walk, StyleLabel::neutral, 20, 13);
    std::string path = "/tmp/msd_test_export.bvh";
    export_bvh(path, sk, s.motion);
    std::ifstream is(path);
    REQUIRE(is.good());
    std::string line;
    std::getline(is, line);
    REQUIRE(line == "HIERARCHY");
    size_t joints = 0, frames_line = 0;
    while (std::getline(is, line)) {
        if (line.find("JOINT") != std::string::npos || line.find("ROOT") != std::string::npos)
            joints++;
        if (line.rfind("Frames:", 0) == 0) {
            frames_line = 1;
            REQUIRE(line == "Frames: 20");
        }
    }
    REQUIRE(joints == sk.joint_count());
    REQUIRE(frames_line == 1);
    std::remove(path.c_str());
}
