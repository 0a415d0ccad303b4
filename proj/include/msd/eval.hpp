#pragma once

// Metrics and baselines: temporal-conv classifiers (CRA/SRA and the FMD
// feature extractor), Frechet motion distance, foot-contact accuracy,
// DTW alignment and the KNN+DTW pair baseline.

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "msd/checkpoint.hpp"
#include "msd/dataset.hpp"
#include "msd/motion_codec.hpp"
#include "msd/motion_json.hpp"
#include "msd/nn.hpp"
#include "msd/threading.hpp"

namespace msd {

// --- classifier -------------------------------------------------------------------

struct ClassifierConfig {
    size_t channels = 32;  // conv width; also the pooled feature dimension
    size_t kernel = 5;
    size_t classes = 5;
};

struct MotionClassifier {
    ClassifierConfig cfg;
    MotionCodec codec;
    std::string label_kind;  // "content" | "style"
    ParameterStore params;
};

inline MotionClassifier make_classifier(const ClassifierConfig& cfg, const MotionCodec& codec,
                                        const std::string& label_kind, uint64_t seed) {
    MotionClassifier m;
    m.cfg = cfg;
    m.codec = codec;
    m.label_kind = label_kind;
    register_linear(m.params, "conv1", cfg.kernel * codec.pose_dim(), cfg.channels, seed);
    register_linear(m.params, "conv2", cfg.kernel * cfg.channels, cfg.channels, seed);
    register_linear(m.params, "head", cfg.channels, cfg.classes, seed);
    return m;
}

// Two temporal conv blocks, global average pooling, linear head. The pooled
// (1 x channels) vector is the deep feature used for FMD.
inline Tensor classifier_pooled(Graph& g, MotionClassifier& model, const Tensor& m_norm,
                                bool train) {
    ParameterStore& ps = model.params;
    Tensor h = relu(linear(g, ps, "conv1", im2col_rows(m_norm, model.cfg.kernel), train));
    h = relu(linear(g, ps, "conv2", im2col_rows(h, model.cfg.kernel), train));
    return mean_rows(h);
}

inline Tensor classifier_logits(Graph& g, MotionClassifier& model, const Tensor& m_norm,
                                bool train) {
    return linear(g, model.params, "head", classifier_pooled(g, model, m_norm, train), train);
}

inline std::vector<double> pooled_features(MotionClassifier& model, const Motion& m) {
    Graph g(false);
    Tensor f = classifier_pooled(g, model, model.codec.encode(m), false);
    return f.values();
}

inline size_t classify(MotionClassifier& model, const Motion& m) {
    Graph g(false);
    Tensor logits = classifier_logits(g, model, model.codec.encode(m), false);
    size_t best = 0;
    for (size_t j = 1; j < logits.numel(); ++j)
        if (logits.values()[j] > logits.values()[best]) best = j;
    return best;
}

inline size_t sample_label(const MotionSample& s, const std::string& kind) {
    return kind == "style" ? size_t(s.style) : size_t(s.content);
}

inline MotionClassifier train_classifier(const std::vector<MotionSample>& data,
                                         const std::string& label_kind,
                                         const ClassifierConfig& ccfg, const MotionCodec& codec,
                                         const TrainConfig& cfg) {
    if (data.empty()) throw EmptyDataset("train_classifier: empty dataset");
    MotionClassifier model = make_classifier(ccfg, codec, label_kind, cfg.seed);

    std::vector<std::vector<double>> rows(data.size());
    std::vector<size_t> labels(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        rows[i] = codec.encode_rows(data[i].motion);
        labels[i] = sample_label(data[i], label_kind);
    }

    AdamWConfig opt{cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay};
    Rng order_rng(derive_seed(cfg.seed, 0x636c73));
    size_t dim = codec.pose_dim();
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(data.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        order_rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += cfg.batch) {
            size_t n = std::min(cfg.batch, order.size() - start);
            size_t workers = std::min(worker_count(), n);
            std::vector<GradBuffer> partial(workers, GradBuffer(model.params));
            size_t chunk = (n + workers - 1) / workers;
            std::vector<double> losses(n, 0.0);
            parallel_for(n, [&](size_t k) {
                size_t si = order[start + k];
                Graph g(true);
                Tensor m = Tensor::constant(rows[si].size() / dim, dim, rows[si]);
                Tensor loss = cross_entropy_logits(classifier_logits(g, model, m, true), labels[si]);
                backward(loss);
                losses[k] = loss.scalar_value();
                g.accumulate_grads(partial[std::min(k / chunk, workers - 1)]);
            });
            GradBuffer grads(model.params);
            for (const auto& p : partial) grads.add(p);
            grads.scale(1.0 / double(n));
            double mean_loss = 0;
            for (double l : losses) mean_loss += l;
            if (!std::isfinite(mean_loss)) throw DivergedTraining("train_classifier: non-finite loss");
            adamw_step(model.params, grads, opt);
        }
    }
    return model;
}

inline double classifier_accuracy(MotionClassifier& model,
                                  const std::vector<MotionSample>& data) {
    if (data.empty()) throw EmptyInput("classifier_accuracy: no samples");
    size_t hit = 0;
    for (const auto& s : data)
        hit += classify(model, s.motion) == sample_label(s, model.label_kind);
    return double(hit) / double(data.size());
}

// Fraction of motions whose argmax prediction equals the expected label.
inline double recognition_accuracy(MotionClassifier& model, const std::vector<Motion>& motions,
                                   const std::vector<size_t>& expected) {
    if (motions.empty() || motions.size() != expected.size())
        throw EmptyInput("recognition_accuracy: empty or mismatched inputs");
    size_t hit = 0;
    for (size_t i = 0; i < motions.size(); ++i) hit += classify(model, motions[i]) == expected[i];
    return double(hit) / double(motions.size());
}

inline double cra(MotionClassifier& content_classifier, const std::vector<Motion>& transferred,
                  const std::vector<size_t>& source_content_labels) {
    return recognition_accuracy(content_classifier, transferred, source_content_labels);
}

inline double sra(MotionClassifier& style_classifier, const std::vector<Motion>& transferred,
                  const std::vector<size_t>& target_style_labels) {
    return recognition_accuracy(style_classifier, transferred, target_style_labels);
}

// --- FMD --------------------------------------------------------------------------

struct FeatureStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // symmetrized
};

inline FeatureStats feature_stats(MotionClassifier& model, const std::vector<Motion>& motions) {
    if (motions.empty()) throw EmptyInput("feature_stats: no motions");
    size_t d = model.cfg.channels;
    Eigen::MatrixXd feats(motions.size(), d);
    for (size_t i = 0; i < motions.size(); ++i) {
        auto f = pooled_features(model, motions[i]);
        for (size_t j = 0; j < d; ++j) feats(Eigen::Index(i), Eigen::Index(j)) = f[j];
    }
    FeatureStats st;
    st.mean = feats.colwise().mean();
    Eigen::MatrixXd centered = feats.rowwise() - st.mean.transpose();
    st.cov = centered.transpose() * centered / double(motions.size());
    st.cov = 0.5 * (st.cov + st.cov.transpose());
    return st;
}

// PSD square root by eigendecomposition; eigenvalues below -1e-8 raise,
// small negatives clamp to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw MatrixSqrtFailure(std::string(what) + ": eigensolver failed");
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-8) throw MatrixSqrtFailure(std::string(what) + ": negative eigenvalue");
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline double fmd(const FeatureStats& a, const FeatureStats& b) {
    if (a.mean.size() != b.mean.size()) throw DimensionMismatch("fmd: feature dims differ");
    Eigen::MatrixXd sqrt_b = psd_sqrt(b.cov, "fmd");
    Eigen::MatrixXd inner = sqrt_b * a.cov * sqrt_b;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
    if (es.info() != Eigen::Success) throw MatrixSqrtFailure("fmd: eigensolver failed");
    double tr_cross = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double ev = es.eigenvalues()[i];
        if (ev < -1e-8) throw MatrixSqrtFailure("fmd: negative eigenvalue in product");
        tr_cross += std::sqrt(std::max(ev, 0.0));
    }
    double d2 = (a.mean - b.mean).squaredNorm();
    double value = d2 + a.cov.trace() + b.cov.trace() - 2.0 * tr_cross;
    if (value < 0.0 && value > -1e-8) value = 0.0;
    return value;
}

// --- foot contact -----------------------------------------------------------------

struct ContactThresholds {
    double height = 0.05;  // meters
    double speed = 0.05;   // meters per frame
};

// Per-frame (left, right) binary contact labels from world-space kinematics.
inline std::vector<std::array<bool, 2>> foot_contact_labels(
    const Skeleton& sk, const Motion& m, const ContactThresholds& thr = ContactThresholds{}) {
    auto pos = forward_kinematics(sk, m);
    size_t f = pos.size();
    std::vector<std::array<bool, 2>> labels(f);
    int feet[2] = {sk.special.left_foot, sk.special.right_foot};
    for (size_t i = 0; i < f; ++i) {
        for (int side = 0; side < 2; ++side) {
            double h = pos[i][feet[side]].y();
            size_t prev = i == 0 ? 1 : i;  // frame 0 copies frame 1's speed
            double v = f < 2 ? 0.0 : (pos[prev][feet[side]] - pos[prev - 1][feet[side]]).norm();
            labels[i][side] = h < thr.height && v < thr.speed;
        }
    }
    return labels;
}

inline double foot_contact_accuracy(const Skeleton& sk, const Motion& a, const Motion& b,
                                    const ContactThresholds& thr = ContactThresholds{}) {
    if (a.frame_count() != b.frame_count())
        throw LengthMismatch("foot_contact_accuracy: frame counts differ");
    auto la = foot_contact_labels(sk, a, thr);
    auto lb = foot_contact_labels(sk, b, thr);
    size_t agree = 0;
    for (size_t i = 0; i < la.size(); ++i) {
        agree += la[i][0] == lb[i][0];
        agree += la[i][1] == lb[i][1];
    }
    return double(agree) / double(2 * la.size());
}

// --- DTW --------------------------------------------------------------------------

struct DtwResult {
    double cost = 0.0;
    std::vector<std::pair<size_t, size_t>> path;  // monotone, boundary-anchored
};

// Classic O(|a||b|) dynamic program with steps {(1,0),(0,1),(1,1)}.
template <typename Frame>
DtwResult dtw(const std::vector<Frame>& a, const std::vector<Frame>& b,
              const std::function<double(const Frame&, const Frame&)>& distance) {
    if (a.empty() || b.empty()) throw EmptyInput("dtw: empty sequence");
    size_t n = a.size(), m = b.size();
    Eigen::MatrixXd acc(n, m);
    Eigen::Matrix<int8_t, Eigen::Dynamic, Eigen::Dynamic> from(n, m);  // 0=diag 1=up 2=left
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < m; ++j) {
            double d = distance(a[i], b[j]);
            if (i == 0 && j == 0) {
                acc(0, 0) = d;
                from(0, 0) = 0;
            } else if (i == 0) {
                acc(0, j) = acc(0, j - 1) + d;
                from(0, j) = 2;
            } else if (j == 0) {
                acc(i, 0) = acc(i - 1, 0) + d;
                from(i, 0) = 1;
            } else {
                double best = acc(i - 1, j - 1);
                int8_t arg = 0;
                if (acc(i - 1, j) < best) {
                    best = acc(i - 1, j);
                    arg = 1;
                }
                if (acc(i, j - 1) < best) {
                    best = acc(i, j - 1);
                    arg = 2;
                }
                acc(i, j) = best + d;
                from(i, j) = arg;
            }
        }
    }
    DtwResult res;
    res.cost = acc(n - 1, m - 1);
    size_t i = n - 1, j = m - 1;
    while (true) {
        res.path.emplace_back(i, j);
        if (i == 0 && j == 0) break;
        switch (from(i, j)) {
            case 0: --i; --j; break;
            case 1: --i; break;
            default: --j; break;
        }
    }
    std::reverse(res.path.begin(), res.path.end());
    return res;
}

inline double frame_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Time-warp `motion` onto the reference timeline of the path's first index:
// output frame i averages the motion frames matched to i.
inline Motion apply_warp(const std::vector<std::pair<size_t, size_t>>& path, const Motion& motion,
                         size_t target_len) {
    size_t dim = motion.frames.empty() ? 0 : flatten_pose(motion.frames[0]).size();
    auto rows = motion_to_rows(motion);
    std::vector<double> out(target_len * dim, 0.0);
    std::vector<double> counts(target_len, 0.0);
    for (const auto& [i, j] : path) {
        if (i >= target_len) continue;
        for (size_t c = 0; c < dim; ++c) out[i * dim + c] += rows[j * dim + c];
        counts[i] += 1.0;
    }
    for (size_t i = 0; i < target_len; ++i) {
        double n = std::max(counts[i], 1.0);
        for (size_t c = 0; c < dim; ++c) out[i * dim + c] /= n;
    }
    size_t joints = motion.frames[0].r.size();
    return rows_to_motion(out, joints, motion.skeleton_id, motion.framerate);
}

// KNN+DTW pair baseline: nearest neutral motion of the same content by
// DTW-aligned mean frame distance, warped onto the style example's timeline.
inline Motion knn_dtw_baseline(const std::vector<MotionSample>& dataset, const Motion& style_example,
                               ContentLabel content) {
    std::vector<const MotionSample*> candidates;
    for (const auto& s : dataset)
        if (s.style == StyleLabel::neutral && s.content == content) candidates.push_back(&s);
    if (candidates.empty()) throw NoCandidates("knn_dtw_baseline: no neutral motions of content");

    auto to_frames = [](const Motion& m) {
        std::vector<std::vector<double>> frames;
        for (const auto& f : m.frames) frames.push_back(flatten_pose(f));
        return frames;
    };
    auto style_frames = to_frames(style_example);

    double best_cost = 1e300;
    const MotionSample* best = nullptr;
    DtwResult best_dtw;
    for (const auto* cand : candidates) {
        auto frames = to_frames(cand->motion);
        DtwResult r = dtw<std::vector<double>>(style_frames, frames, frame_distance);
        double mean_cost = r.cost / double(r.path.size());
        if (mean_cost < best_cost) {
            best_cost = mean_cost;
            best = cand;
            best_dtw = std::move(r);
        }
    }
    return apply_warp(best_dtw.path, best->motion, style_example.frame_count());
}

}  // namespace msd
