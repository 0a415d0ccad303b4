#pragma once

// Motion-semantic discriminator: a trainable semantic token is prepended to
// the pose embeddings; after encoding, only the token's output is kept and
// projected into the text-embedding space, where a clamped-cosine loss pulls
// it toward the paired prompt.

#include <string>
#include <vector>

#include "msd/checkpoint.hpp"
#include "msd/dataset.hpp"
#include "msd/motion_codec.hpp"
#include "msd/motion_json.hpp"
#include "msd/nn.hpp"
#include "msd/text_embed.hpp"
#include "msd/threading.hpp"

namespace msd {

struct DiscriminatorConfig {
    TransformerConfig tf{4, 64, 128, 4};  // N = 4 desk profile (paper: 8)
    size_t pose_dim = 0;
    size_t out_dim = 64;  // text embedding dimension
};

struct DiscriminatorModel {
    DiscriminatorConfig cfg;
    MotionCodec codec;
    ParameterStore params;
};

inline DiscriminatorModel make_discriminator(const DiscriminatorConfig& cfg,
                                             const MotionCodec& codec, uint64_t seed) {
    DiscriminatorModel m;
    m.cfg = cfg;
    m.cfg.pose_dim = codec.pose_dim();
    m.codec = codec;
    register_linear(m.params, "in", m.cfg.pose_dim, cfg.tf.latent, seed);
    m.params.add_gaussian("token", 1, cfg.tf.latent, 0.02, seed);
    register_transformer(m.params, "enc", cfg.tf, seed);
    register_linear(m.params, "proj", cfg.tf.latent, cfg.out_dim, seed);
    return m;
}

// Pools a normalized (f x pose_dim) motion tensor into a (1 x out_dim)
// semantic feature. `key_bias` (1 x f+1, token first) masks padded frames.
inline Tensor discriminator_pool(Graph& g, DiscriminatorModel& model, const Tensor& m_norm,
                                 bool train, const Tensor* key_bias = nullptr) {
    if (m_norm.cols() != model.cfg.pose_dim)
        throw ShapeMismatch("discriminator_pool: pose dimension mismatch");
    ParameterStore& ps = model.params;
    Tensor frames = linear(g, ps, "in", m_norm, train);
    Tensor seq = add(row_concat({g.param(ps.at("token"), train), frames}),
                     positional_encoding(m_norm.rows() + 1, model.cfg.tf.latent));
    Tensor enc = transformer_encoder_stack(g, ps, "enc", seq, model.cfg.tf, train, key_bias);
    return linear(g, ps, "proj", row_slice(enc, 0, 1), train);
}

inline std::vector<double> pool_motion(DiscriminatorModel& model, const Motion& m) {
    Graph g(false);
    Tensor h = discriminator_pool(g, model, model.codec.encode(m), false);
    return h.values();
}

// 1 - cos_delta(Dis(m), E_text(d)); range [0, 2].
inline Tensor dis_loss_t(Graph& g, DiscriminatorModel& model, const Tensor& m_norm,
                         const TextEmbedding& text, bool train, double delta = 1e-6) {
    Tensor h = discriminator_pool(g, model, m_norm, train);
    Tensor e = Tensor::constant(1, text.dim(), text.values);
    return axpy(Tensor::scalar(1.0), -1.0, cosine_similarity_t(h, e, delta));
}

inline double dis_loss(DiscriminatorModel& model, const Motion& m, const TextEmbedding& text) {
    Graph g(false);
    return dis_loss_t(g, model, model.codec.encode(m), text, false).scalar_value();
}

// --- checkpoints ------------------------------------------------------------------

inline void save_discriminator(const std::string& path, const DiscriminatorModel& m,
                               const Skeleton& sk) {
    Json meta;
    meta["kind"] = "discriminator";
    meta["config"] = {{"layers", m.cfg.tf.layers}, {"latent", m.cfg.tf.latent},
                      {"ff", m.cfg.tf.ff},         {"heads", m.cfg.tf.heads},
                      {"pose_dim", m.cfg.pose_dim}, {"out_dim", m.cfg.out_dim}};
    meta["codec"] = m.codec.to_json();
    meta["skeleton"] = skeleton_to_json(sk);
    save_checkpoint(path, m.params, meta);
}

inline std::pair<DiscriminatorModel, Skeleton> load_discriminator(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta.value("kind", "") != "discriminator")
        throw IOFailure("not a discriminator checkpoint");
    DiscriminatorModel m;
    const auto& c = ck.meta.at("config");
    m.cfg.tf = TransformerConfig{c.at("layers").get<size_t>(), c.at("latent").get<size_t>(),
                                 c.at("ff").get<size_t>(), c.at("heads").get<size_t>()};
    m.cfg.pose_dim = c.at("pose_dim").get<size_t>();
    m.cfg.out_dim = c.at("out_dim").get<size_t>();
    m.codec = MotionCodec::from_json(ck.meta.at("codec"));
    m.params = std::move(ck.params);
    return {std::move(m), skeleton_from_json(ck.meta.at("skeleton"))};
}

// --- pre-training -----------------------------------------------------------------

// Positive-pair alignment in the text-embedding space (the loss carries no
// negative term); mean loss over pairs, AdamW, deterministic under seed.
inline TrainReport pretrain_discriminator(DiscriminatorModel& model,
                                          const std::vector<MotionSample>& data,
                                          const TrainConfig& cfg, const TextEmbedder& embedder) {
    if (data.empty()) throw EmptyDataset("pretrain_discriminator: empty dataset");

    std::vector<std::vector<double>> rows(data.size());
    std::vector<TextEmbedding> prompts(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        rows[i] = model.codec.encode_rows(data[i].motion);
        prompts[i] = embedder.embed(data[i].text);
    }

    AdamWConfig opt{cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay};
    TrainReport report;
    Rng order_rng(derive_seed(cfg.seed, 0x646973));
    size_t dim = model.codec.pose_dim();

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(data.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        order_rng.shuffle(order);

        for (size_t start = 0; start < order.size(); start += cfg.batch) {
            size_t n = std::min(cfg.batch, order.size() - start);
            std::vector<double> losses(n, 0.0);
            size_t workers = std::min(worker_count(), n);
            std::vector<GradBuffer> partial(workers, GradBuffer(model.params));
            size_t chunk = (n + workers - 1) / workers;

            parallel_for(n, [&](size_t k) {
                size_t si = order[start + k];
                size_t f = rows[si].size() / dim;
                Graph g(true);
                Tensor m = Tensor::constant(f, dim, rows[si]);
                Tensor loss = dis_loss_t(g, model, m, prompts[si], true);
                backward(loss);
                losses[k] = loss.scalar_value();
                g.accumulate_grads(partial[std::min(k / chunk, workers - 1)]);
            });

            GradBuffer grads(model.params);
            for (const auto& p : partial) grads.add(p);
            grads.scale(1.0 / double(n));
            double mean_loss = 0.0;
            for (double l : losses) mean_loss += l;
            mean_loss /= double(n);
            if (!std::isfinite(mean_loss))
                throw DivergedTraining("pretrain_discriminator: non-finite loss");
            adamw_step(model.params, grads, opt);
            report.losses.push_back(mean_loss);
        }
    }
    return report;
}

}  // namespace msd
