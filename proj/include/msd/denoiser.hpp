#pragma once

// Text-conditioned x0-predicting transformer. The conditioning token is the
// projected text embedding plus the projected sinusoidal time embedding,
// prepended to the embedded motion frames; the output layer decodes latents
// back to the raw pose representation.

#include <string>
#include <vector>

#include "msd/checkpoint.hpp"
#include "msd/dataset.hpp"
#include "msd/diffusion.hpp"
#include "msd/motion_codec.hpp"
#include "msd/motion_json.hpp"
#include "msd/nn.hpp"
#include "msd/text_embed.hpp"
#include "msd/threading.hpp"

namespace msd {

struct DenoiserConfig {
    TransformerConfig tf{4, 64, 128, 4};  // desk profile; paper profile is 8/512/1024/4
    size_t pose_dim = 0;
    size_t text_dim = 64;
    size_t T = 1000;
};

struct DenoiserModel {
    DenoiserConfig cfg;
    MotionCodec codec;
    ParameterStore params;
};

inline void register_denoiser_params(ParameterStore& ps, const DenoiserConfig& cfg,
                                     uint64_t seed) {
    register_linear(ps, "in", cfg.pose_dim, cfg.tf.latent, seed);
    register_linear(ps, "out", cfg.tf.latent, cfg.pose_dim, seed);
    register_linear(ps, "time", cfg.tf.latent, cfg.tf.latent, seed);
    register_linear(ps, "text", cfg.text_dim, cfg.tf.latent, seed);
    register_transformer(ps, "enc", cfg.tf, seed);
}

inline DenoiserModel make_denoiser(const DenoiserConfig& cfg, const MotionCodec& codec,
                                   uint64_t seed) {
    DenoiserModel m;
    m.cfg = cfg;
    m.cfg.pose_dim = codec.pose_dim();
    m.codec = codec;
    register_denoiser_params(m.params, m.cfg, seed);
    return m;
}

// m_t is a normalized (f x pose_dim) tensor; returns the x0 prediction in
// the same space. Differentiable end to end.
inline Tensor denoiser_predict_x0(Graph& g, DenoiserModel& model, const Tensor& m_t, size_t t,
                                  const TextEmbedding& text, bool train) {
    const DenoiserConfig& cfg = model.cfg;
    if (t < 1 || t > cfg.T) throw InvalidSchedule("predict_x0: t outside [1, T]");
    if (m_t.cols() != cfg.pose_dim) throw ShapeMismatch("predict_x0: pose dimension mismatch");
    if (text.dim() != cfg.text_dim) throw ShapeMismatch("predict_x0: text dimension mismatch");
    ParameterStore& ps = model.params;

    Tensor time_in = Tensor::constant(1, cfg.tf.latent, sinusoidal_embedding(double(t), cfg.tf.latent));
    Tensor token = add(linear(g, ps, "time", time_in, train),
                       linear(g, ps, "text", Tensor::constant(1, cfg.text_dim, text.values), train));
    Tensor frames = linear(g, ps, "in", m_t, train);
    Tensor seq = add(row_concat({token, frames}), positional_encoding(m_t.rows() + 1, cfg.tf.latent));
    Tensor enc = transformer_encoder_stack(g, ps, "enc", seq, cfg.tf, train);
    return linear(g, ps, "out", row_slice(enc, 1, m_t.rows() + 1), train);
}

// Convenience non-training wrapper.
inline Tensor denoiser_predict_x0(DenoiserModel& model, const Tensor& m_t, size_t t,
                                  const TextEmbedding& text) {
    Graph g(false);
    return denoiser_predict_x0(g, model, m_t, t, text, false);
}

// --- checkpoints ------------------------------------------------------------------

inline void save_denoiser(const std::string& path, const DenoiserModel& m, const Skeleton& sk) {
    Json meta;
    meta["kind"] = "denoiser";
    meta["config"] = {{"layers", m.cfg.tf.layers}, {"latent", m.cfg.tf.latent},
                      {"ff", m.cfg.tf.ff},         {"heads", m.cfg.tf.heads},
                      {"pose_dim", m.cfg.pose_dim}, {"text_dim", m.cfg.text_dim},
                      {"T", m.cfg.T}};
    meta["codec"] = m.codec.to_json();
    meta["skeleton"] = skeleton_to_json(sk);
    save_checkpoint(path, m.params, meta);
}

inline std::pair<DenoiserModel, Skeleton> load_denoiser(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta.value("kind", "") != "denoiser") throw IOFailure("not a denoiser checkpoint");
    DenoiserModel m;
    const auto& c = ck.meta.at("config");
    m.cfg.tf = TransformerConfig{c.at("layers").get<size_t>(), c.at("latent").get<size_t>(),
                                 c.at("ff").get<size_t>(), c.at("heads").get<size_t>()};
    m.cfg.pose_dim = c.at("pose_dim").get<size_t>();
    m.cfg.text_dim = c.at("text_dim").get<size_t>();
    m.cfg.T = c.at("T").get<size_t>();
    m.codec = MotionCodec::from_json(ck.meta.at("codec"));
    m.params = std::move(ck.params);
    return {std::move(m), skeleton_from_json(ck.meta.at("skeleton"))};
}

// --- pre-training -----------------------------------------------------------------

struct TrainConfig {
    size_t batch = 64;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    size_t epochs = 1;
    uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> losses;  // one entry per optimizer step
};

// Minimizes E_{m, t ~ U[1,T]} |m0 - eps_theta(m_t, t, d)|^2 (mean-squared
// form). Batch samples run in parallel with per-sample derived seeds and
// index-ordered gradient reduction, so training is bit-reproducible.
inline TrainReport pretrain_prior(DenoiserModel& model, const std::vector<MotionSample>& data,
                                  const DiffusionSchedule& schedule, const TrainConfig& cfg,
                                  const TextEmbedder& embedder) {
    if (data.empty()) throw EmptyDataset("pretrain_prior: empty dataset");
    if (cfg.batch < 1 || cfg.epochs < 1 || cfg.lr <= 0) throw ConfigInvalid("bad train config");

    // precompute normalized rows and prompt embeddings
    std::vector<std::vector<double>> rows(data.size());
    std::vector<TextEmbedding> prompts(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        rows[i] = model.codec.encode_rows(data[i].motion);
        prompts[i] = embedder.embed(data[i].text);
    }

    AdamWConfig opt{cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay};
    TrainReport report;
    Rng order_rng(derive_seed(cfg.seed, 0x6f72646572));
    size_t dim = model.codec.pose_dim();
    size_t step_index = 0;

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
                Rng rng(derive_seed(cfg.seed, epoch, step_index, k));
                size_t t = size_t(rng.uniform_int(1, int64_t(schedule.T)));
                Tensor m0 = Tensor::constant(f, dim, rows[si]);
                Tensor eps = Tensor::constant(f, dim, rng.normal_vector(f * dim));
                Tensor m_t = forward_sample(schedule, m0, t, eps);
                Graph g(true);
                Tensor x0 = denoiser_predict_x0(g, model, m_t, t, prompts[si], true);
                Tensor loss = mse(x0, m0);
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
            if (!std::isfinite(mean_loss)) throw DivergedTraining("pretrain_prior: non-finite loss");
            adamw_step(model.params, grads, opt);
            report.losses.push_back(mean_loss);
            step_index++;
        }
    }
    return report;
}

// --- sampling ----------------------------------------------------------------------

// Full DDPM reverse chain from seeded Gaussian noise, conditioned on text.
inline Motion generate_from_text(DenoiserModel& model, const DiffusionSchedule& schedule,
                                 const std::string& text, size_t frames, uint64_t seed,
                                 const TextEmbedder& embedder) {
    size_t dim = model.codec.pose_dim();
    Rng rng(derive_seed(seed, 0x67656e));
    TextEmbedding d = embedder.embed(text);
    Tensor m = Tensor::constant(frames, dim, rng.normal_vector(frames * dim));
    for (size_t t = schedule.T; t >= 1; --t) {
        Tensor x0 = denoiser_predict_x0(model, m, t, d);
        Tensor eps = Tensor::constant(frames, dim, rng.normal_vector(frames * dim));
        m = ddpm_reverse_step(schedule, m, t, x0, eps);
    }
    return model.codec.decode(m);
}

}  // namespace msd
