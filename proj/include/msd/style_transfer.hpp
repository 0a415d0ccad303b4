#pragma once

// Stage II: style-neutral pair generation with root-trajectory inpainting,
// fine-tuning a copy of the prior with the reconstruction and semantic
// losses, and inference-time transfer with optional velocity warping.

#include <string>
#include <vector>

#include "msd/denoiser.hpp"
#include "msd/discriminator.hpp"
#include "msd/eval.hpp"
#include "msd/prompts.hpp"

namespace msd {

struct StyleNeutralPair {
    Motion style_example;  // m^s
    Motion neutral;        // m^{s_n}, horizontal root track bitwise equal to m^s's
    std::string style_prompt;
    std::string neutral_prompt;
};

struct FinetuneConfig {
    size_t G = 950;
    size_t K = 300;
    double lambda_sr = 1.0;
    double lambda_s = 0.1;
    size_t epochs = 1;
    uint64_t seed = 0;
    // desk-scale knobs; the paper profile trains at batch 64, lr 1e-4
    size_t batch = 16;
    double lr = 1e-3;
    size_t max_steps = 0;  // 0 = no cap; used by the G/K sweep's brief runs

    void validate(size_t T) const {
        if (!(1 <= K && K <= G && G <= T)) throw ConfigInvalid("need 1 <= K <= G <= T");
    }
};

namespace detail {

inline Tensor overwrite_track(const Tensor& x0, const MotionCodec& codec,
                              const std::vector<double>& track_norm) {
    std::vector<double> rows = x0.values();
    overwrite_root_track_norm(rows, codec, track_norm);
    return Tensor::constant(x0.rows(), x0.cols(), std::move(rows));
}

inline StyleLabel style_of_prompt(const std::string& prompt) {
    for (size_t s = 0; s < kStyleCount; ++s)
        if (prompt.find(style_phrase(StyleLabel(s))) != std::string::npos) return StyleLabel(s);
    throw MissingStyleVocabulary("no style phrase in prompt: " + prompt);
}

// Deterministic DDIM inversion of a clean sample up to grid step k_snap,
// querying `predict` at each departure point (zero implied noise at t = 0).
inline Tensor ddim_invert(const DiffusionSchedule& schedule, const Tensor& m0, size_t k_snap,
                          const std::function<Tensor(const Tensor&, size_t)>& predict) {
    auto chain = ddim_chain(schedule, k_snap);
    std::vector<size_t> up(chain.rbegin(), chain.rend());
    Tensor m = m0;
    size_t t_from = 0;
    for (size_t t_to : up) {
        Tensor x0 = t_from == 0 ? m : predict(m, t_from);
        m = ddim_forward_step(schedule, m, t_from, t_to, x0);
        t_from = t_to;
    }
    return m;
}

}  // namespace detail

// --- style-neutral pair generation --------------------------------------------------

// Noise m^s to step G (closed form), then run the full DDPM reverse chain
// conditioned on the neutralized prompt; after every step the x0 estimate's
// horizontal root track is overwritten with m^s's (Eq.-8-style inpainting).
// The final write happens in raw units, so the pair invariant is bitwise.
inline StyleNeutralPair generate_neutral_pair(DenoiserModel& prior,
                                              const DiffusionSchedule& schedule,
                                              const Motion& style_example,
                                              const std::string& style_prompt, size_t G,
                                              uint64_t seed, const TextEmbedder& embedder) {
    if (G > schedule.T) throw ConfigInvalid("generate_neutral_pair: G > T");
    std::string neutral_prompt;
    try {
        neutral_prompt = neutralize_prompt(style_prompt);
    } catch (const UnknownTemplate& e) {
        throw PromptRewriteFailed(e.what());
    }

    StyleNeutralPair pair;
    pair.style_example = style_example;
    pair.style_prompt = style_prompt;
    pair.neutral_prompt = neutral_prompt;

    const MotionCodec& codec = prior.codec;
    std::vector<double> style_rows = codec.encode_rows(style_example);
    size_t f = style_example.frame_count();
    std::vector<double> track_norm = extract_root_track_norm(style_rows, codec);

    if (G == 0) {
        pair.neutral = style_example;
        return pair;
    }

    TextEmbedding d_neutral = embedder.embed(neutral_prompt);
    Rng rng(derive_seed(seed, 0x70616972));
    Tensor m = forward_sample(schedule, Tensor::constant(f, codec.pose_dim(), style_rows), G,
                              Tensor::constant(f, codec.pose_dim(),
                                               rng.normal_vector(f * codec.pose_dim())));
    for (size_t t = G; t >= 1; --t) {
        Tensor x0 = detail::overwrite_track(denoiser_predict_x0(prior, m, t, d_neutral), codec,
                                            track_norm);
        Tensor eps = Tensor::constant(f, codec.pose_dim(),
                                      t > 1 ? rng.normal_vector(f * codec.pose_dim())
                                            : std::vector<double>(f * codec.pose_dim(), 0.0));
        m = ddpm_reverse_step(schedule, m, t, x0, eps);
    }
    pair.neutral = codec.decode(m);
    // final inpainting write in raw units: bitwise equality of the tracks
    write_horizontal_root_track(pair.neutral, extract_horizontal_root_track(style_example));
    return pair;
}

// Same procedure applied to a styled content motion; returns the neutral
// intermediate only.
inline Motion neutralize_content(DenoiserModel& prior, const DiffusionSchedule& schedule,
                                 const Motion& styled_content, const std::string& prompt, size_t G,
                                 uint64_t seed, const TextEmbedder& embedder) {
    return generate_neutral_pair(prior, schedule, styled_content, prompt, G, seed, embedder)
        .neutral;
}

// --- fine-tuning ---------------------------------------------------------------------

struct FinetuneReport {
    std::vector<double> total_losses;
    std::vector<double> sr_losses;
    std::vector<double> s_losses;
};

struct FinetuneResult {
    DenoiserModel model;  // eps_theta_s
    FinetuneReport report;
};

// One epoch over the neutral split: every optimizer step combines (a) the
// style-reconstruction loss through the differentiable K-step DDIM reverse
// of the pair and (b) the semantic cosine loss of transferred batch motions
// under the frozen discriminator. Only the copied prior trains.
inline FinetuneResult finetune_style(const DenoiserModel& prior, DiscriminatorModel& dis,
                                     const std::vector<MotionSample>& neutral_data,
                                     const StyleNeutralPair& pair, const FinetuneConfig& cfg,
                                     const DiffusionSchedule& schedule,
                                     const TextEmbedder& embedder) {
    cfg.validate(schedule.T);
    if (neutral_data.empty()) throw EmptyDataset("finetune_style: no neutral motions");

    FinetuneResult result;
    DenoiserModel& out_model = result.model;
    out_model.cfg = prior.cfg;
    out_model.codec = prior.codec;
    out_model.params = prior.params.clone();
    out_model.params.set_step_count(0);
    for (size_t i = 0; i < out_model.params.size(); ++i) {
        std::fill(out_model.params[i].m.begin(), out_model.params[i].m.end(), 0.0);
        std::fill(out_model.params[i].v.begin(), out_model.params[i].v.end(), 0.0);
    }

    const MotionCodec& codec = out_model.codec;
    size_t dim = codec.pose_dim();
    size_t k_snap = ddim_snap_down(schedule, cfg.K);
    StyleLabel style = detail::style_of_prompt(pair.style_prompt);

    TextEmbedding d_style = embedder.embed(pair.style_prompt);
    TextEmbedding d_neutral = embedder.embed(pair.neutral_prompt);
    std::vector<double> pair_neutral_rows = codec.encode_rows(pair.neutral);
    std::vector<double> pair_style_rows = codec.encode_rows(pair.style_example);
    size_t pair_f = pair.neutral.frame_count();

    struct ContentEntry {
        std::vector<double> rows;
        TextEmbedding d_neutral, d_styled;
    };
    std::vector<ContentEntry> contents(neutral_data.size());
    for (size_t i = 0; i < neutral_data.size(); ++i) {
        const auto& s = neutral_data[i];
        if (s.style != StyleLabel::neutral)
            throw ConfigInvalid("finetune_style: non-neutral sample in neutral split");
        contents[i].rows = codec.encode_rows(s.motion);
        contents[i].d_neutral = embedder.embed(s.text);
        std::string styled_text;
        try {
            styled_text = stylize_prompt(s.text, style);
        } catch (const UnknownTemplate& e) {
            throw MissingStyleVocabulary(e.what());
        }
        contents[i].d_styled = embedder.embed(styled_text);
    }

    auto predict_nograd = [&](const TextEmbedding& d) {
        return [&out_model, d](const Tensor& m, size_t t) {
            Graph g(false);
            DenoiserModel& mm = out_model;
            return denoiser_predict_x0(g, mm, m, t, d, false);
        };
    };

    AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, 0.0};
    FinetuneReport& report = result.report;
    Rng order_rng(derive_seed(cfg.seed, 0x6674));
    size_t steps_done = 0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(contents.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        order_rng.shuffle(order);

        for (size_t start = 0; start < order.size(); start += cfg.batch) {
            if (cfg.max_steps && steps_done >= cfg.max_steps) break;
            size_t n = std::min(cfg.batch, order.size() - start);
            auto chain = ddim_chain(schedule, k_snap);

            // (a) style reconstruction branch
            double sr_value = 0.0;
            GradBuffer grads(out_model.params);
            if (k_snap > 0) {
                Tensor m0 = Tensor::constant(pair_f, dim, pair_neutral_rows);
                Tensor mk = detail::ddim_invert(schedule, m0, k_snap, predict_nograd(d_neutral));
                Graph g(true);
                Tensor m = stop_gradient(mk);
                Tensor target = Tensor::constant(pair_f, dim, pair_style_rows);
                Tensor sr_loss = Tensor::scalar(0.0);
                for (size_t i = 0; i < chain.size(); ++i) {
                    size_t t = chain[i];
                    size_t t_prev = i + 1 < chain.size() ? chain[i + 1] : 0;
                    Tensor x0 = denoiser_predict_x0(g, out_model, m, t, d_style, true);
                    sr_loss = add(sr_loss, mse(x0, target));
                    m = ddim_reverse_step(schedule, m, t, t_prev, x0);
                }
                sr_loss = scale(sr_loss, 1.0 / double(chain.size()));
                backward(sr_loss);
                sr_value = sr_loss.scalar_value();
                GradBuffer sr_grads(out_model.params);
                g.accumulate_grads(sr_grads);
                sr_grads.scale(cfg.lambda_sr);
                grads.add(sr_grads);
            }

            // (b) semantic branch over the content batch
            std::vector<double> s_values(n, 0.0);
            size_t workers = std::min(worker_count(), n);
            std::vector<GradBuffer> partial(workers, GradBuffer(out_model.params));
            size_t chunk = (n + workers - 1) / workers;
            if (cfg.lambda_s != 0.0) {
                parallel_for(n, [&](size_t kidx) {
                    const ContentEntry& ce = contents[order[start + kidx]];
                    size_t f = ce.rows.size() / dim;
                    Tensor m0 = Tensor::constant(f, dim, ce.rows);
                    Tensor styled;
                    if (k_snap > 0) {
                        Tensor mk =
                            detail::ddim_invert(schedule, m0, k_snap, predict_nograd(ce.d_neutral));
                        Graph g(true);
                        Tensor m = stop_gradient(mk);
                        Tensor x0 = m;
                        for (size_t i = 0; i < chain.size(); ++i) {
                            size_t t = chain[i];
                            size_t t_prev = i + 1 < chain.size() ? chain[i + 1] : 0;
                            x0 = denoiser_predict_x0(g, out_model, m, t, ce.d_styled, true);
                            m = ddim_reverse_step(schedule, m, t, t_prev, x0);
                        }
                        Tensor s_loss = dis_loss_t(g, dis, m, ce.d_styled, false);
                        backward(s_loss);
                        s_values[kidx] = s_loss.scalar_value();
                        g.accumulate_grads(partial[std::min(kidx / chunk, workers - 1)]);
                    } else {
                        Graph g(true);
                        Tensor s_loss = dis_loss_t(g, dis, m0, ce.d_styled, false);
                        s_values[kidx] = s_loss.scalar_value();
                    }
                });
                GradBuffer s_grads(out_model.params);
                for (const auto& p : partial) s_grads.add(p);
                s_grads.scale(cfg.lambda_s / double(n));
                grads.add(s_grads);
            }

            double s_value = 0.0;
            for (double v : s_values) s_value += v;
            s_value /= double(n);
            double total = cfg.lambda_sr * sr_value + cfg.lambda_s * s_value;
            if (!std::isfinite(total)) throw DivergedTraining("finetune_style: non-finite loss");
            adamw_step(out_model.params, grads, opt);
            report.total_losses.push_back(total);
            report.sr_losses.push_back(sr_value);
            report.s_losses.push_back(s_value);
            steps_done++;
        }
        if (cfg.max_steps && steps_done >= cfg.max_steps) break;
    }
    return result;
}

// --- inference ------------------------------------------------------------------------

// Deterministic DDIM forward K steps (noise-free inversion, consistent with
// fine-tuning) then DDIM reverse conditioned on the stylized prompt. The
// optional warp scales root velocities by U(style)/U(content).
inline Motion transfer(DenoiserModel& styled_model, const DiffusionSchedule& schedule,
                       const Motion& content, const std::string& stylized_prompt, size_t K,
                       bool apply_velocity_warp, const Motion* style_example,
                       const TextEmbedder& embedder) {
    const MotionCodec& codec = styled_model.codec;
    size_t k_snap = ddim_snap_down(schedule, K);
    Motion out = content;
    if (k_snap > 0) {
        std::string neutral_prompt;
        try {
            neutral_prompt = neutralize_prompt(stylized_prompt);
        } catch (const UnknownTemplate& e) {
            throw PromptRewriteFailed(e.what());
        }
        TextEmbedding d_styled = embedder.embed(stylized_prompt);
        TextEmbedding d_neutral = embedder.embed(neutral_prompt);
        Tensor m0 = codec.encode(content);
        auto predict = [&](const TextEmbedding& d) {
            return [&styled_model, d](const Tensor& m, size_t t) {
                Graph g(false);
                return denoiser_predict_x0(g, styled_model, m, t, d, false);
            };
        };
        Tensor m = detail::ddim_invert(schedule, m0, k_snap, predict(d_neutral));
        auto chain = ddim_chain(schedule, k_snap);
        for (size_t i = 0; i < chain.size(); ++i) {
            size_t t = chain[i];
            size_t t_prev = i + 1 < chain.size() ? chain[i + 1] : 0;
            Tensor x0 = denoiser_predict_x0(styled_model, m, t, d_styled);
            m = ddim_reverse_step(schedule, m, t, t_prev, x0);
        }
        out = codec.decode(m);
    }
    if (apply_velocity_warp) {
        if (!style_example) throw ConfigInvalid("transfer: warp requested without style example");
        double uc = velocity_vector_U(content);
        if (uc < 1e-8) throw ZeroVelocityContent("transfer: content velocity vector is ~0");
        double us = velocity_vector_U(*style_example);
        out = warp_global_velocity(out, us / uc);
    }
    return out;
}

// --- G/K sweep --------------------------------------------------------------------------

struct SweepRow {
    std::string kind;  // "G" | "K"
    size_t value = 0;
    double foot_contact_accuracy = 0.0;
    double clip_score = 0.0;
};

// Reporting tool: for each G, pair-generation alignment (foot contact) and
// neutrality (cosine of the pooled neutral motion to the neutral prompt);
// for each K, a brief fine-tune + transfer measuring alignment to the
// content and cosine to the stylized prompt. Asserts nothing.
inline std::vector<SweepRow> sweep_GK(DenoiserModel& prior, DiscriminatorModel& dis,
                                      const Skeleton& sk,
                                      const std::vector<MotionSample>& neutral_data,
                                      const MotionSample& style_sample,
                                      const MotionSample& content_sample,
                                      const DiffusionSchedule& schedule,
                                      const std::vector<size_t>& g_list,
                                      const std::vector<size_t>& k_list, uint64_t seed,
                                      const TextEmbedder& embedder) {
    std::vector<SweepRow> rows;
    for (size_t g : g_list) {
        StyleNeutralPair pair = generate_neutral_pair(prior, schedule, style_sample.motion,
                                                      style_sample.text, g, seed, embedder);
        SweepRow row;
        row.kind = "G";
        row.value = g;
        row.foot_contact_accuracy = foot_contact_accuracy(sk, pair.style_example, pair.neutral);
        row.clip_score = cosine_similarity(pool_motion(dis, pair.neutral),
                                           embedder.embed(pair.neutral_prompt).values);
        rows.push_back(row);
    }
    if (!k_list.empty()) {
        std::string styled_prompt =
            stylize_prompt(content_sample.text, detail::style_of_prompt(style_sample.text));
        size_t g_pair = std::min<size_t>(950, schedule.T);
        StyleNeutralPair pair = generate_neutral_pair(prior, schedule, style_sample.motion,
                                                      style_sample.text, g_pair, seed, embedder);
        for (size_t k : k_list) {
            SweepRow row;
            row.kind = "K";
            row.value = k;
            if (ddim_snap_down(schedule, k) == 0) {
                // empty chain: transfer is the identity
                row.foot_contact_accuracy = 1.0;
                row.clip_score = cosine_similarity(pool_motion(dis, content_sample.motion),
                                                   embedder.embed(styled_prompt).values);
            } else {
                FinetuneConfig fcfg;
                fcfg.G = g_pair;
                fcfg.K = k;
                fcfg.seed = seed;
                fcfg.max_steps = 4;  // brief
                fcfg.epochs = 1;
                FinetuneResult ft =
                    finetune_style(prior, dis, neutral_data, pair, fcfg, schedule, embedder);
                Motion transferred = transfer(ft.model, schedule, content_sample.motion,
                                              styled_prompt, k, false, nullptr, embedder);
                row.foot_contact_accuracy =
                    foot_contact_accuracy(sk, content_sample.motion, transferred);
                row.clip_score = cosine_similarity(pool_motion(dis, transferred),
                                                   embedder.embed(styled_prompt).values);
            }
            rows.push_back(row);
        }
    }
    return rows;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string csv = "kind,value,foot_contact_accuracy,clip_score\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.10g,%.10g\n", r.kind.c_str(), r.value,
                      r.foot_contact_accuracy, r.clip_score);
        csv += buf;
    }
    return csv;
}

}  // namespace msd
