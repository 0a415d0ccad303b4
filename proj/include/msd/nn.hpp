#pragma once

// Parameter storage, layer builders and the AdamW optimizer on top of the
// autodiff substrate. Models register named parameters once; every forward
// pass materializes leaves through a Graph so parallel per-sample passes
// stay isolated (grads live in the graph, values are shared read-only).

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "msd/errors.hpp"
#include "msd/rng.hpp"
#include "msd/tensor.hpp"

namespace msd {

struct Parameter {
    std::string name;
    size_t rows = 0, cols = 0;
    std::shared_ptr<std::vector<double>> value;
    std::vector<double> m, v;  // AdamW moments
    size_t index = 0;

    size_t numel() const { return rows * cols; }
};

class ParameterStore {
public:
    Parameter& add(const std::string& name, size_t rows, size_t cols,
                   std::vector<double> init) {
        if (index_.count(name)) throw ConfigInvalid("duplicate parameter: " + name);
        if (init.size() != rows * cols) throw ShapeMismatch("parameter init size: " + name);
        auto p = std::make_unique<Parameter>();
        p->name = name;
        p->rows = rows;
        p->cols = cols;
        p->value = std::make_shared<std::vector<double>>(std::move(init));
        p->m.assign(rows * cols, 0.0);
        p->v.assign(rows * cols, 0.0);
        p->index = params_.size();
        index_[name] = params_.size();
        params_.push_back(std::move(p));
        return *params_.back();
    }

    // Xavier-uniform weight; seeded independently of creation order.
    Parameter& add_linear_weight(const std::string& name, size_t in, size_t out, uint64_t seed) {
        Rng rng(derive_seed(seed, fnv1a(name)));
        double a = std::sqrt(6.0 / double(in + out));
        std::vector<double> w(in * out);
        for (auto& x : w) x = rng.uniform(-a, a);
        return add(name, in, out, std::move(w));
    }
    Parameter& add_gaussian(const std::string& name, size_t rows, size_t cols, double stddev,
                            uint64_t seed) {
        Rng rng(derive_seed(seed, fnv1a(name)));
        return add(name, rows, cols, rng.normal_vector(rows * cols, stddev));
    }
    Parameter& add_zeros(const std::string& name, size_t rows, size_t cols) {
        return add(name, rows, cols, std::vector<double>(rows * cols, 0.0));
    }
    Parameter& add_ones(const std::string& name, size_t rows, size_t cols) {
        return add(name, rows, cols, std::vector<double>(rows * cols, 1.0));
    }

    Parameter& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigInvalid("unknown parameter: " + name);
        return *params_[it->second];
    }
    const Parameter& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigInvalid("unknown parameter: " + name);
        return *params_[it->second];
    }
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    size_t size() const { return params_.size(); }
    Parameter& operator[](size_t i) { return *params_[i]; }
    const Parameter& operator[](size_t i) const { return *params_[i]; }

    size_t total_values() const {
        size_t n = 0;
        for (const auto& p : params_) n += p->numel();
        return n;
    }

    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }

    // Deep copy (fine-tuning starts from a copy of the prior).
    ParameterStore clone() const {
        ParameterStore out;
        for (const auto& p : params_) {
            auto& q = out.add(p->name, p->rows, p->cols, *p->value);
            q.m = p->m;
            q.v = p->v;
        }
        out.step_ = step_;
        return out;
    }

private:
    int64_t step_ = 0;
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, size_t> index_;
};

// Aligned per-parameter gradient accumulator (index-ordered, so sums are
// reduced deterministically regardless of threading).
struct GradBuffer {
    std::vector<std::vector<double>> g;

    explicit GradBuffer(const ParameterStore& ps) {
        g.resize(ps.size());
        for (size_t i = 0; i < ps.size(); ++i) g[i].assign(ps[i].numel(), 0.0);
    }
    void add(const GradBuffer& other) {
        for (size_t i = 0; i < g.size(); ++i)
            for (size_t k = 0; k < g[i].size(); ++k) g[i][k] += other.g[i][k];
    }
    void scale(double s) {
        for (auto& gi : g)
            for (auto& x : gi) x *= s;
    }
};

// Per-forward-pass context. Memoizes one leaf per parameter so repeated uses
// (e.g. across unrolled diffusion steps) accumulate into a single grad.
class Graph {
public:
    explicit Graph(bool trainable = true) : trainable_(trainable) {}

    Tensor param(const Parameter& p, bool trainable = true) {
        auto it = leaves_.find(p.index);
        if (it != leaves_.end()) return it->second;
        Tensor t = Tensor::leaf(p.value, p.rows, p.cols, trainable_ && trainable);
        leaves_.emplace(p.index, t);
        return t;
    }

    bool trainable() const { return trainable_; }

    // Harvest parameter gradients (after backward) into an aligned buffer.
    void accumulate_grads(GradBuffer& sink) const {
        for (const auto& [idx, t] : leaves_) {
            if (!t.requires_grad() || t.grad().empty()) continue;
            auto& dst = sink.g[idx];
            const auto& src = t.grad();
            for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
    }

private:
    bool trainable_;
    std::map<size_t, Tensor> leaves_;
};

// --- optimizer -----------------------------------------------------------------

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// One decoupled-weight-decay Adam step over every parameter in the store.
inline void adamw_step(ParameterStore& ps, const GradBuffer& grads, const AdamWConfig& cfg) {
    ps.set_step_count(ps.step_count() + 1);
    double t = double(ps.step_count());
    double bc1 = 1.0 - std::pow(cfg.beta1, t);
    double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (size_t i = 0; i < ps.size(); ++i) {
        Parameter& p = ps[i];
        const auto& g = grads.g[i];
        auto& w = *p.value;
        for (size_t k = 0; k < w.size(); ++k) {
            p.m[k] = cfg.beta1 * p.m[k] + (1.0 - cfg.beta1) * g[k];
            p.v[k] = cfg.beta2 * p.v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            double mhat = p.m[k] / bc1;
            double vhat = p.v[k] / bc2;
            w[k] = w[k] * (1.0 - cfg.lr * cfg.weight_decay) -
                   cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

// --- embeddings -----------------------------------------------------------------

// Classic sinusoidal table row: [sin(x/10000^(2i/d)), cos(...)] pairs.
inline std::vector<double> sinusoidal_embedding(double position, size_t dim) {
    std::vector<double> e(dim);
    for (size_t i = 0; i < dim / 2; ++i) {
        double freq = std::pow(10000.0, -2.0 * double(i) / double(dim));
        e[2 * i] = std::sin(position * freq);
        e[2 * i + 1] = std::cos(position * freq);
    }
    return e;
}

inline Tensor positional_encoding(size_t rows, size_t dim) {
    std::vector<double> table(rows * dim);
    for (size_t r = 0; r < rows; ++r) {
        auto e = sinusoidal_embedding(double(r), dim);
        std::copy(e.begin(), e.end(), table.begin() + r * dim);
    }
    return Tensor::constant(rows, dim, std::move(table));
}

// --- layers ----------------------------------------------------------------------

inline Tensor linear(Graph& g, ParameterStore& ps, const std::string& prefix, const Tensor& x,
                     bool trainable = true) {
    Tensor w = g.param(ps.at(prefix + ".w"), trainable);
    Tensor b = g.param(ps.at(prefix + ".b"), trainable);
    return add_row_broadcast(matmul(x, w), b);
}

inline void register_linear(ParameterStore& ps, const std::string& prefix, size_t in, size_t out,
                            uint64_t seed) {
    ps.add_linear_weight(prefix + ".w", in, out, seed);
    ps.add_zeros(prefix + ".b", 1, out);
}

struct TransformerConfig {
    size_t layers = 4;
    size_t latent = 64;
    size_t ff = 128;
    size_t heads = 4;
};

inline void register_transformer(ParameterStore& ps, const std::string& prefix,
                                 const TransformerConfig& cfg, uint64_t seed) {
    if (cfg.latent % cfg.heads != 0) throw ConfigInvalid("latent must divide by heads");
    for (size_t l = 0; l < cfg.layers; ++l) {
        std::string lp = prefix + ".l" + std::to_string(l);
        register_linear(ps, lp + ".wq", cfg.latent, cfg.latent, seed);
        register_linear(ps, lp + ".wk", cfg.latent, cfg.latent, seed);
        register_linear(ps, lp + ".wv", cfg.latent, cfg.latent, seed);
        register_linear(ps, lp + ".wo", cfg.latent, cfg.latent, seed);
        register_linear(ps, lp + ".ff1", cfg.latent, cfg.ff, seed);
        register_linear(ps, lp + ".ff2", cfg.ff, cfg.latent, seed);
        ps.add_ones(lp + ".ln1.g", 1, cfg.latent);
        ps.add_zeros(lp + ".ln1.b", 1, cfg.latent);
        ps.add_ones(lp + ".ln2.g", 1, cfg.latent);
        ps.add_zeros(lp + ".ln2.b", 1, cfg.latent);
    }
}

// Bidirectional multi-head self-attention. `key_bias` (optional, 1 x seq)
// is added to every row of the score matrix before softmax; padding uses a
// large negative bias.
inline Tensor multi_head_self_attention(Graph& g, ParameterStore& ps, const std::string& lp,
                                        const Tensor& x, size_t heads, bool trainable,
                                        const Tensor* key_bias = nullptr) {
    size_t d = x.cols();
    size_t dh = d / heads;
    Tensor q = linear(g, ps, lp + ".wq", x, trainable);
    Tensor k = linear(g, ps, lp + ".wk", x, trainable);
    Tensor v = linear(g, ps, lp + ".wv", x, trainable);
    std::vector<Tensor> head_outs;
    head_outs.reserve(heads);
    for (size_t h = 0; h < heads; ++h) {
        Tensor qh = col_slice(q, h * dh, (h + 1) * dh);
        Tensor kh = col_slice(k, h * dh, (h + 1) * dh);
        Tensor vh = col_slice(v, h * dh, (h + 1) * dh);
        Tensor scores = scale(matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
        if (key_bias) {
            // broadcast the (1 x seq) bias over score rows
            scores = add_row_broadcast(scores, *key_bias);
        }
        Tensor attn = softmax_rows(scores);
        head_outs.push_back(matmul(attn, vh));
    }
    Tensor merged = col_concat(head_outs);
    return linear(g, ps, lp + ".wo", merged, trainable);
}

inline Tensor transformer_encoder_layer(Graph& g, ParameterStore& ps, const std::string& lp,
                                        const Tensor& x, const TransformerConfig& cfg,
                                        bool trainable, const Tensor* key_bias = nullptr) {
    Tensor attn = multi_head_self_attention(g, ps, lp, x, cfg.heads, trainable, key_bias);
    Tensor y = layer_norm_rows(add(x, attn), g.param(ps.at(lp + ".ln1.g"), trainable),
                               g.param(ps.at(lp + ".ln1.b"), trainable));
    Tensor ff = linear(g, ps, lp + ".ff2", gelu(linear(g, ps, lp + ".ff1", y, trainable)),
                       trainable);
    return layer_norm_rows(add(y, ff), g.param(ps.at(lp + ".ln2.g"), trainable),
                           g.param(ps.at(lp + ".ln2.b"), trainable));
}

inline Tensor transformer_encoder_stack(Graph& g, ParameterStore& ps, const std::string& prefix,
                                        Tensor x, const TransformerConfig& cfg, bool trainable,
                                        const Tensor* key_bias = nullptr) {
    for (size_t l = 0; l < cfg.layers; ++l)
        x = transformer_encoder_layer(g, ps, prefix + ".l" + std::to_string(l), x, cfg, trainable,
                                      key_bias);
    return x;
}

}  // namespace msd
