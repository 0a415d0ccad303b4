#pragma once

// Deterministic stand-in for a CLIP-style text encoder: bag of seeded
// per-token Gaussian vectors, summed and L2-normalized. Prompts sharing
// tokens land closer in cosine, which is the only property the pipeline
// relies on. A real encoder can be slotted in behind the same contract.

#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "msd/errors.hpp"
#include "msd/rng.hpp"

namespace msd {

struct TextEmbedding {
    std::vector<double> values;
    std::string source_text;

    size_t dim() const { return values.size(); }
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b,
                                double delta = 1e-6) {
    if (a.size() != b.size()) throw DimensionMismatch("cosine_similarity: sizes differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::max(std::sqrt(na) * std::sqrt(nb), delta);
}

class TextEmbedder {
public:
    explicit TextEmbedder(size_t dim = 64, uint64_t seed = 0x7465787420656d62ull)
        : dim_(dim), seed_(seed) {}

    size_t dim() const { return dim_; }
    uint64_t seed() const { return seed_; }

    TextEmbedding embed(const std::string& text) const {
        auto tokens = tokenize(text);
        if (tokens.empty()) throw EmptyText("embed: no tokens in text");
        std::vector<double> acc(dim_, 0.0);
        for (const auto& tok : tokens) {
            Rng rng(derive_seed(seed_, fnv1a(tok)));
            for (size_t i = 0; i < dim_; ++i) acc[i] += rng.normal();
        }
        double norm = 0.0;
        for (double v : acc) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& v : acc) v /= norm;
        return TextEmbedding{std::move(acc), text};
    }

    static std::vector<std::string> tokenize(const std::string& text) {
        std::vector<std::string> tokens;
        std::string cur;
        for (char ch : text) {
            if (std::isalnum(static_cast<unsigned char>(ch))) {
                cur.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
            } else if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        }
        if (!cur.empty()) tokens.push_back(cur);
        return tokens;
    }

private:
    size_t dim_;
    uint64_t seed_;
};

}  // namespace msd
