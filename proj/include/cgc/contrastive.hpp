#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cgc/dataset.hpp"
#include "cgc/encoder.hpp"
#include "cgc/generator.hpp"
#include "cgc/tensor.hpp"

namespace cgc {

// Which generated negatives populate the per-graph dictionary.
enum class NegativesMode { ProximityOnly, FeatureOnly, Both };

inline const char* negatives_name(NegativesMode m) {
    switch (m) {
        case NegativesMode::ProximityOnly: return "proximity";
        case NegativesMode::FeatureOnly: return "feature";
        case NegativesMode::Both: return "both";
    }
    return "?";
}

inline NegativesMode negatives_from_name(const std::string& s) {
    if (s == "proximity") return NegativesMode::ProximityOnly;
    if (s == "feature") return NegativesMode::FeatureOnly;
    if (s == "both") return NegativesMode::Both;
    throw ConfigError("unknown negatives mode '" + s + "' (expected proximity|feature|both)");
}

// Dictionary size: the positive key plus the selected negatives.
inline std::size_t dictionary_size(NegativesMode m) {
    return m == NegativesMode::Both ? 3 : 2;
}

// Cosine similarity on plain row vectors; zero vectors define 0.
inline double embedding_similarity(const Matrix& a, const Matrix& b) {
    a.require_same_shape(b, "embedding_similarity");
    if (a.rows() != 1) throw ShapeError("embedding_similarity: expects 1 x d rows");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        dot += a(0, j) * b(0, j);
        na += a(0, j) * a(0, j);
        nb += b(0, j) * b(0, j);
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Differentiable cosine similarity between 1 x d embeddings.
inline Tensor cosine_similarity(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols() || a.rows() != 1 || b.rows() != 1)
        throw ShapeError("cosine_similarity: need matching 1 x d rows");
    const double eps = 1e-12;
    if (frobenius(a.value()) < eps || frobenius(b.value()) < eps)
        return tape.scalar_constant(0.0);
    Tensor num = dot(a, b);
    Tensor den = hadamard(sqrt(dot(a, a)), sqrt(dot(b, b)));
    return div(num, den);
}

// Query plus the small per-graph key dictionary {k_+, negatives...}.
struct ContrastKeys {
    Tensor q;
    Tensor k_plus;
    std::vector<Tensor> negatives;
};

// InfoNCE over the dictionary; the denominator sums over ALL keys
// including k_+ itself. -log(exp(s+/tau) / sum_t exp(s_t/tau)).
inline Tensor info_nce(const ContrastKeys& keys, double tau) {
    if (keys.negatives.empty())
        throw ShapeError("info_nce: dictionary needs at least one negative key");
    if (tau <= 0.0) throw ConfigError("info_nce: tau must be positive");
    Tape& tape = *keys.q.tape();

    Tensor s_plus = cosine_similarity(tape, keys.q, keys.k_plus);
    std::vector<Tensor> sims{s_plus};
    for (const Tensor& k : keys.negatives) sims.push_back(cosine_similarity(tape, keys.q, k));

    Tensor row = scale(concat_scalars(sims), 1.0 / tau);
    Tensor lse = log(sum(exp(row)));
    return sub(lse, scale(s_plus, 1.0 / tau));
}

struct ContrastConfig {
    double tau = 1.0;
    NegativesMode negatives = NegativesMode::Both;
    int epochs = 30;
    double lr = 1e-4;
    std::size_t batch_size = 256;
    bool momentum_gn = false;  // momentum-updated g_n instead of joint training
    double momentum = 0.999;
};

// Stage 2: dictionary look-up contrastive training. q = g_p(A),
// k_+ = g_n(A); g_n also encodes the generated negatives and nothing
// else. Gradients accumulate across each mini-batch, one Adam step per
// batch. Returns the per-epoch mean loss curve.
inline std::vector<double> train_contrastive(const GraphDataset& ds,
                                             const std::vector<HardNegativePair>& negatives,
                                             EncoderParams& g_p, EncoderParams& g_n,
                                             const ContrastConfig& cfg, std::uint64_t seed) {
    if (negatives.size() != ds.graphs.size())
        throw ConfigError("train_contrastive: " + std::to_string(negatives.size()) +
                          " negative pairs for " + std::to_string(ds.graphs.size()) + " graphs");
    if (cfg.batch_size < 1) throw ConfigError("train_contrastive: batch_size must be >= 1");

    const bool use_prox = cfg.negatives != NegativesMode::FeatureOnly;
    const bool use_feat = cfg.negatives != NegativesMode::ProximityOnly;
    const EncoderKind kind = g_p.cfg.kind;

    // Propagation matrices are fixed inputs; prepare them once.
    std::vector<Matrix> adj_orig, adj_prox;
    adj_orig.reserve(ds.graphs.size());
    if (use_prox) adj_prox.reserve(ds.graphs.size());
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        adj_orig.push_back(prepare_adjacency(kind, ds.graphs[i].adjacency));
        if (use_prox)
            adj_prox.push_back(prepare_adjacency(kind, negatives[i].proximity_negative.adjacency));
    }

    std::vector<Param*> trainable = g_p.encoder_params();
    if (!cfg.momentum_gn) {
        for (Param* p : g_n.encoder_params()) trainable.push_back(p);
    } else {
        // Momentum mode starts g_n as a copy of g_p, per the usual
        // momentum-encoder construction.
        auto src = g_p.encoder_params();
        auto dst = g_n.encoder_params();
        for (std::size_t k = 0; k < src.size(); ++k) dst[k]->value = src[k]->value;
    }
    AdamState adam;

    std::vector<std::size_t> order(ds.graphs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> curve;
    curve.reserve(std::size_t(std::max(cfg.epochs, 0)));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = make_rng(seed, 0xc0417ULL + std::uint64_t(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                const Graph& g = ds.graphs[i];
                Tape tape;
                const bool train_keys = !cfg.momentum_gn;

                ContrastKeys keys;
                keys.q = encode(tape, tape.constant(adj_orig[i]), tape.constant(g.features),
                                g_p, true);
                keys.k_plus = encode(tape, tape.constant(adj_orig[i]), tape.constant(g.features),
                                     g_n, train_keys);
                if (use_prox)
                    keys.negatives.push_back(encode(tape, tape.constant(adj_prox[i]),
                                                    tape.constant(g.features), g_n, train_keys));
                if (use_feat)
                    keys.negatives.push_back(
                        encode(tape, tape.constant(adj_orig[i]),
                               tape.constant(negatives[i].feature_negative.features), g_n,
                               train_keys));

                Tensor loss = info_nce(keys, cfg.tau);
                epoch_loss += loss.scalar();
                tape.backward(loss);
            }
            adam_step(trainable, adam, cfg.lr);
            if (cfg.momentum_gn) {
                auto src = g_p.encoder_params();
                auto dst = g_n.encoder_params();
                for (std::size_t k = 0; k < src.size(); ++k) {
                    Matrix& d = dst[k]->value;
                    const Matrix& s = src[k]->value;
                    for (std::size_t r = 0; r < d.rows(); ++r)
                        for (std::size_t c = 0; c < d.cols(); ++c)
                            d(r, c) = cfg.momentum * d(r, c) + (1.0 - cfg.momentum) * s(r, c);
                }
            }
        }
        curve.push_back(ds.graphs.empty() ? 0.0 : epoch_loss / double(ds.graphs.size()));
    }
    return curve;
}

// Frozen g_p embeddings for every graph, one row each.
inline Matrix embed_dataset(const GraphDataset& ds, EncoderParams& g_p) {
    Matrix out(ds.graphs.size(), g_p.cfg.embed_dim);
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        const Graph& g = ds.graphs[i];
        Matrix emb = embed_value(prepare_adjacency(g_p.cfg.kind, g.adjacency), g.features, g_p);
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = emb(0, j);
    }
    return out;
}

} // namespace cgc
