#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cgc/errors.hpp"
#include "cgc/matrix.hpp"
#include "cgc/tensor.hpp"

namespace cgc {

enum class EncoderKind { GCN, GIN };

inline const char* encoder_name(EncoderKind k) { return k == EncoderKind::GCN ? "gcn" : "gin"; }

inline EncoderKind encoder_from_name(const std::string& s) {
    if (s == "gcn") return EncoderKind::GCN;
    if (s == "gin") return EncoderKind::GIN;
    throw ConfigError("unknown encoder '" + s + "' (expected gcn|gin)");
}

struct EncoderConfig {
    EncoderKind kind = EncoderKind::GCN;
    std::size_t num_layers = 3;
    std::size_t hidden_dim = 32;
    std::size_t embed_dim = 32;
};

// GIN layer: MLP((1+eps)*H + A*H) with a 2-linear-layer MLP (ReLU between)
// and a learnable eps starting at 0.
struct GinLayer {
    Param w1; // in x hidden
    Param w2; // hidden x out
    Param epsilon; // 1x1
};

struct EncoderParams {
    EncoderConfig cfg;
    std::vector<Param> gcn_weights; // per layer, in x out
    std::vector<GinLayer> gin_layers;
    Param head; // embed_dim x C classifier head

    std::vector<Param*> encoder_params() {
        std::vector<Param*> out;
        for (Param& p : gcn_weights) out.push_back(&p);
        for (GinLayer& l : gin_layers) {
            out.push_back(&l.w1);
            out.push_back(&l.w2);
            out.push_back(&l.epsilon);
        }
        return out;
    }

    std::vector<Param*> all_params() {
        std::vector<Param*> out = encoder_params();
        out.push_back(&head);
        return out;
    }
};

namespace detail {

inline Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    return random_uniform(fan_in, fan_out, -bound, bound, rng);
}

} // namespace detail

inline EncoderParams init_encoder(const EncoderConfig& cfg, std::size_t feature_dim,
                                  int num_classes, std::uint64_t seed) {
    if (cfg.num_layers < 1) throw ConfigError("encoder needs num_layers >= 1");
    Rng rng = make_rng(seed, 0xe6c0deULL);
    EncoderParams p;
    p.cfg = cfg;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::size_t in = l == 0 ? feature_dim : cfg.hidden_dim;
        const std::size_t out = l + 1 == cfg.num_layers ? cfg.embed_dim : cfg.hidden_dim;
        if (cfg.kind == EncoderKind::GCN) {
            p.gcn_weights.emplace_back("gcn.w" + std::to_string(l), detail::glorot(in, out, rng));
        } else {
            GinLayer layer;
            layer.w1 = Param("gin.w1." + std::to_string(l), detail::glorot(in, cfg.hidden_dim, rng));
            layer.w2 = Param("gin.w2." + std::to_string(l), detail::glorot(cfg.hidden_dim, out, rng));
            layer.epsilon = Param("gin.eps." + std::to_string(l), Matrix(1, 1, 0.0));
            p.gin_layers.push_back(std::move(layer));
        }
    }
    p.head = Param("head", detail::glorot(cfg.embed_dim, std::size_t(num_classes), rng));
    return p;
}

// Symmetric GCN propagation matrix: D^{-1/2} (A+I) D^{-1/2} with D the
// degree matrix of A+I, so isolated nodes keep degree >= 1.
inline Matrix normalize_adjacency(const Matrix& adjacency) {
    if (adjacency.rows() != adjacency.cols())
        throw ShapeError("normalize_adjacency: non-square " + adjacency.shape_str());
    const std::size_t n = adjacency.rows();
    Matrix a = adjacency;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
    std::vector<double> dinv(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
        dinv[i] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= dinv[i] * dinv[j];
    return a;
}

// The propagation matrix each encoder kind consumes: GCN sees the
// normalized adjacency, GIN the raw binary one (self contribution comes
// from its (1+eps) term).
inline Matrix prepare_adjacency(EncoderKind kind, const Matrix& adjacency) {
    return kind == EncoderKind::GCN ? normalize_adjacency(adjacency) : adjacency;
}

namespace detail {

inline Tensor bind(Tape& tape, Param& p, bool trainable) {
    return trainable ? tape.leaf(p) : tape.constant(p.value);
}

} // namespace detail

// Forward pass to a 1 x embed_dim graph embedding. `adjacency` must
// already be prepared for the encoder kind; it may be a constant or a
// straight-through node so perturbation gradients can flow through it.
inline Tensor encode(Tape& tape, const Tensor& adjacency, const Tensor& features,
                     EncoderParams& params, bool train_params) {
    const EncoderConfig& cfg = params.cfg;
    Tensor h = features;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        if (cfg.kind == EncoderKind::GCN) {
            Tensor w = detail::bind(tape, params.gcn_weights[l], train_params);
            h = relu(matmul(matmul(adjacency, h), w));
        } else {
            GinLayer& layer = params.gin_layers[l];
            Tensor w1 = detail::bind(tape, layer.w1, train_params);
            Tensor w2 = detail::bind(tape, layer.w2, train_params);
            Tensor eps = detail::bind(tape, layer.epsilon, train_params);
            Tensor z = add(add(h, scale_by(h, eps)), matmul(adjacency, h));
            h = matmul(relu(matmul(z, w1)), w2);
        }
    }
    return mean_rows(h);
}

// Class-probability head: softmax(embedding * W_head), a 1 x C row.
inline Tensor classify(Tape& tape, const Tensor& embedding, EncoderParams& params,
                       bool train_head) {
    Tensor w = detail::bind(tape, params.head, train_head);
    return softmax_row(matmul(embedding, w));
}

// Value-only convenience: embedding of one graph under frozen params.
inline Matrix embed_value(const Matrix& prepared_adjacency, const Matrix& features,
                          EncoderParams& params) {
    Tape tape;
    Tensor adj = tape.constant(prepared_adjacency);
    Tensor x = tape.constant(features);
    return encode(tape, adj, x, params, false).value();
}

// ---- checkpoints ---------------------------------------------------------

// Textual checkpoint: versioned header, then one named matrix per block.
inline void save_checkpoint(const std::filesystem::path& path, const std::vector<Param*>& params) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out << "CGC-CHECKPOINT 1\n" << params.size() << "\n";
    char buf[64];
    for (const Param* p : params) {
        out << p->name << " " << p->value.rows() << " " << p->value.cols() << "\n";
        for (std::size_t i = 0; i < p->value.rows(); ++i) {
            for (std::size_t j = 0; j < p->value.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", p->value(i, j));
                out << (j ? " " : "") << buf;
            }
            out << "\n";
        }
    }
}

inline void load_checkpoint(const std::filesystem::path& path, const std::vector<Param*>& params) {
    std::ifstream in(path);
    if (!in) throw FormatError("missing checkpoint " + path.string());
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "CGC-CHECKPOINT" || version != 1)
        throw FormatError("bad checkpoint header in " + path.string());
    std::size_t count = 0;
    in >> count;
    if (count != params.size())
        throw FormatError("checkpoint " + path.string() + " has " + std::to_string(count) +
                          " matrices, expected " + std::to_string(params.size()));
    for (Param* p : params) {
        std::string name;
        std::size_t r = 0, c = 0;
        in >> name >> r >> c;
        if (!in || name != p->name || r != p->value.rows() || c != p->value.cols())
            throw FormatError("checkpoint mismatch at '" + p->name + "' in " + path.string());
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) in >> p->value(i, j);
    }
    if (!in) throw FormatError("truncated checkpoint " + path.string());
}

} // namespace cgc
