#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "cgc/dataset.hpp"
#include "cgc/encoder.hpp"
#include "cgc/matrix.hpp"
#include "cgc/norms.hpp"
#include "cgc/tensor.hpp"

namespace cgc {

// Per-graph trainable perturbation: M_a rewires proximity, M_b masks
// features. Thresholds omega/gamma binarize the sigmoid outputs.
struct PerturbationState {
    Param m_a; // N x N
    Param m_b; // N x h
    double omega = 0.3;
    double gamma = 0.3;
};

// The two generated hard negatives: the proximity-perturbed graph keeps
// the original features, the feature-masked graph keeps the original
// edges.
struct HardNegativePair {
    Graph proximity_negative;
    Graph feature_negative;
};

struct GenDiagnostics {
    std::size_t graph_index = 0;
    double edge_edits = 0.0;     // ||A - A'||_F^2 / 2
    double edit_fraction = 0.0;  // edits / max(1, original edge count)
    double mask_ratio = 0.0;     // fraction of masked feature entries
    double kl_prox = 0.0;
    double kl_feat = 0.0;
    double kl_prox_init = 0.0;   // epoch-0 baseline, before any update
    double kl_feat_init = 0.0;
    bool aborted = false;        // non-finite loss; kept last finite state
};

inline Matrix threshold_binarize(const Matrix& soft, double threshold) {
    return map(soft, [threshold](double x) { return x >= threshold ? 1.0 : 0.0; });
}

// OR with the transpose, then zero the diagonal: the datasets are
// undirected and stored without self-loops.
inline Matrix symmetrize_binary(Matrix binary) {
    if (binary.rows() != binary.cols())
        throw ShapeError("symmetrize_binary: non-square " + binary.shape_str());
    for (std::size_t i = 0; i < binary.rows(); ++i) {
        binary(i, i) = 0.0;
        for (std::size_t j = i + 1; j < binary.cols(); ++j) {
            const double v = (binary(i, j) != 0.0 || binary(j, i) != 0.0) ? 1.0 : 0.0;
            binary(i, j) = v;
            binary(j, i) = v;
        }
    }
    return binary;
}

inline PerturbationState init_perturbation_state(const Graph& g, double omega, double gamma,
                                                 std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x9e47ULL);
    PerturbationState st;
    // Scaled identity plus tiny noise: edges map through sigmoid(~10),
    // non-edges stay near sigmoid(0).
    Matrix ma = random_normal(g.num_nodes, g.num_nodes, 0.0, 0.01, rng);
    for (std::size_t i = 0; i < g.num_nodes; ++i) ma(i, i) += 10.0;
    st.m_a = Param("m_a", std::move(ma));
    st.m_b = Param("m_b", random_normal(g.num_nodes, g.features.cols(), 10.0, 0.01, rng));
    st.omega = omega;
    st.gamma = gamma;
    return st;
}

struct PerturbedAdjacency {
    Matrix a_prime; // binary, symmetric, zero diagonal
    Tensor a_soft;  // sigmoid(M_a * A), gradient carrier
};

// Eq-style proximity perturbation: soft scores sigmoid(M_a * A), hard
// edges by inclusive threshold, symmetrized.
inline PerturbedAdjacency perturb_adjacency(Tape& tape, const Graph& g, PerturbationState& state,
                                            bool trainable = true) {
    Tensor m_a = trainable ? tape.leaf(state.m_a) : tape.constant(state.m_a.value);
    Tensor a = tape.constant(g.adjacency);
    PerturbedAdjacency out;
    out.a_soft = sigmoid(matmul(m_a, a));
    out.a_prime = symmetrize_binary(threshold_binarize(out.a_soft.value(), state.omega));
    return out;
}

struct MaskedFeatures {
    Matrix m_hard;  // binary mask
    Tensor m_soft;  // sigmoid(M_b)
    Tensor x_tilde; // hard-masked features, straight-through to m_soft
};

// Feature masking: masked entries become exactly 0.
inline MaskedFeatures mask_features(Tape& tape, const Graph& g, PerturbationState& state,
                                    bool trainable = true) {
    Tensor m_b = trainable ? tape.leaf(state.m_b) : tape.constant(state.m_b.value);
    MaskedFeatures out;
    out.m_soft = sigmoid(m_b);
    out.m_hard = threshold_binarize(out.m_soft.value(), state.gamma);
    Tensor mask = straight_through(out.m_soft, out.m_hard);
    out.x_tilde = hadamard(mask, tape.constant(g.features));
    return out;
}

// L_s = ||A - A'_a|| - ||M'_b|| under the selected norm. Hard matrices go
// forward; gradients ride the sigmoid relaxations via straight-through.
inline Tensor similarity_loss(Tape& tape, const Graph& g, const Tensor& a_soft,
                              const Matrix& a_prime, const Tensor& m_soft, const Matrix& m_hard,
                              NormKind kind) {
    Tensor a_st = straight_through(a_soft, a_prime);
    Tensor diff = sub(tape.constant(g.adjacency), a_st);
    Tensor m_st = straight_through(m_soft, m_hard);
    return sub(norm(diff, kind), norm(m_st, kind));
}

// KL(p||q) with p fixed; both sides clamped at 1e-10 inside the logs.
inline Tensor kl_divergence(Tape& tape, const Matrix& p, const Tensor& q) {
    p.require_same_shape(q.value(), "kl_divergence");
    double plogp = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
        const double pi = std::max(p(0, j), kLogClamp);
        plogp += p(0, j) * std::log(pi);
    }
    Tensor cross = sum(hadamard(tape.constant(p), log(q)));
    return sub(tape.scalar_constant(plogp), cross);
}

inline double kl_value(const Matrix& p, const Matrix& q) {
    p.require_same_shape(q, "kl_value");
    double kl = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j)
        kl += p(0, j) * (std::log(std::max(p(0, j), kLogClamp)) - std::log(std::max(q(0, j), kLogClamp)));
    return kl;
}

// L_c = -KL(p_orig||p_prox) - KL(p_orig||p_feat): minimizing it drives the
// predicted class distributions of the negatives away from the original's.
inline Tensor counterfactual_loss(Tape& tape, const Matrix& p_orig, const Tensor& p_prox,
                                  const Tensor& p_feat) {
    Tensor kl_sum = add(kl_divergence(tape, p_orig, p_prox), kl_divergence(tape, p_orig, p_feat));
    return scale(kl_sum, -1.0);
}

enum class ClassifierMode { Labeled, Unsupervised };

inline const char* classifier_name(ClassifierMode m) {
    return m == ClassifierMode::Labeled ? "labeled" : "unsupervised";
}

inline ClassifierMode classifier_from_name(const std::string& s) {
    if (s == "labeled") return ClassifierMode::Labeled;
    if (s == "unsupervised") return ClassifierMode::Unsupervised;
    throw ConfigError("unknown classifier mode '" + s + "' (expected labeled|unsupervised)");
}

// Labeled mode: fit the classifier head by cross-entropy on embeddings
// from the frozen encoder. Encoder weights never see labels. Unsupervised
// mode keeps the randomly initialized head.
inline void warmup_classifier(const GraphDataset& ds, EncoderParams& params, ClassifierMode mode,
                              int epochs, double lr, std::size_t batch_size, std::uint64_t seed) {
    if (mode == ClassifierMode::Unsupervised || epochs <= 0) return;

    std::vector<Matrix> embeddings;
    embeddings.reserve(ds.graphs.size());
    for (const Graph& g : ds.graphs)
        embeddings.push_back(embed_value(prepare_adjacency(params.cfg.kind, g.adjacency),
                                         g.features, params));

    std::vector<Param*> head{&params.head};
    AdamState adam;
    std::vector<std::size_t> order(ds.graphs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng rng = make_rng(seed, 0xc1a55ULL + std::uint64_t(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(order.size(), start + batch_size);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                Tape tape;
                Tensor p = classify(tape, tape.constant(embeddings[i]), params, true);
                Matrix onehot(1, p.cols());
                onehot(0, std::size_t(ds.graphs[i].label)) = 1.0;
                Tensor ce = scale(sum(hadamard(tape.constant(onehot), log(p))), -1.0);
                tape.backward(ce);
            }
            adam_step(head, adam, lr);
        }
    }
}

struct GeneratorConfig {
    int epochs = 80;
    double lr = 1e-4;
    double omega = 0.3;
    double gamma = 0.3;
    NormKind norm_kind = NormKind::Frobenius;
};

struct GenerationResult {
    std::vector<PerturbationState> states;
    std::vector<HardNegativePair> negatives;
    std::vector<GenDiagnostics> diagnostics;
    std::vector<double> epoch_mean_loss; // mean L_pre across graphs per epoch
};

namespace detail {

struct GenForward {
    Tensor l_pre;
    Matrix a_prime;
    Matrix m_hard;
    double kl_prox = 0.0;
    double kl_feat = 0.0;
};

inline GenForward generation_forward(Tape& tape, const Graph& g, PerturbationState& state,
                                     EncoderParams& classifier, const Matrix& p_orig,
                                     const GeneratorConfig& cfg, bool train_m_a) {
    const EncoderKind kind = classifier.cfg.kind;

    PerturbedAdjacency prox = perturb_adjacency(tape, g, state, train_m_a);
    MaskedFeatures masked = mask_features(tape, g, state, true);

    Tensor l_s = similarity_loss(tape, g, prox.a_soft, prox.a_prime, masked.m_soft,
                                 masked.m_hard, cfg.norm_kind);

    // Perturbed adjacency enters the encoder through a straight-through
    // stand-in so counterfactual gradients reach M_a.
    Tensor prox_adj = straight_through(prox.a_soft, prepare_adjacency(kind, prox.a_prime));
    Tensor p_prox = classify(tape, encode(tape, prox_adj, tape.constant(g.features),
                                          classifier, false), classifier, false);
    Tensor orig_adj = tape.constant(prepare_adjacency(kind, g.adjacency));
    Tensor p_feat = classify(tape, encode(tape, orig_adj, masked.x_tilde, classifier, false),
                             classifier, false);

    Tensor l_c = counterfactual_loss(tape, p_orig, p_prox, p_feat);

    GenForward out;
    out.l_pre = add(l_s, l_c);
    out.a_prime = prox.a_prime;
    out.m_hard = masked.m_hard;
    out.kl_prox = kl_value(p_orig, p_prox.value());
    out.kl_feat = kl_value(p_orig, p_feat.value());
    return out;
}

} // namespace detail

// Stage 1: per-graph optimization of (M_a, M_b) under L_pre = L_s + L_c
// against the frozen classifier. Emits the final hard negatives and
// per-graph diagnostics. Graphs whose loss turns non-finite are aborted
// and keep their last finite negatives.
inline GenerationResult pretrain_generation(const GraphDataset& ds, EncoderParams& classifier,
                                            const GeneratorConfig& cfg, std::uint64_t seed) {
    GenerationResult result;
    result.states.reserve(ds.graphs.size());
    result.negatives.reserve(ds.graphs.size());
    result.diagnostics.reserve(ds.graphs.size());
    if (cfg.epochs > 0) result.epoch_mean_loss.assign(std::size_t(cfg.epochs), 0.0);
    std::vector<std::size_t> epoch_counts(std::size_t(std::max(cfg.epochs, 0)), 0);

    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        const Graph& g = ds.graphs[gi];
        PerturbationState state =
            init_perturbation_state(g, cfg.omega, cfg.gamma, derive_seed(seed, gi));

        const Matrix p_orig = [&] {
            Tape tape;
            Tensor adj = tape.constant(prepare_adjacency(classifier.cfg.kind, g.adjacency));
            Tensor emb = encode(tape, adj, tape.constant(g.features), classifier, false);
            return classify(tape, emb, classifier, false).value();
        }();

        // Single-node graphs have no off-diagonal entries to rewire.
        const bool train_m_a = g.num_nodes > 1;
        std::vector<Param*> trainable;
        if (train_m_a) trainable.push_back(&state.m_a);
        trainable.push_back(&state.m_b);
        AdamState adam;

        GenDiagnostics diag;
        diag.graph_index = gi;
        bool have_init_kl = false;

        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            Tape tape;
            detail::GenForward fw =
                detail::generation_forward(tape, g, state, classifier, p_orig, cfg, train_m_a);
            if (!have_init_kl) {
                diag.kl_prox_init = fw.kl_prox;
                diag.kl_feat_init = fw.kl_feat;
                have_init_kl = true;
            }
            const double loss = fw.l_pre.scalar();
            if (!std::isfinite(loss)) {
                diag.aborted = true;
                std::cerr << "[cgc] generation aborted for graph " << gi
                          << ": non-finite loss at epoch " << epoch << "\n";
                break;
            }
            result.epoch_mean_loss[std::size_t(epoch)] += loss;
            ++epoch_counts[std::size_t(epoch)];
            tape.backward(fw.l_pre);
            adam_step(trainable, adam, cfg.lr);
        }

        // Final forward under the trained state.
        Tape tape;
        detail::GenForward fw =
            detail::generation_forward(tape, g, state, classifier, p_orig, cfg, train_m_a);
        if (!have_init_kl) {
            diag.kl_prox_init = fw.kl_prox;
            diag.kl_feat_init = fw.kl_feat;
        }
        diag.kl_prox = fw.kl_prox;
        diag.kl_feat = fw.kl_feat;

        const Matrix diff = g.adjacency - fw.a_prime;
        diag.edge_edits = frobenius(diff) * frobenius(diff) / 2.0;
        const std::size_t orig_edges = count_undirected_edges(g.adjacency);
        diag.edit_fraction = diag.edge_edits / double(std::max<std::size_t>(orig_edges, 1));
        double zeros = 0.0;
        for (std::size_t i = 0; i < fw.m_hard.rows(); ++i)
            for (std::size_t j = 0; j < fw.m_hard.cols(); ++j)
                if (fw.m_hard(i, j) == 0.0) zeros += 1.0;
        diag.mask_ratio = fw.m_hard.size() ? zeros / double(fw.m_hard.size()) : 0.0;

        HardNegativePair pair;
        pair.proximity_negative = Graph{fw.a_prime, g.features, g.label, g.num_nodes};
        Matrix x_tilde = hadamard(fw.m_hard, g.features);
        pair.feature_negative = Graph{g.adjacency, std::move(x_tilde), g.label, g.num_nodes};
        validate_graph(pair.proximity_negative, "proximity negative " + std::to_string(gi));
        validate_graph(pair.feature_negative, "feature negative " + std::to_string(gi));

        if (diag.mask_ratio == 1.0 && fw.m_hard.size() > 0)
            std::cerr << "[cgc] warning: graph " << gi << " masked all features\n";

        result.states.push_back(std::move(state));
        result.negatives.push_back(std::move(pair));
        result.diagnostics.push_back(diag);
    }

    for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e)
        if (epoch_counts[e] > 0) result.epoch_mean_loss[e] /= double(epoch_counts[e]);

    return result;
}

// Exports both negative sets in the TUDataset text layout.
inline void export_negatives(const std::vector<HardNegativePair>& negatives,
                             const GraphDataset& source, const std::filesystem::path& out_dir) {
    GraphDataset prox, feat;
    prox.name = source.name + "_negatives_prox";
    feat.name = source.name + "_negatives_feat";
    prox.num_classes = feat.num_classes = source.num_classes;
    prox.feature_dim = feat.feature_dim = source.feature_dim;
    for (const HardNegativePair& p : negatives) {
        prox.graphs.push_back(p.proximity_negative);
        feat.graphs.push_back(p.feature_negative);
    }
    write_tudataset(prox, out_dir, prox.name);
    write_tudataset(feat, out_dir, feat.name);
}

} // namespace cgc
