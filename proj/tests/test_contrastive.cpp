#include <catch_amalgamated.hpp>

#include <cmath>

#include "cgc/contrastive.hpp"
#include "support/fd_check.hpp"
#include "support/synthetic.hpp"

using namespace cgc;

namespace {

// Builds a tape with constant embeddings and returns the InfoNCE value.
double nce_value(const std::vector<Matrix>& keys, double tau) {
    Tape tape;
    ContrastKeys ck;
    ck.q = tape.constant(keys[0]);
    ck.k_plus = tape.constant(keys[1]);
    for (std::size_t i = 2; i < keys.size(); ++i) ck.negatives.push_back(tape.constant(keys[i]));
    return info_nce(ck, tau).scalar();
}

GenerationResult quick_negatives(const GraphDataset& ds, EncoderParams& enc, int epochs,
                                 std::uint64_t seed) {
    GeneratorConfig gcfg;
    gcfg.epochs = epochs;
    gcfg.lr = 0.05;
    gcfg.omega = 0.3; // below 1/2 the init is non-faithful, so training engages
    return pretrain_generation(ds, enc, gcfg, seed);
}

} // namespace

TEST_CASE("cosine similarity basics", "[contrastive]") {
    const Matrix v{{3.0, 4.0}};
    REQUIRE(embedding_similarity(v, v) == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(embedding_similarity(v, v * -1.0) == Catch::Approx(-1.0).epsilon(1e-12));
    REQUIRE(embedding_similarity(Matrix{{1.0, 0.0}}, Matrix{{0.0, 1.0}}) == 0.0);
    REQUIRE(embedding_similarity(Matrix{{0.0, 0.0}}, v) == 0.0);

    Tape tape;
    Tensor a = tape.constant(v);
    REQUIRE(cosine_similarity(tape, a, a).scalar() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(cosine_similarity(tape, a, tape.constant(Matrix(1, 2))).scalar() == 0.0);
}

TEST_CASE("info_nce analytic values", "[contrastive]") {
    const Matrix e1{{1.0, 0.0}};

    SECTION("three identical keys give ln 3") {
        REQUIRE(nce_value({e1, e1, e1, e1}, 1.0) == Catch::Approx(std::log(3.0)).margin(1e-9));
    }
    SECTION("two identical keys give ln 2") {
        REQUIRE(nce_value({e1, e1, e1}, 1.0) == Catch::Approx(std::log(2.0)).margin(1e-9));
    }
    SECTION("sim_+ = 1, sim_- = -1, tau = 1 gives about 0.2395") {
        const Matrix opp{{-1.0, 0.0}};
        const double want = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0 * std::exp(-1.0)));
        REQUIRE(want == Catch::Approx(0.2395).margin(1e-3));
        REQUIRE(nce_value({e1, e1, opp, opp}, 1.0) == Catch::Approx(want).margin(1e-9));
    }
    SECTION("dictionary needs at least one negative") {
        Tape tape;
        ContrastKeys ck;
        ck.q = tape.constant(e1);
        ck.k_plus = tape.constant(e1);
        REQUIRE_THROWS_AS(info_nce(ck, 1.0), ShapeError);
    }
}

TEST_CASE("info_nce is nonnegative and decreases as sim_+ grows", "[contrastive]") {
    Rng rng = make_rng(31, 7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Matrix> keys;
        for (int k = 0; k < 4; ++k) keys.push_back(random_normal(1, 3, 0.0, 1.0, rng));
        REQUIRE(nce_value(keys, 0.7) >= 0.0);
    }

    // grid over the positive similarity with negatives fixed at 0.3
    double prev = std::numeric_limits<double>::infinity();
    const Matrix fixed{{0.3, std::sqrt(1.0 - 0.09)}};
    for (double s : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
        const Matrix q{{1.0, 0.0}};
        const Matrix kp{{s, std::sqrt(1.0 - s * s)}}; // sim(q, kp) = s
        const double loss = nce_value({q, kp, fixed, fixed}, 1.0);
        REQUIRE(loss < prev);
        prev = loss;
    }
}

TEST_CASE("info_nce is invariant to rescaling the query", "[contrastive]") {
    Rng rng = make_rng(33, 7);
    const Matrix q = random_normal(1, 4, 0.0, 1.0, rng);
    const Matrix k0 = random_normal(1, 4, 0.0, 1.0, rng);
    const Matrix k1 = random_normal(1, 4, 0.0, 1.0, rng);
    const double a = nce_value({q, k0, k1}, 1.0);
    const double b = nce_value({q * 5.0, k0, k1}, 1.0);
    REQUIRE(a == Catch::Approx(b).margin(1e-9));
}

TEST_CASE("info_nce gradients match finite differences", "[contrastive]") {
    Rng rng = make_rng(35, 7);
    Param q("q", random_normal(1, 4, 0.0, 1.0, rng));
    Param k0("k0", random_normal(1, 4, 0.0, 1.0, rng));
    Param k1("k1", random_normal(1, 4, 0.0, 1.0, rng));
    const double err = cgc_test::fd_max_rel_error({&q, &k0, &k1}, [&](Tape& tape) {
        ContrastKeys ck;
        ck.q = tape.leaf(q);
        ck.k_plus = tape.leaf(k0);
        ck.negatives.push_back(tape.leaf(k1));
        return info_nce(ck, 0.8);
    });
    REQUIRE(err < 1e-4);
}

TEST_CASE("dictionary sizes per negatives mode", "[contrastive]") {
    REQUIRE(dictionary_size(NegativesMode::ProximityOnly) == 2);
    REQUIRE(dictionary_size(NegativesMode::FeatureOnly) == 2);
    REQUIRE(dictionary_size(NegativesMode::Both) == 3);
}

TEST_CASE("one epoch of contrastive training moves g_p", "[contrastive]") {
    cgc_test::SyntheticSpec spec;
    spec.num_classes = 2;
    spec.graphs_per_class = 5;
    GraphDataset ds = cgc_test::make_synthetic_dataset(spec);

    EncoderConfig ecfg{EncoderKind::GCN, 2, 6, 6};
    EncoderParams g_p = init_encoder(ecfg, spec.feature_dim, 2, 61);
    EncoderParams g_n = init_encoder(ecfg, spec.feature_dim, 2, 62);
    const GenerationResult gen = quick_negatives(ds, g_p, 3, 63);

    const Matrix before = g_p.gcn_weights[0].value;
    ContrastConfig ccfg;
    ccfg.epochs = 1;
    ccfg.lr = 1e-3;
    ccfg.batch_size = 4;
    train_contrastive(ds, gen.negatives, g_p, g_n, ccfg, 65);

    double delta = frobenius(g_p.gcn_weights[0].value - before);
    REQUIRE(delta > 0.0);
}

TEST_CASE("contrastive loss decreases over training", "[contrastive]") {
    cgc_test::SyntheticSpec spec;
    spec.num_classes = 3;
    spec.graphs_per_class = 5;
    GraphDataset ds = cgc_test::make_synthetic_dataset(spec);

    EncoderConfig ecfg{EncoderKind::GCN, 2, 8, 8};
    EncoderParams g_p = init_encoder(ecfg, spec.feature_dim, 3, 71);
    EncoderParams g_n = init_encoder(ecfg, spec.feature_dim, 3, 72);
    // Few generation steps: the negatives stay mid-prune, clearly distinct
    // from the originals, so the dictionary carries signal.
    const GenerationResult gen = quick_negatives(ds, g_p, 3, 73);

    ContrastConfig ccfg;
    ccfg.epochs = 30;
    ccfg.lr = 5e-3;
    ccfg.batch_size = 8;
    const std::vector<double> curve = train_contrastive(ds, gen.negatives, g_p, g_n, ccfg, 75);
    REQUIRE(curve.size() == 30);
    REQUIRE(curve.back() < curve.front());
}

TEST_CASE("missing negatives under mode=both raise ConfigError", "[contrastive]") {
    cgc_test::SyntheticSpec spec;
    spec.num_classes = 2;
    spec.graphs_per_class = 3;
    GraphDataset ds = cgc_test::make_synthetic_dataset(spec);
    EncoderConfig ecfg{EncoderKind::GCN, 1, 4, 4};
    EncoderParams g_p = init_encoder(ecfg, spec.feature_dim, 2, 81);
    EncoderParams g_n = init_encoder(ecfg, spec.feature_dim, 2, 82);
    GenerationResult gen = quick_negatives(ds, g_p, 1, 83);
    gen.negatives.pop_back();

    ContrastConfig ccfg;
    REQUIRE_THROWS_AS(train_contrastive(ds, gen.negatives, g_p, g_n, ccfg, 85), ConfigError);
}

TEST_CASE("momentum mode keeps g_n as an EMA of g_p", "[contrastive]") {
    cgc_test::SyntheticSpec spec;
    spec.num_classes = 2;
    spec.graphs_per_class = 4;
    GraphDataset ds = cgc_test::make_synthetic_dataset(spec);
    EncoderConfig ecfg{EncoderKind::GCN, 1, 4, 4};
    EncoderParams g_p = init_encoder(ecfg, spec.feature_dim, 2, 91);
    EncoderParams g_n = init_encoder(ecfg, spec.feature_dim, 2, 92);
    const GenerationResult gen = quick_negatives(ds, g_p, 1, 93);

    ContrastConfig ccfg;
    ccfg.epochs = 2;
    ccfg.lr = 1e-2;
    ccfg.batch_size = 4;
    ccfg.momentum_gn = true;
    ccfg.momentum = 0.5;
    train_contrastive(ds, gen.negatives, g_p, g_n, ccfg, 95);

    // g_n was re-seeded from g_p and then EMA-tracked: it must sit near
    // g_p, far closer than two independent inits would.
    const double dist = frobenius(g_n.gcn_weights[0].value - g_p.gcn_weights[0].value);
    REQUIRE(dist < 0.5 * frobenius(g_p.gcn_weights[0].value));
}

TEST_CASE("embed_dataset rows are per-graph and deterministic", "[contrastive]") {
    cgc_test::SyntheticSpec spec;
    spec.num_classes = 2;
    spec.graphs_per_class = 3;
    GraphDataset ds = cgc_test::make_synthetic_dataset(spec);
    ds.graphs.push_back(ds.graphs.front()); // duplicate graph

    EncoderConfig ecfg{EncoderKind::GIN, 2, 6, 6};
    EncoderParams g_p = init_encoder(ecfg, spec.feature_dim, 2, 101);

    const Matrix a = embed_dataset(ds, g_p);
    const Matrix b = embed_dataset(ds, g_p);
    REQUIRE(a == b);
    for (std::size_t j = 0; j < a.cols(); ++j)
        REQUIRE(a(0, j) == a(a.rows() - 1, j));
}
