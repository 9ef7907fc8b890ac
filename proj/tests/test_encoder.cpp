#include <catch_amalgamated.hpp>

#include <numeric>

#include "cgc/dataset.hpp"
#include "cgc/encoder.hpp"
#include "support/encoder_oracle.hpp"
#include "support/fd_check.hpp"
#include "support/tmpdir.hpp"

using namespace cgc;
using cgc_test::fd_max_rel_error;

namespace {

Graph random_graph(std::size_t n, std::size_t h, double edge_p, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x6e1ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Graph g;
    g.num_nodes = n;
    g.adjacency = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (unit(rng) < edge_p) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
    g.features = random_normal(n, h, 0.0, 1.0, rng);
    return g;
}

Graph permuted(const Graph& g, const std::vector<std::size_t>& perm) {
    Graph out;
    out.num_nodes = g.num_nodes;
    out.label = g.label;
    out.adjacency = Matrix(g.num_nodes, g.num_nodes);
    out.features = Matrix(g.num_nodes, g.features.cols());
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        for (std::size_t j = 0; j < g.num_nodes; ++j)
            out.adjacency(perm[i], perm[j]) = g.adjacency(i, j);
        for (std::size_t j = 0; j < g.features.cols(); ++j)
            out.features(perm[i], j) = g.features(i, j);
    }
    return out;
}

Matrix run_encode(const Graph& g, EncoderParams& params) {
    return embed_value(prepare_adjacency(params.cfg.kind, g.adjacency), g.features, params);
}

} // namespace

TEST_CASE("normalize_adjacency basics", "[encoder]") {
    REQUIRE(normalize_adjacency(Matrix(1, 1)) == Matrix{{1.0}});

    const Matrix path = Matrix{{0.0, 1.0}, {1.0, 0.0}};
    const Matrix norm = normalize_adjacency(path);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            REQUIRE(norm(i, j) == Catch::Approx(0.5).epsilon(1e-12));

    REQUIRE_THROWS_AS(normalize_adjacency(Matrix(2, 3)), ShapeError);
}

TEST_CASE("normalized adjacency stays symmetric", "[encoder]") {
    const Graph g = random_graph(7, 3, 0.4, 5);
    const Matrix norm = normalize_adjacency(g.adjacency);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j)
            REQUIRE(norm(i, j) == Catch::Approx(norm(j, i)).margin(1e-15));
}

TEST_CASE("single node with identity weights reproduces its feature row", "[encoder]") {
    EncoderConfig cfg{EncoderKind::GCN, 1, 3, 3};
    EncoderParams params = init_encoder(cfg, 3, 2, 1);
    params.gcn_weights[0].value = Matrix::identity(3);

    Graph g;
    g.num_nodes = 1;
    g.adjacency = Matrix(1, 1);
    g.features = Matrix{{0.2, 0.7, 1.5}}; // nonnegative, so ReLU is inert
    const Matrix emb = run_encode(g, params);
    REQUIRE(emb == g.features);
}

TEST_CASE("embedding is invariant to node permutations", "[encoder]") {
    for (EncoderKind kind : {EncoderKind::GCN, EncoderKind::GIN}) {
        EncoderConfig cfg{kind, 2, 8, 8};
        EncoderParams params = init_encoder(cfg, 4, 2, 9);
        const Graph g = random_graph(6, 4, 0.5, 17);
        std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
        const Graph pg = permuted(g, perm);

        const Matrix a = run_encode(const_cast<Graph&>(g), params);
        const Matrix b = run_encode(const_cast<Graph&>(pg), params);
        for (std::size_t j = 0; j < a.cols(); ++j)
            REQUIRE(a(0, j) == Catch::Approx(b(0, j)).margin(1e-9));
    }
}

TEST_CASE("forward pass matches the straight-line oracle", "[encoder]") {
    for (EncoderKind kind : {EncoderKind::GCN, EncoderKind::GIN}) {
        EncoderConfig cfg{kind, 2, 6, 6};
        EncoderParams params = init_encoder(cfg, 3, 4, 23);
        // bend epsilon away from 0 so the GIN path is non-trivial
        if (kind == EncoderKind::GIN)
            for (auto& l : params.gin_layers) l.epsilon.value(0, 0) = 0.3;

        const Graph g = random_graph(3, 3, 0.9, 31);
        const Matrix got = run_encode(const_cast<Graph&>(g), params);
        const Matrix want = cgc_test::oracle_embed(g, params);
        for (std::size_t j = 0; j < got.cols(); ++j)
            REQUIRE(got(0, j) == Catch::Approx(want(0, j)).margin(1e-12));

        Tape tape;
        const Matrix dist =
            classify(tape, tape.constant(got), params, false).value();
        const Matrix oracle_dist = cgc_test::oracle_classify(want, params.head.value);
        std::size_t argmax = 0, oracle_argmax = 0;
        for (std::size_t j = 1; j < dist.cols(); ++j) {
            if (dist(0, j) > dist(0, argmax)) argmax = j;
            if (oracle_dist(0, j) > oracle_dist(0, oracle_argmax)) oracle_argmax = j;
        }
        REQUIRE(argmax == oracle_argmax);
    }
}

TEST_CASE("classify yields a valid distribution", "[encoder]") {
    EncoderConfig cfg{EncoderKind::GCN, 1, 4, 4};
    EncoderParams params = init_encoder(cfg, 4, 5, 3);

    SECTION("zero head weights give the uniform distribution") {
        params.head.value = Matrix(4, 5);
        Tape tape;
        const Matrix p = classify(tape, tape.constant(Matrix(1, 4, 0.7)), params, false).value();
        for (std::size_t j = 0; j < 5; ++j)
            REQUIRE(p(0, j) == Catch::Approx(0.2).epsilon(1e-12));
    }

    SECTION("random inputs sum to one with positive entries") {
        Rng rng = make_rng(77, 1);
        for (int trial = 0; trial < 10; ++trial) {
            Tape tape;
            Tensor emb = tape.constant(random_normal(1, 4, 0.0, 3.0, rng));
            const Matrix p = classify(tape, emb, params, false).value();
            double total = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) {
                REQUIRE(p(0, j) > 0.0);
                total += p(0, j);
            }
            REQUIRE(total == Catch::Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("encoder gradients match finite differences", "[encoder]") {
    const Graph g = random_graph(4, 3, 0.6, 41);
    for (EncoderKind kind : {EncoderKind::GCN, EncoderKind::GIN}) {
        EncoderConfig cfg{kind, 2, 5, 5};
        EncoderParams params = init_encoder(cfg, 3, 2, 47);
        const Matrix prep = prepare_adjacency(kind, g.adjacency);

        const double err = fd_max_rel_error(params.encoder_params(), [&](Tape& tape) {
            return sum(encode(tape, tape.constant(prep), tape.constant(g.features), params, true));
        });
        REQUIRE(err < 1e-4);
    }
}

TEST_CASE("checkpoint round-trip and mismatch detection", "[encoder]") {
    cgc_test::TempDir dir("ckpt");
    EncoderConfig cfg{EncoderKind::GIN, 2, 4, 4};
    EncoderParams params = init_encoder(cfg, 3, 2, 53);
    const auto file = dir.path / "enc.ckpt";
    save_checkpoint(file, params.all_params());

    EncoderParams other = init_encoder(cfg, 3, 2, 99);
    REQUIRE(!(other.gin_layers[0].w1.value == params.gin_layers[0].w1.value));
    load_checkpoint(file, other.all_params());
    REQUIRE(other.gin_layers[0].w1.value == params.gin_layers[0].w1.value);
    REQUIRE(other.head.value == params.head.value);

    EncoderParams wrong = init_encoder(EncoderConfig{EncoderKind::GIN, 2, 5, 5}, 3, 2, 1);
    REQUIRE_THROWS_AS(load_checkpoint(file, wrong.all_params()), FormatError);
    REQUIRE_THROWS_AS(load_checkpoint(dir.path / "missing.ckpt", params.all_params()),
                      FormatError);
}
