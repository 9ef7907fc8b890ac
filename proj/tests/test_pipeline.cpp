#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "cgc/experiment.hpp"
#include "support/synthetic.hpp"
#include "support/tmpdir.hpp"

using namespace cgc;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes a small separable corpus to disk and returns a ready config.
ExperimentConfig synthetic_experiment(const std::filesystem::path& root, std::uint64_t seed) {
    cgc_test::SyntheticSpec spec;
    spec.num_classes = 3;
    spec.graphs_per_class = 8;
    spec.seed = 5;
    GraphDataset ds = cgc_test::make_synthetic_dataset(spec);
    ds.name = "SYN";
    write_tudataset(ds, root / "data", "SYN");

    ConfigDraft d;
    d.set("dataset", "SYN");
    d.set("data_dir", (root / "data").string());
    d.set("out", (root / "out").string());
    d.set("encoder", "gcn");
    d.set("layers", "2");
    d.set("hidden_dim", "8");
    d.set("lr_gen", "0.05");
    d.set("lr_con", "0.005");
    d.set("epochs_gen", "8");
    d.set("epochs_con", "15");
    d.set("batch_size", "16");
    d.set("folds", "4");
    d.set("seed", std::to_string(seed));
    return resolve_config(d);
}

} // namespace

TEST_CASE("full pipeline beats chance on separable synthetic data", "[pipeline]") {
    cgc_test::TempDir dir("pipe");
    ExperimentConfig cfg = synthetic_experiment(dir.path, 3);
    const ExperimentResult result = run_experiment(cfg);

    REQUIRE(result.report.per_fold.size() == 4);
    REQUIRE(result.report.mean_micro > 1.0 / 3.0); // 3-class chance

    for (const char* artifact : {"manifest.json", "report.json", "report.txt", "loss_curve.csv",
                                 "diagnostics.json", "encoder_p.ckpt", "encoder_n.ckpt"})
        REQUIRE(std::filesystem::exists(std::filesystem::path(cfg.out_dir) / artifact));

    const std::string manifest = slurp(std::filesystem::path(cfg.out_dir) / "manifest.json");
    REQUIRE(manifest.find("\"dictionary_size\": 3") != std::string::npos);
    REQUIRE(manifest.find("\"num_graphs\": 24") != std::string::npos);

    const std::string curve = slurp(std::filesystem::path(cfg.out_dir) / "loss_curve.csv");
    REQUIRE(curve.rfind("epoch,mean_loss\n", 0) == 0);
    REQUIRE(std::count(curve.begin(), curve.end(), '\n') == 16); // header + 15 epochs
}

TEST_CASE("degenerate zero-epoch run still produces a report", "[pipeline]") {
    cgc_test::TempDir dir("degenerate");
    ExperimentConfig cfg = synthetic_experiment(dir.path, 4);
    cfg.epochs_gen = 0;
    cfg.epochs_con = 0;
    const ExperimentResult result = run_experiment(cfg);
    REQUIRE(result.report.per_fold.size() == 4);
    REQUIRE(std::filesystem::exists(std::filesystem::path(cfg.out_dir) / "report.json"));
}

TEST_CASE("same config and seed give byte-identical reports", "[pipeline]") {
    cgc_test::TempDir dir("determ");
    ExperimentConfig cfg = synthetic_experiment(dir.path, 11);
    cfg.epochs_gen = 4;
    cfg.epochs_con = 6;

    cfg.out_dir = (dir.path / "run1").string();
    run_experiment(cfg);
    cfg.out_dir = (dir.path / "run2").string();
    run_experiment(cfg);

    REQUIRE(slurp(dir.path / "run1" / "report.json") == slurp(dir.path / "run2" / "report.json"));
    REQUIRE(slurp(dir.path / "run1" / "loss_curve.csv") ==
            slurp(dir.path / "run2" / "loss_curve.csv"));
}

TEST_CASE("negatives ablation runs three cells, norm ablation five", "[pipeline]") {
    cgc_test::TempDir dir("ablate");
    ExperimentConfig cfg = synthetic_experiment(dir.path, 13);
    cfg.epochs_gen = 2;
    cfg.epochs_con = 3;

    cfg.out_dir = (dir.path / "neg").string();
    const auto neg = run_ablation_suite(cfg, AblationAxis::Negatives);
    REQUIRE(neg.size() == 3);
    REQUIRE(neg[0].name == "proximity");
    REQUIRE(neg[1].name == "feature");
    REQUIRE(neg[2].name == "both");
    for (const auto& c : neg) REQUIRE(c.ok);
    REQUIRE(std::filesystem::exists(dir.path / "neg" / "ablation.csv"));

    cfg.out_dir = (dir.path / "norm").string();
    const auto nrm = run_ablation_suite(cfg, AblationAxis::Norm);
    REQUIRE(nrm.size() == 5);
    REQUIRE(nrm[0].name == "one");
    REQUIRE(nrm[1].name == "two");
    REQUIRE(nrm[2].name == "inf");
    REQUIRE(nrm[3].name == "nuclear");
    REQUIRE(nrm[4].name == "fro");
    for (const auto& c : nrm) REQUIRE(c.ok);

    const std::string csv = slurp(dir.path / "norm" / "ablation.csv");
    REQUIRE(csv.rfind("cell,f1_micro,f1_macro\n", 0) == 0);
}

TEST_CASE("exported negatives re-parse in the TUDataset layout", "[pipeline]") {
    cgc_test::TempDir dir("export");
    ExperimentConfig cfg = synthetic_experiment(dir.path, 17);
    cfg.epochs_gen = 2;
    cfg.epochs_con = 1;
    cfg.export_negatives = true;
    run_experiment(cfg);

    const auto neg_dir = std::filesystem::path(cfg.out_dir) / "negatives";
    GraphDataset prox = parse_tudataset(neg_dir, "SYN_negatives_prox");
    GraphDataset feat = parse_tudataset(neg_dir, "SYN_negatives_feat");
    REQUIRE(prox.graphs.size() == 24);
    REQUIRE(feat.graphs.size() == 24);
    for (const Graph& g : prox.graphs) validate_graph(g, "exported prox");
}

TEST_CASE("missing dataset surfaces as a data error", "[pipeline]") {
    cgc_test::TempDir dir("missing");
    ConfigDraft d;
    d.set("dataset", "NOPE");
    d.set("data_dir", (dir.path / "data").string());
    d.set("out", (dir.path / "out").string());
    REQUIRE_THROWS_AS(run_experiment(resolve_config(d)), FormatError);
}
