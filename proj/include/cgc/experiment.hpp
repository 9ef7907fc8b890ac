#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgc/config.hpp"
#include "cgc/contrastive.hpp"
#include "cgc/dataset.hpp"
#include "cgc/encoder.hpp"
#include "cgc/evaluation.hpp"
#include "cgc/generator.hpp"
#include "cgc/version.hpp"

namespace cgc {

namespace detail {

// Seed streams per pipeline stage; parse order is already deterministic.
enum class SeedStream : std::uint64_t {
    EncoderP = 1,
    EncoderN = 2,
    Warmup = 3,
    Generation = 4,
    Contrastive = 5,
    Evaluation = 6,
};

inline std::uint64_t stage_seed(const ExperimentConfig& cfg, SeedStream s) {
    return derive_seed(cfg.seed, std::uint64_t(s));
}

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
    return nlohmann::json{
        {"dataset", cfg.dataset},
        {"data_dir", cfg.data_dir},
        {"encoder", encoder_name(cfg.encoder)},
        {"layers", cfg.layers},
        {"hidden_dim", cfg.hidden_dim},
        {"lr_gen", cfg.lr_gen},
        {"lr_con", cfg.lr_con},
        {"epochs_gen", cfg.epochs_gen},
        {"epochs_con", cfg.epochs_con},
        {"batch_size", cfg.batch_size},
        {"omega", cfg.omega},
        {"gamma", cfg.gamma},
        {"tau", cfg.tau},
        {"norm", norm_name(cfg.norm)},
        {"negatives", negatives_name(cfg.negatives)},
        {"classifier", classifier_name(cfg.classifier)},
        {"seed", cfg.seed},
        {"folds", cfg.folds},
        {"export_negatives", cfg.export_negatives},
        {"momentum_gn", cfg.momentum_gn},
    };
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << content;
}

} // namespace detail

struct ExperimentResult {
    EvalReport report;
    DatasetStats stats;
    std::size_t dictionary_size = 0;
    std::filesystem::path out_dir;
};

// Full pipeline: parse -> classifier warm-up -> counterfactual negative
// generation -> contrastive training -> linear evaluation. Writes
// manifest, report (JSON + text row), loss curve, generation diagnostics
// and encoder checkpoints under cfg.out_dir.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);

    GraphDataset ds = parse_tudataset(cfg.data_dir, cfg.dataset);
    const DatasetStats stats = dataset_stats(ds);

    const EncoderConfig enc_cfg = cfg.encoder_config();
    EncoderParams g_p = init_encoder(enc_cfg, ds.feature_dim, ds.num_classes,
                                     detail::stage_seed(cfg, detail::SeedStream::EncoderP));
    EncoderParams g_n = init_encoder(enc_cfg, ds.feature_dim, ds.num_classes,
                                     detail::stage_seed(cfg, detail::SeedStream::EncoderN));

    warmup_classifier(ds, g_p, cfg.classifier, 20, cfg.lr_gen, cfg.batch_size,
                      detail::stage_seed(cfg, detail::SeedStream::Warmup));

    GeneratorConfig gen_cfg;
    gen_cfg.epochs = cfg.epochs_gen;
    gen_cfg.lr = cfg.lr_gen;
    gen_cfg.omega = cfg.omega;
    gen_cfg.gamma = cfg.gamma;
    gen_cfg.norm_kind = cfg.norm;
    GenerationResult gen = pretrain_generation(ds, g_p, gen_cfg,
                                               detail::stage_seed(cfg, detail::SeedStream::Generation));

    ContrastConfig con_cfg;
    con_cfg.tau = cfg.tau;
    con_cfg.negatives = cfg.negatives;
    con_cfg.epochs = cfg.epochs_con;
    con_cfg.lr = cfg.lr_con;
    con_cfg.batch_size = cfg.batch_size;
    con_cfg.momentum_gn = cfg.momentum_gn;
    const std::vector<double> curve =
        train_contrastive(ds, gen.negatives, g_p, g_n, con_cfg,
                          detail::stage_seed(cfg, detail::SeedStream::Contrastive));

    const Matrix embeddings = embed_dataset(ds, g_p);
    std::vector<int> labels(ds.graphs.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = ds.graphs[i].label;
    const EvalReport report = evaluate(embeddings, labels, cfg.folds,
                                       detail::stage_seed(cfg, detail::SeedStream::Evaluation));

    // ---- artifacts ----
    nlohmann::json manifest{
        {"code_version", kVersion},
        {"config", detail::config_json(cfg)},
        {"dataset_stats",
         {{"num_graphs", stats.num_graphs},
          {"avg_nodes", stats.avg_nodes},
          {"avg_edges", stats.avg_edges},
          {"feature_dim", stats.feature_dim},
          {"num_classes", stats.num_classes}}},
        {"dictionary_size", dictionary_size(cfg.negatives)},
    };
    detail::write_text(out / "manifest.json", manifest.dump(2) + "\n");

    nlohmann::json rep{
        {"dataset", cfg.dataset},
        {"mean_micro", report.mean_micro},
        {"std_micro", report.std_micro},
        {"mean_macro", report.mean_macro},
        {"std_macro", report.std_macro},
        {"fold_errors", report.fold_errors},
    };
    rep["per_fold"] = nlohmann::json::array();
    for (const FoldScore& s : report.per_fold)
        rep["per_fold"].push_back({{"f1_micro", s.f1_micro}, {"f1_macro", s.f1_macro}});
    detail::write_text(out / "report.json", rep.dump(2) + "\n");
    detail::write_text(out / "report.txt", report_row(cfg.dataset, report) + "\n");

    std::string csv = "epoch,mean_loss\n";
    for (std::size_t e = 0; e < curve.size(); ++e) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e, curve[e]);
        csv += buf;
    }
    detail::write_text(out / "loss_curve.csv", csv);

    nlohmann::json diags = nlohmann::json::array();
    for (const GenDiagnostics& d : gen.diagnostics)
        diags.push_back({{"graph", d.graph_index},
                         {"edits", d.edge_edits},
                         {"edit_fraction", d.edit_fraction},
                         {"mask_ratio", d.mask_ratio},
                         {"kl_prox", d.kl_prox},
                         {"kl_feat", d.kl_feat},
                         {"kl_prox_init", d.kl_prox_init},
                         {"kl_feat_init", d.kl_feat_init},
                         {"aborted", d.aborted}});
    detail::write_text(out / "diagnostics.json", diags.dump(2) + "\n");

    save_checkpoint(out / "encoder_p.ckpt", g_p.all_params());
    save_checkpoint(out / "encoder_n.ckpt", g_n.all_params());

    if (cfg.export_negatives) export_negatives(gen.negatives, ds, out / "negatives");

    return ExperimentResult{report, stats, dictionary_size(cfg.negatives), out};
}

enum class AblationAxis { Negatives, Norm };

inline AblationAxis ablation_from_name(const std::string& s) {
    if (s == "negatives") return AblationAxis::Negatives;
    if (s == "norm") return AblationAxis::Norm;
    throw ConfigError("unknown ablation axis '" + s + "' (expected negatives|norm)");
}

struct AblationCell {
    std::string name;
    bool ok = false;
    double f1_micro = 0.0;
    double f1_macro = 0.0;
    std::string error;
};

// Runs the 3 negatives modes or the 5 norms with a shared seed. Cells
// land in <out>/cell_<name>/; a per-cell failure is recorded and the
// suite moves on.
inline std::vector<AblationCell> run_ablation_suite(const ExperimentConfig& base,
                                                    AblationAxis axis) {
    namespace fs = std::filesystem;
    const fs::path root = base.out_dir;
    fs::create_directories(root);

    std::vector<ExperimentConfig> cells;
    if (axis == AblationAxis::Negatives) {
        for (NegativesMode m :
             {NegativesMode::ProximityOnly, NegativesMode::FeatureOnly, NegativesMode::Both}) {
            ExperimentConfig c = base;
            c.negatives = m;
            c.out_dir = (root / (std::string("cell_") + negatives_name(m))).string();
            cells.push_back(c);
        }
    } else {
        for (NormKind k : all_norm_kinds()) {
            ExperimentConfig c = base;
            c.norm = k;
            c.out_dir = (root / (std::string("cell_") + norm_name(k))).string();
            cells.push_back(c);
        }
    }

    std::vector<AblationCell> results;
    for (const ExperimentConfig& c : cells) {
        AblationCell cell;
        cell.name = axis == AblationAxis::Negatives ? negatives_name(c.negatives)
                                                    : norm_name(c.norm);
        try {
            const ExperimentResult r = run_experiment(c);
            cell.ok = true;
            cell.f1_micro = r.report.mean_micro;
            cell.f1_macro = r.report.mean_macro;
        } catch (const std::exception& e) {
            cell.error = e.what();
            std::cerr << "[cgc] ablation cell '" << cell.name << "' failed: " << e.what() << "\n";
        }
        results.push_back(cell);
    }

    std::string csv = "cell,f1_micro,f1_macro\n";
    for (const AblationCell& c : results) {
        char buf[128];
        if (c.ok)
            std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", c.name.c_str(), c.f1_micro,
                          c.f1_macro);
        else
            std::snprintf(buf, sizeof(buf), "%s,nan,nan\n", c.name.c_str());
        csv += buf;
    }
    detail::write_text(root / "ablation.csv", csv);
    return results;
}

} // namespace cgc
