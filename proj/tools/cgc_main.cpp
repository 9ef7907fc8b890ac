// cgc: experiment driver for counterfactual hard-negative graph
// contrastive learning. Parses a TUDataset corpus, generates hard
// negatives, trains the encoders contrastively and reports 10-fold
// linear-SVM F1 scores.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cgc/cgc.hpp"

namespace {

struct FlagValues {
    std::string dataset, data_dir, encoder, norm, negatives, classifier, out, config, ablation;
    long layers = 0, hidden_dim = 0, epochs_gen = 0, epochs_con = 0, batch_size = 0, folds = 0;
    long long seed = 0;
    double lr_gen = 0, lr_con = 0, omega = 0, gamma = 0, tau = 0;
    bool export_negatives = false, momentum_gn = false;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"CGC: counterfactual hard-negative graph contrastive learning"};
    FlagValues f;

    auto* o_dataset = app.add_option("--dataset", f.dataset, "TUDataset name (e.g. ENZYMES)");
    auto* o_data_dir = app.add_option("--data-dir", f.data_dir, "dataset root directory");
    auto* o_encoder = app.add_option("--encoder", f.encoder, "graph encoder")
                          ->check(CLI::IsMember({"gcn", "gin"}));
    auto* o_layers = app.add_option("--layers", f.layers, "encoder layers");
    auto* o_hidden = app.add_option("--hidden-dim", f.hidden_dim, "hidden/embedding width");
    auto* o_lr_gen = app.add_option("--lr-gen", f.lr_gen, "generation learning rate");
    auto* o_lr_con = app.add_option("--lr-con", f.lr_con, "contrastive learning rate");
    auto* o_egen = app.add_option("--epochs-gen", f.epochs_gen, "generation epochs");
    auto* o_econ = app.add_option("--epochs-con", f.epochs_con, "contrastive epochs");
    auto* o_batch = app.add_option("--batch-size", f.batch_size, "mini-batch size");
    auto* o_omega = app.add_option("--omega", f.omega, "edge threshold in (0,1)");
    auto* o_gamma = app.add_option("--gamma", f.gamma, "mask threshold in (0,1)");
    auto* o_tau = app.add_option("--tau", f.tau, "InfoNCE temperature");
    auto* o_norm = app.add_option("--norm", f.norm, "similarity norm")
                       ->check(CLI::IsMember({"one", "two", "inf", "nuclear", "fro"}));
    auto* o_neg = app.add_option("--negatives", f.negatives, "negative sample types")
                      ->check(CLI::IsMember({"proximity", "feature", "both"}));
    auto* o_cls = app.add_option("--classifier", f.classifier, "generation classifier mode")
                      ->check(CLI::IsMember({"labeled", "unsupervised"}));
    auto* o_seed = app.add_option("--seed", f.seed, "global seed");
    auto* o_folds = app.add_option("--folds", f.folds, "cross-validation folds");
    auto* o_out = app.add_option("--out", f.out, "output directory");
    auto* o_config = app.add_option("--config", f.config, "key = value config file");
    auto* o_ablation = app.add_option("--ablation", f.ablation, "run an ablation suite")
                           ->check(CLI::IsMember({"negatives", "norm"}));
    auto* o_export = app.add_flag("--export-negatives", f.export_negatives,
                                  "write generated negatives in TUDataset layout");
    auto* o_momentum = app.add_flag("--momentum-gn", f.momentum_gn,
                                    "momentum-updated key encoder instead of joint training");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        cgc::ConfigDraft draft;
        if (const char* env = std::getenv("CGC_DATA_DIR"); env && *env)
            draft.set("data_dir", env);
        if (o_config->count()) {
            const cgc::ConfigDraft file = cgc::read_config_file(f.config);
            for (const auto& kv : file.values) draft.set(kv.first, kv.second);
        }

        const auto set_if = [&](const CLI::Option* opt, const char* key, const std::string& v) {
            if (opt->count()) draft.set(key, v);
        };
        set_if(o_dataset, "dataset", f.dataset);
        set_if(o_data_dir, "data_dir", f.data_dir);
        set_if(o_encoder, "encoder", f.encoder);
        set_if(o_layers, "layers", std::to_string(f.layers));
        set_if(o_hidden, "hidden_dim", std::to_string(f.hidden_dim));
        set_if(o_lr_gen, "lr_gen", std::to_string(f.lr_gen));
        set_if(o_lr_con, "lr_con", std::to_string(f.lr_con));
        set_if(o_egen, "epochs_gen", std::to_string(f.epochs_gen));
        set_if(o_econ, "epochs_con", std::to_string(f.epochs_con));
        set_if(o_batch, "batch_size", std::to_string(f.batch_size));
        set_if(o_omega, "omega", std::to_string(f.omega));
        set_if(o_gamma, "gamma", std::to_string(f.gamma));
        set_if(o_tau, "tau", std::to_string(f.tau));
        set_if(o_norm, "norm", f.norm);
        set_if(o_neg, "negatives", f.negatives);
        set_if(o_cls, "classifier", f.classifier);
        set_if(o_seed, "seed", std::to_string(f.seed));
        set_if(o_folds, "folds", std::to_string(f.folds));
        set_if(o_out, "out", f.out);
        if (o_export->count()) draft.set("export_negatives", "true");
        if (o_momentum->count()) draft.set("momentum_gn", "true");

        const cgc::ExperimentConfig cfg = cgc::resolve_config(draft);

        if (o_ablation->count()) {
            const auto cells = cgc::run_ablation_suite(cfg, cgc::ablation_from_name(f.ablation));
            std::cout << "cell  f1_micro  f1_macro\n";
            for (const auto& c : cells) {
                if (c.ok)
                    std::printf("%s  %.2f  %.2f\n", c.name.c_str(), 100.0 * c.f1_micro,
                                100.0 * c.f1_macro);
                else
                    std::printf("%s  failed: %s\n", c.name.c_str(), c.error.c_str());
            }
            std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "ablation.csv").string()
                      << "\n";
            return 0;
        }

        const cgc::ExperimentResult result = cgc::run_experiment(cfg);
        std::cout << cgc::report_row(cfg.dataset, result.report) << "\n";
        std::cout << "artifacts in " << result.out_dir.string() << "\n";
        return 0;
    } catch (const cgc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cgc::FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const cgc::EmptyDatasetError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const cgc::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
