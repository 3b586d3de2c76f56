#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdperl/code_metrics.hpp"
#include "sdperl/dataset.hpp"
#include "sdperl/embedder.hpp"
#include "sdperl/errors.hpp"
#include "sdperl/io_util.hpp"
#include "sdperl/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct TrainFlags {
    std::string config_file;
    std::optional<std::string> mode, pheromone, metric, train_csv, test_csv, out_dir, label_column;
    std::optional<std::string> resume;
    std::optional<long> timesteps;
    std::optional<int> m, k_start, k_end, smote_k;
    std::optional<std::uint64_t> seed;
    std::optional<double> eval_fraction;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--config", f.config_file, "JSON config file; flags override its values");
    cmd->add_option("--mode", f.mode, "custom|simple");
    cmd->add_option("--pheromone", f.pheromone, "vanilla|pheromone|best-action");
    cmd->add_option("--metric", f.metric, "f1|auc|accuracy");
    cmd->add_option("--timesteps", f.timesteps, "agent step budget");
    cmd->add_option("--m", f.m, "episode feature capacity");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--k-start", f.k_start, "smallest cluster count");
    cmd->add_option("--k-end", f.k_end, "largest cluster count");
    cmd->add_option("--smote-k", f.smote_k, "SMOTE neighbour count");
    cmd->add_option("--eval-fraction", f.eval_fraction, "evaluation holdout fraction");
    cmd->add_option("--train", f.train_csv, "earlier-version labeled CSV");
    cmd->add_option("--test", f.test_csv, "later-version labeled CSV");
    cmd->add_option("--out", f.out_dir, "report directory");
    cmd->add_option("--label-column", f.label_column, "label column name");
    cmd->add_option("--resume", f.resume, "checkpoint to load before training");
}

sdperl::ExperimentConfig merge_config(const TrainFlags& f) {
    sdperl::ExperimentConfig cfg;
    if (!f.config_file.empty()) cfg = sdperl::config_from_json_file(f.config_file);
    if (f.mode) cfg.mode = *f.mode == "simple" ? sdperl::StateMode::Simple : sdperl::StateMode::Custom;
    if (f.mode && *f.mode != "simple" && *f.mode != "custom") {
        throw sdperl::ConfigError("unknown mode '" + *f.mode + "'");
    }
    if (f.pheromone) {
        if (*f.pheromone == "vanilla") cfg.pheromone_mode = sdperl::PheromoneMode::Vanilla;
        else if (*f.pheromone == "pheromone") cfg.pheromone_mode = sdperl::PheromoneMode::Pheromone;
        else if (*f.pheromone == "best-action") {
            cfg.pheromone_mode = sdperl::PheromoneMode::PheromoneBestAction;
        } else {
            throw sdperl::ConfigError("unknown pheromone mode '" + *f.pheromone + "'");
        }
    }
    if (f.metric) {
        if (*f.metric == "f1") cfg.metric = sdperl::RewardMetric::F1;
        else if (*f.metric == "auc") cfg.metric = sdperl::RewardMetric::Auc;
        else if (*f.metric == "accuracy") cfg.metric = sdperl::RewardMetric::Accuracy;
        else throw sdperl::ConfigError("unknown metric '" + *f.metric + "'");
    }
    if (f.timesteps) cfg.timesteps = *f.timesteps;
    if (f.m) cfg.m = *f.m;
    if (f.seed) cfg.seed = *f.seed;
    if (f.k_start) cfg.k_start = *f.k_start;
    if (f.k_end) cfg.k_end = *f.k_end;
    if (f.smote_k) cfg.smote_k = *f.smote_k;
    if (f.eval_fraction) cfg.eval_fraction = *f.eval_fraction;
    if (f.train_csv) cfg.train_csv = *f.train_csv;
    if (f.test_csv) cfg.test_csv = *f.test_csv;
    if (f.out_dir) cfg.out_dir = *f.out_dir;
    if (f.label_column) cfg.label_column = *f.label_column;
    if (f.resume) cfg.resume_checkpoint = *f.resume;
    return cfg;
}

void print_metrics(const sdperl::EvalMetrics& m) {
    std::cout << "precision " << sdperl::format_double(m.precision) << "  recall "
              << sdperl::format_double(m.recall) << "  f1 " << sdperl::format_double(m.f1) << "  auc "
              << (m.auc ? sdperl::format_double(*m.auc) : "NA") << "  accuracy "
              << sdperl::format_double(m.accuracy) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SDPERL-style reinforcement-learning feature selection for defect prediction"};
    app.require_subcommand(1);

    // extract-metrics
    auto* extract = app.add_subcommand("extract-metrics", "extract the 20 static metrics per file");
    std::string extract_root, extract_labels, extract_out, extract_label_col = "Bug";
    extract->add_option("--root", extract_root, "source tree root")->required();
    extract->add_option("--labels", extract_labels, "CSV mapping path -> label")->required();
    extract->add_option("--out", extract_out, "output CSV")->required();
    extract->add_option("--label-column", extract_label_col, "label column name");

    // embed
    auto* embed = app.add_subcommand("embed", "build the statistical + cluster embedding table");
    std::string embed_in, embed_out, embed_manifest, embed_label_col = "Bug";
    int embed_k_start = 5, embed_k_end = 14;
    std::uint64_t embed_seed = 0;
    bool embed_raw = false;
    embed->add_option("--in", embed_in, "labeled feature CSV")->required();
    embed->add_option("--k-start", embed_k_start, "smallest cluster count");
    embed->add_option("--k-end", embed_k_end, "largest cluster count");
    embed->add_option("--seed", embed_seed, "clustering seed");
    embed->add_option("--out", embed_out, "embedding CSV")->required();
    embed->add_option("--manifest", embed_manifest, "manifest JSON (default <out>.json)");
    embed->add_option("--label-column", embed_label_col, "label column name");
    embed->add_flag("--no-standardize", embed_raw, "cluster raw statistic vectors");

    // train
    auto* train = app.add_subcommand("train", "run one feature-selection experiment");
    TrainFlags train_flags;
    add_train_flags(train, train_flags);

    // compare
    auto* compare = app.add_subcommand("compare", "t-test between two groups of run directories");
    std::vector<std::string> group_a, group_b;
    compare->add_option("--group-a", group_a, "run directories of the first group")->required();
    compare->add_option("--group-b", group_b, "run directories of the second group")->required();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run the experiment across several m values");
    TrainFlags sweep_flags;
    std::vector<int> sweep_ms;
    add_train_flags(sweep, sweep_flags);
    sweep->add_option("--m-values", sweep_ms, "m values, e.g. --m-values 5 10 15 or 5,10,15")
        ->required()
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*extract) {
            const auto matrix =
                sdperl::extract_corpus(extract_root, extract_labels, extract_label_col);
            sdperl::save_feature_matrix(matrix, extract_out, extract_label_col);
            std::cout << "wrote " << matrix.n_rows() << " rows x " << matrix.n_features()
                      << " metrics to " << extract_out << '\n';
        } else if (*embed) {
            const auto matrix = sdperl::load_feature_matrix(embed_in, embed_label_col);
            const auto table =
                sdperl::build_embeddings(matrix, embed_k_start, embed_k_end, embed_seed, !embed_raw);
            const std::string manifest =
                embed_manifest.empty() ? embed_out + ".json" : embed_manifest;
            sdperl::save_embeddings(table, matrix.feature_names, embed_out, manifest);
            std::cout << "wrote " << table.vectors.size() << " embeddings of dim " << table.dim
                      << " to " << embed_out << '\n';
        } else if (*train) {
            auto cfg = merge_config(train_flags);
            const auto report = sdperl::run_experiment(cfg);
            if (!cfg.out_dir.empty()) sdperl::emit_report(report, cfg.out_dir);
            std::cout << "best evaluation score " << sdperl::format_double(report.best_score)
                      << " over " << report.episode_scores.size() << " episodes ("
                      << sdperl::format_double(report.wall_clock_seconds) << "s)\n";
            std::cout << "test: ";
            print_metrics(report.final_metrics);
            if (!cfg.out_dir.empty()) std::cout << "report written to " << cfg.out_dir << '\n';
        } else if (*compare) {
            std::vector<std::filesystem::path> a(group_a.begin(), group_a.end());
            std::vector<std::filesystem::path> b(group_b.begin(), group_b.end());
            const auto r = sdperl::compare_run_dirs(a, b);
            std::cout << "t = " << sdperl::format_double(r.t)
                      << "  p = " << sdperl::format_double(r.p)
                      << "  cohens_d = " << sdperl::format_double(r.cohens_d)
                      << "  df = " << sdperl::format_double(r.df) << '\n';
        } else if (*sweep) {
            auto cfg = merge_config(sweep_flags);
            const auto rows = sdperl::sweep_feature_count(cfg, sweep_ms);
            if (!cfg.out_dir.empty()) sdperl::emit_sweep(rows, cfg.out_dir);
            for (const auto& row : rows) {
                std::cout << "m=" << row.m << "  best_eval=" << sdperl::format_double(row.best_score)
                          << "  test: ";
                print_metrics(row.metrics);
            }
        }
    } catch (const sdperl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const sdperl::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
