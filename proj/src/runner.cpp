#include "sdperl/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "sdperl/errors.hpp"
#include "sdperl/io_util.hpp"

namespace sdperl {

namespace {

std::string mode_name(StateMode m) { return m == StateMode::Custom ? "custom" : "simple"; }

StateMode mode_from_name(const std::string& s) {
    if (s == "custom") return StateMode::Custom;
    if (s == "simple") return StateMode::Simple;
    throw ConfigError("unknown mode '" + s + "' (expected custom|simple)");
}

std::string pheromone_name(PheromoneMode m) {
    switch (m) {
        case PheromoneMode::Vanilla: return "vanilla";
        case PheromoneMode::Pheromone: return "pheromone";
        case PheromoneMode::PheromoneBestAction: return "best-action";
    }
    return "vanilla";
}

PheromoneMode pheromone_from_name(const std::string& s) {
    if (s == "vanilla") return PheromoneMode::Vanilla;
    if (s == "pheromone") return PheromoneMode::Pheromone;
    if (s == "best-action") return PheromoneMode::PheromoneBestAction;
    throw ConfigError("unknown pheromone mode '" + s + "' (expected vanilla|pheromone|best-action)");
}

std::string metric_name(RewardMetric m) {
    switch (m) {
        case RewardMetric::F1: return "f1";
        case RewardMetric::Auc: return "auc";
        case RewardMetric::Accuracy: return "accuracy";
    }
    return "f1";
}

RewardMetric metric_from_name(const std::string& s) {
    if (s == "f1") return RewardMetric::F1;
    if (s == "auc") return RewardMetric::Auc;
    if (s == "accuracy") return RewardMetric::Accuracy;
    throw ConfigError("unknown metric '" + s + "' (expected f1|auc|accuracy)");
}

std::string na_or(double v) {
    return std::isfinite(v) ? format_double(v) : std::string("NA");
}

}  // namespace

void ExperimentConfig::validate() const {
    if (m < 1) throw ConfigError("m must be positive");
    if (timesteps < m) throw ConfigError("timesteps must be at least m");
    if (eval_fraction <= 0 || eval_fraction >= 1) {
        throw ConfigError("eval_fraction must lie strictly between 0 and 1");
    }
    if (smote_k < 1) throw ConfigError("smote_k must be positive");
    if (mode == StateMode::Custom && (k_start < 2 || k_start > k_end)) {
        throw ConfigError("Custom mode requires 2 <= k_start <= k_end");
    }
    if (pheromone_temperature <= 0) throw ConfigError("pheromone_temperature must be positive");
    if (hidden_dim < 1 || num_layers < 1 || num_heads < 1 || hidden_dim % num_heads != 0) {
        throw ConfigError("decision network shape is invalid");
    }
    if (train_csv.empty()) throw ConfigError("train dataset path is required");
    if (test_csv.empty()) throw ConfigError("test dataset path is required");
}

std::string config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["mode"] = mode_name(cfg.mode);
    j["pheromone"] = pheromone_name(cfg.pheromone_mode);
    j["m"] = cfg.m;
    j["timesteps"] = cfg.timesteps;
    j["k_start"] = cfg.k_start;
    j["k_end"] = cfg.k_end;
    j["seed"] = cfg.seed;
    j["eval_fraction"] = cfg.eval_fraction;
    j["smote_k"] = cfg.smote_k;
    j["train_csv"] = cfg.train_csv;
    j["test_csv"] = cfg.test_csv;
    j["out_dir"] = cfg.out_dir;
    j["label_column"] = cfg.label_column;
    j["classifier"] = "logistic";
    j["metric"] = metric_name(cfg.metric);
    j["standardize_stats"] = cfg.standardize_stats;
    j["pheromone_temperature"] = cfg.pheromone_temperature;
    j["hidden_dim"] = cfg.hidden_dim;
    j["num_layers"] = cfg.num_layers;
    j["num_heads"] = cfg.num_heads;
    j["resume_checkpoint"] = cfg.resume_checkpoint;
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ConfigError("config file must hold a flat JSON object");

    ExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "mode") cfg.mode = mode_from_name(value.get<std::string>());
            else if (key == "pheromone") cfg.pheromone_mode = pheromone_from_name(value.get<std::string>());
            else if (key == "m") cfg.m = value.get<int>();
            else if (key == "timesteps") cfg.timesteps = value.get<long>();
            else if (key == "k_start") cfg.k_start = value.get<int>();
            else if (key == "k_end") cfg.k_end = value.get<int>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "eval_fraction") cfg.eval_fraction = value.get<double>();
            else if (key == "smote_k") cfg.smote_k = value.get<int>();
            else if (key == "train_csv") cfg.train_csv = value.get<std::string>();
            else if (key == "test_csv") cfg.test_csv = value.get<std::string>();
            else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
            else if (key == "label_column") cfg.label_column = value.get<std::string>();
            else if (key == "classifier") {
                if (value.get<std::string>() != "logistic") {
                    throw ConfigError("unsupported classifier '" + value.get<std::string>() + "'");
                }
            } else if (key == "metric") cfg.metric = metric_from_name(value.get<std::string>());
            else if (key == "standardize_stats") cfg.standardize_stats = value.get<bool>();
            else if (key == "pheromone_temperature") cfg.pheromone_temperature = value.get<double>();
            else if (key == "hidden_dim") cfg.hidden_dim = value.get<int>();
            else if (key == "num_layers") cfg.num_layers = value.get<int>();
            else if (key == "num_heads") cfg.num_heads = value.get<int>();
            else if (key == "resume_checkpoint") cfg.resume_checkpoint = value.get<std::string>();
            else throw ConfigError("unknown config key '" + key + "'");
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }
    return cfg;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();

    const FeatureMatrix full = load_feature_matrix(cfg.train_csv, cfg.label_column);
    const int n_features = static_cast<int>(full.n_features());
    if (cfg.m > n_features) {
        throw ConfigError("m=" + std::to_string(cfg.m) + " exceeds the " +
                          std::to_string(n_features) + " available features");
    }

    const SplitResult split = resplit_until_defective(full, {cfg.eval_fraction, cfg.seed});
    const FeatureMatrix train_bal = smote_oversample(split.train, cfg.smote_k, cfg.seed);

    EmbeddingTable embeddings;
    const EmbeddingTable* embeddings_ptr = nullptr;
    if (cfg.mode == StateMode::Custom) {
        if (cfg.k_end > n_features) {
            throw ConfigError("k_end exceeds the feature count");
        }
        embeddings = build_embeddings(train_bal, cfg.k_start, cfg.k_end, cfg.seed, cfg.standardize_stats);
        embeddings_ptr = &embeddings;
    }

    PheromoneTable pheromone(n_features);
    const bool use_pheromone = cfg.pheromone_mode != PheromoneMode::Vanilla;
    Environment env(cfg.mode, cfg.m, train_bal, split.eval, embeddings_ptr,
                    use_pheromone ? &pheromone : nullptr, cfg.metric, cfg.pheromone_temperature);

    Policy policy = Policy::make(env.slot_dim(), cfg.m, env.slot_dim(), cfg.hidden_dim,
                                 cfg.num_layers, cfg.num_heads, cfg.seed);
    if (!cfg.resume_checkpoint.empty()) policy.load_checkpoint(cfg.resume_checkpoint);
    PpoAgent agent(std::move(policy), PpoHyperparams{});

    Rng rng_sample(derive_seed(cfg.seed, "policy_sample"));
    Rng rng_seeding(derive_seed(cfg.seed, "pheromone_seed"));
    Rng rng_update(derive_seed(cfg.seed, "ppo_shuffle"));

    const int steps_per_episode = env.agent_steps_per_episode();
    const long episodes = cfg.timesteps / steps_per_episode;

    RunReport report;
    report.config = cfg;
    report.feature_names = full.feature_names;
    report.split_seed = split.used_seed;

    RolloutBuffer buffer;
    for (long ep = 0; ep < episodes; ++ep) {
        env.set_episode_index(ep);
        EpisodeState state = env.reset(rng_seeding);
        while (!state.done()) {
            const auto act = agent.act(state.slots, state.filled(), rng_sample);
            Transition tr;
            tr.slots = state.slots;
            tr.filled = state.filled();
            tr.action = act.action;
            tr.log_prob = act.log_prob;
            tr.value = act.value;
            const StepOutcome out = env.step(state, act.action);
            tr.reward = out.td_reward;
            tr.done = out.done;
            buffer.steps.push_back(std::move(tr));
        }

        const double score = state.prev_cumulative;
        report.history.push_back({state.selected_ids, score});
        report.episode_scores.push_back(score);
        if (report.best_subset.empty() || score > report.best_score) {
            report.best_score = score;
            report.best_subset = state.selected_ids;
        }

        if ((ep + 1) % agent.hyperparams().buffer_episodes == 0) {
            agent.update(buffer, rng_update);
            buffer.clear();
        }
    }
    if (!buffer.steps.empty()) {
        agent.update(buffer, rng_update);
        buffer.clear();
    }

    report.test_subset = select_test_features(cfg.pheromone_mode, pheromone, report.history, cfg.m);

    // Final phase: the whole earlier-version dataset, rebalanced, restricted
    // to the selected subset, scored on the later version.
    const FeatureMatrix full_bal =
        smote_oversample(full, cfg.smote_k, derive_seed(cfg.seed, "final"));
    report.final_classifier = train_classifier(full_bal, report.test_subset, 0, cfg.classifier);
    const FeatureMatrix test = load_feature_matrix(cfg.test_csv, cfg.label_column);
    if (test.n_features() != full.n_features() || test.feature_names != full.feature_names) {
        throw DataError("test dataset feature space differs from the training dataset");
    }
    report.final_metrics = evaluate(report.final_classifier, test);

    report.pheromone = pheromone;
    report.training_log = env.log();
    report.policy = agent.policy();
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

std::vector<int> select_test_features(PheromoneMode mode, const PheromoneTable& table,
                                      const std::vector<EpisodeRecord>& history, int m) {
    if (mode == PheromoneMode::Pheromone) return table.top_k(m);
    if (history.empty()) throw DataError("no completed episodes to select the best action from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i].score > history[best].score) best = i;
    }
    return history[best].subset;
}

TTestResult compare_settings(const std::vector<RunReport>& a, const std::vector<RunReport>& b) {
    std::vector<double> sa, sb;
    for (const auto& r : a) sa.push_back(r.best_score);
    for (const auto& r : b) sb.push_back(r.best_score);
    return independent_t_test(sa, sb);
}

TTestResult compare_run_dirs(const std::vector<std::filesystem::path>& a,
                             const std::vector<std::filesystem::path>& b) {
    auto scores = [](const std::vector<std::filesystem::path>& dirs) {
        std::vector<double> out;
        for (const auto& dir : dirs) {
            std::ifstream in(dir / "best_actions.json");
            if (!in) throw DataError("missing best_actions.json in " + dir.string());
            nlohmann::json j;
            in >> j;
            out.push_back(j.at("best_score").get<double>());
        }
        return out;
    };
    return independent_t_test(scores(a), scores(b));
}

std::vector<SweepRow> sweep_feature_count(const ExperimentConfig& base, const std::vector<int>& m_values) {
    std::vector<int> distinct;
    for (int m : m_values) {
        if (std::find(distinct.begin(), distinct.end(), m) != distinct.end()) {
            std::cerr << "sweep: duplicate m=" << m << " dropped\n";
            continue;
        }
        distinct.push_back(m);
    }

    std::vector<SweepRow> rows;
    for (int m : distinct) {
        ExperimentConfig cfg = base;
        cfg.m = m;
        cfg.seed = derive_seed(base.seed, "sweep_m" + std::to_string(m));
        if (!base.out_dir.empty()) {
            cfg.out_dir = (std::filesystem::path(base.out_dir) / ("m_" + std::to_string(m))).string();
        }
        const RunReport report = run_experiment(cfg);
        if (!cfg.out_dir.empty()) emit_report(report, cfg.out_dir);
        rows.push_back({m, report.best_score, report.final_metrics});
    }
    return rows;
}

void write_line_chart_svg(const std::filesystem::path& path, const std::vector<double>& ys,
                          const std::string& title) {
    const int width = 640, height = 320, margin = 40;
    double lo = 0, hi = 1;
    if (!ys.empty()) {
        lo = *std::min_element(ys.begin(), ys.end());
        hi = *std::max_element(ys.begin(), ys.end());
        if (hi <= lo) hi = lo + 1.0;
    }

    std::ofstream out(path);
    if (!out) throw DataError("cannot write chart: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "  <text x=\"" << margin << "\" y=\"20\" font-family=\"monospace\" font-size=\"13\">"
        << title << "</text>\n";
    out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    out << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\"/>\n";
    out << "  <text x=\"4\" y=\"" << margin + 4 << "\" font-family=\"monospace\" font-size=\"11\">"
        << format_double(hi) << "</text>\n";
    out << "  <text x=\"4\" y=\"" << height - margin << "\" font-family=\"monospace\" font-size=\"11\">"
        << format_double(lo) << "</text>\n";
    if (ys.size() >= 2) {
        out << "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i) {
            const double x = margin + (width - 2.0 * margin) * static_cast<double>(i) /
                                          static_cast<double>(ys.size() - 1);
            const double y = height - margin - (height - 2.0 * margin) * (ys[i] - lo) / (hi - lo);
            out << format_double(x) << ',' << format_double(y) << ' ';
        }
        out << "\"/>\n";
    }
    out << "</svg>\n";
}

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "metrics.csv");
        if (!out) throw DataError("cannot write metrics.csv in " + dir.string());
        out << "metric,value\n";
        out << "precision," << format_double(report.final_metrics.precision) << '\n';
        out << "recall," << format_double(report.final_metrics.recall) << '\n';
        out << "f1," << format_double(report.final_metrics.f1) << '\n';
        out << "auc," << (report.final_metrics.auc ? format_double(*report.final_metrics.auc) : "NA")
            << '\n';
        out << "accuracy," << format_double(report.final_metrics.accuracy) << '\n';
        out << "best_eval_score," << format_double(report.best_score) << '\n';
    }

    report.pheromone.save_csv(dir / "pheromone.csv", report.feature_names);

    {
        std::ofstream out(dir / "training_log.csv");
        if (!out) throw DataError("cannot write training_log.csv in " + dir.string());
        out << "timestep,episode,feature_id,td_reward,cumulative,f1,auc\n";
        for (const auto& row : report.training_log) {
            out << row.timestep << ',' << row.episode << ',' << row.feature_id << ','
                << format_double(row.td_reward) << ',' << format_double(row.cumulative) << ','
                << format_double(row.f1) << ',' << na_or(row.auc) << '\n';
        }
    }

    {
        nlohmann::json j;
        j["best_score"] = report.best_score;
        j["feature_ids"] = report.best_subset;
        nlohmann::json names = nlohmann::json::array();
        for (int id : report.best_subset) {
            names.push_back(static_cast<std::size_t>(id) < report.feature_names.size()
                                ? report.feature_names[static_cast<std::size_t>(id)]
                                : "f" + std::to_string(id));
        }
        j["feature_names"] = names;
        j["test_subset_ids"] = report.test_subset;
        j["split_seed"] = report.split_seed;
        std::ofstream out(dir / "best_actions.json");
        out << j.dump(2) << '\n';
    }

    {
        std::ofstream out(dir / "config.json");
        out << config_to_json(report.config);
    }

    {
        std::ofstream out(dir / "episode_scores.csv");
        out << "episode,score\n";
        for (std::size_t i = 0; i < report.episode_scores.size(); ++i) {
            out << i << ',' << format_double(report.episode_scores[i]) << '\n';
        }
    }

    write_line_chart_svg(dir / "episode_scores.svg", report.episode_scores, "episode score");
    save_model(report.final_classifier, report.feature_names, dir / "model.json");
    report.policy.save_checkpoint(dir / "checkpoint.json");
}

void emit_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "metrics_vs_m.csv");
    if (!out) throw DataError("cannot write metrics_vs_m.csv in " + dir.string());
    out << "m,best_eval_score,precision,recall,f1,auc,accuracy\n";
    std::vector<double> f1s;
    for (const auto& row : rows) {
        out << row.m << ',' << format_double(row.best_score) << ','
            << format_double(row.metrics.precision) << ',' << format_double(row.metrics.recall) << ','
            << format_double(row.metrics.f1) << ','
            << (row.metrics.auc ? format_double(*row.metrics.auc) : "NA") << ','
            << format_double(row.metrics.accuracy) << '\n';
        f1s.push_back(row.metrics.f1);
    }
    write_line_chart_svg(dir / "metrics_vs_m.svg", f1s, "test f1 by m");
}

}  // namespace sdperl
