#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "sdperl/classifier.hpp"
#include "sdperl/code_metrics.hpp"
#include "sdperl/dataset.hpp"
#include "sdperl/embedder.hpp"
#include "sdperl/errors.hpp"
#include "sdperl/pheromone.hpp"
#include "sdperl/rng.hpp"
#include "sdperl/runner.hpp"
#include "sdperl/stats.hpp"

namespace py = pybind11;
using namespace sdperl;

namespace {

std::vector<std::vector<double>> embedding_rows(const EmbeddingTable& t) {
    std::vector<std::vector<double>> out;
    out.reserve(t.vectors.size());
    for (const auto& v : t.vectors) out.emplace_back(v.data(), v.data() + v.size());
    return out;
}

py::dict metrics_dict(const EvalMetrics& m) {
    py::dict d;
    d["precision"] = m.precision;
    d["recall"] = m.recall;
    d["f1"] = m.f1;
    d["accuracy"] = m.accuracy;
    d["auc"] = m.auc ? py::cast(*m.auc) : py::none();
    return d;
}

ExperimentConfig config_from_kwargs(const py::kwargs& kwargs) {
    ExperimentConfig cfg;
    for (auto item : kwargs) {
        const auto key = item.first.cast<std::string>();
        if (key == "mode") {
            const auto v = item.second.cast<std::string>();
            if (v == "simple") cfg.mode = StateMode::Simple;
            else if (v == "custom") cfg.mode = StateMode::Custom;
            else throw ConfigError("unknown mode '" + v + "'");
        } else if (key == "pheromone") {
            const auto v = item.second.cast<std::string>();
            if (v == "vanilla") cfg.pheromone_mode = PheromoneMode::Vanilla;
            else if (v == "pheromone") cfg.pheromone_mode = PheromoneMode::Pheromone;
            else if (v == "best-action") cfg.pheromone_mode = PheromoneMode::PheromoneBestAction;
            else throw ConfigError("unknown pheromone mode '" + v + "'");
        } else if (key == "metric") {
            const auto v = item.second.cast<std::string>();
            if (v == "f1") cfg.metric = RewardMetric::F1;
            else if (v == "auc") cfg.metric = RewardMetric::Auc;
            else if (v == "accuracy") cfg.metric = RewardMetric::Accuracy;
            else throw ConfigError("unknown metric '" + v + "'");
        } else if (key == "m") cfg.m = item.second.cast<int>();
        else if (key == "timesteps") cfg.timesteps = item.second.cast<long>();
        else if (key == "k_start") cfg.k_start = item.second.cast<int>();
        else if (key == "k_end") cfg.k_end = item.second.cast<int>();
        else if (key == "seed") cfg.seed = item.second.cast<std::uint64_t>();
        else if (key == "eval_fraction") cfg.eval_fraction = item.second.cast<double>();
        else if (key == "smote_k") cfg.smote_k = item.second.cast<int>();
        else if (key == "train_csv") cfg.train_csv = item.second.cast<std::string>();
        else if (key == "test_csv") cfg.test_csv = item.second.cast<std::string>();
        else if (key == "out_dir") cfg.out_dir = item.second.cast<std::string>();
        else if (key == "label_column") cfg.label_column = item.second.cast<std::string>();
        else if (key == "standardize_stats") cfg.standardize_stats = item.second.cast<bool>();
        else if (key == "pheromone_temperature") {
            cfg.pheromone_temperature = item.second.cast<double>();
        } else if (key == "hidden_dim") cfg.hidden_dim = item.second.cast<int>();
        else if (key == "num_layers") cfg.num_layers = item.second.cast<int>();
        else if (key == "num_heads") cfg.num_heads = item.second.cast<int>();
        else if (key == "resume_checkpoint") cfg.resume_checkpoint = item.second.cast<std::string>();
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Reinforcement-learning feature selection for software defect prediction";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    py::class_<FeatureMatrix>(m, "FeatureMatrix")
        .def(py::init<>())
        .def_readwrite("feature_names", &FeatureMatrix::feature_names)
        .def_readwrite("rows", &FeatureMatrix::rows)
        .def_readwrite("labels", &FeatureMatrix::labels)
        .def_readwrite("source_ids", &FeatureMatrix::source_ids)
        .def("n_rows", &FeatureMatrix::n_rows)
        .def("n_features", &FeatureMatrix::n_features)
        .def("count_label", &FeatureMatrix::count_label);

    m.def("load_feature_matrix", &load_feature_matrix, py::arg("path"),
          py::arg("label_column") = "Bug", py::arg("id_column") = "path");
    m.def("save_feature_matrix", &save_feature_matrix, py::arg("matrix"), py::arg("path"),
          py::arg("label_column") = "Bug", py::arg("id_column") = "path");

    m.def(
        "resplit_until_defective",
        [](const FeatureMatrix& matrix, double eval_fraction, std::uint64_t seed) {
            const auto r = resplit_until_defective(matrix, {eval_fraction, seed});
            return py::make_tuple(r.train, r.eval, r.used_seed);
        },
        py::arg("matrix"), py::arg("eval_fraction") = 0.2, py::arg("seed") = 0);

    m.def("smote_oversample", &smote_oversample, py::arg("train"), py::arg("k_neighbors") = 5,
          py::arg("seed") = 0);

    m.def(
        "extract_metrics",
        [](const std::string& source) {
            const auto v = extract_metrics(source);
            py::dict d;
            const auto values = v.values();
            for (std::size_t i = 0; i < values.size(); ++i) {
                d[py::str(MetricVector::names()[i])] = values[i];
            }
            return d;
        },
        py::arg("source"));
    m.def("extract_corpus", &extract_corpus, py::arg("root"), py::arg("labels_csv"),
          py::arg("label_column") = "Bug");

    m.def(
        "kmeans",
        [](const std::vector<std::vector<double>>& points, int k, std::uint64_t seed) {
            if (points.empty()) throw ConfigError("kmeans needs at least one point");
            Eigen::MatrixXd pts(static_cast<Eigen::Index>(points.size()),
                                static_cast<Eigen::Index>(points.front().size()));
            for (std::size_t i = 0; i < points.size(); ++i) {
                for (std::size_t j = 0; j < points[i].size(); ++j) {
                    pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = points[i][j];
                }
            }
            return kmeans(pts, k, seed);
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 0);

    m.def(
        "build_embeddings",
        [](const FeatureMatrix& train, int k_start, int k_end, std::uint64_t seed, bool standardize) {
            const auto t = build_embeddings(train, k_start, k_end, seed, standardize);
            py::dict d;
            d["vectors"] = embedding_rows(t);
            d["dim"] = t.dim;
            d["k_start"] = t.k_start;
            d["k_end"] = t.k_end;
            d["silhouettes"] = t.silhouettes;
            return d;
        },
        py::arg("train"), py::arg("k_start") = 5, py::arg("k_end") = 14, py::arg("seed") = 0,
        py::arg("standardize") = true);

    m.def(
        "statistical_vectors",
        [](const FeatureMatrix& train) {
            std::vector<std::array<double, 4>> out;
            for (const auto& s : statistical_vectors(train)) {
                out.push_back({s.mean_benign, s.var_benign, s.mean_defective, s.var_defective});
            }
            return out;
        },
        py::arg("train"));

    py::class_<PheromoneTable>(m, "PheromoneTable")
        .def(py::init<int>(), py::arg("n_features"))
        .def("size", &PheromoneTable::size)
        .def("update", &PheromoneTable::update, py::arg("feature_id"), py::arg("td_reward"))
        .def("cum_reward", &PheromoneTable::cum_reward)
        .def("count", &PheromoneTable::count)
        .def("total_reward", &PheromoneTable::total_reward)
        .def(
            "average_level",
            [](const PheromoneTable& t, int id) -> py::object {
                const auto v = t.average_level(id);
                return v ? py::cast(*v) : py::none();
            },
            py::arg("feature_id"))
        .def(
            "sample_seed_features",
            [](const PheromoneTable& t, int count, std::uint64_t seed, double temperature) {
                Rng rng(seed);
                return t.sample_seed_features(count, rng, temperature);
            },
            py::arg("count"), py::arg("seed") = 0, py::arg("temperature") = 0.05)
        .def("top_k", &PheromoneTable::top_k, py::arg("k"));

    m.def(
        "train_and_evaluate",
        [](const FeatureMatrix& train, const std::vector<int>& subset, const FeatureMatrix& eval) {
            const auto clf = train_classifier(train, subset);
            return metrics_dict(evaluate(clf, eval));
        },
        py::arg("train"), py::arg("subset"), py::arg("eval"));
    m.def("auc_score", &auc_score, py::arg("labels"), py::arg("scores"));

    m.def(
        "independent_t_test",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = independent_t_test(a, b);
            return py::make_tuple(r.t, r.p, r.cohens_d);
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "run_experiment",
        [](const py::kwargs& kwargs) {
            const ExperimentConfig cfg = config_from_kwargs(kwargs);
            const RunReport report = run_experiment(cfg);
            if (!cfg.out_dir.empty()) emit_report(report, cfg.out_dir);
            py::dict d;
            d["best_score"] = report.best_score;
            d["best_subset"] = report.best_subset;
            d["test_subset"] = report.test_subset;
            d["episode_scores"] = report.episode_scores;
            d["final_metrics"] = metrics_dict(report.final_metrics);
            d["feature_names"] = report.feature_names;
            d["split_seed"] = report.split_seed;
            d["wall_clock_seconds"] = report.wall_clock_seconds;
            return d;
        },
        "Run one experiment; accepts the config.json keys as keyword arguments.");
}
