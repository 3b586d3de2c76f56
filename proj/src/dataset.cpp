#include "sdperl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sdperl/errors.hpp"
#include "sdperl/io_util.hpp"
#include "sdperl/rng.hpp"

namespace sdperl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError("non-numeric value '" + s + "' at data row " + std::to_string(row) +
                        ", column '" + column + "'");
    }
    return value;
}

}  // namespace

std::size_t FeatureMatrix::count_label(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, const std::string& label_column,
                                  const std::string& id_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());

    std::string header_line;
    if (!std::getline(in, header_line)) throw DataError("empty file: " + path.string());
    if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        header_line.erase(0, 3);
    }

    const std::vector<std::string> header = split_csv_line(header_line);
    {
        std::set<std::string> seen;
        for (const auto& name : header) {
            if (!seen.insert(name).second) throw DataError("duplicate header column '" + name + "'");
        }
    }

    int label_idx = -1;
    int id_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) label_idx = static_cast<int>(i);
        else if (header[i] == id_column) id_idx = static_cast<int>(i);
    }
    if (label_idx < 0) throw DataError("label column '" + label_column + "' not found in " + path.string());

    FeatureMatrix m;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (static_cast<int>(i) != label_idx && static_cast<int>(i) != id_idx) {
            m.feature_names.push_back(header[i]);
        }
    }
    if (m.feature_names.empty()) throw DataError("no feature columns in " + path.string());

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError("data row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(header.size()));
        }
        std::vector<double> values;
        values.reserve(m.feature_names.size());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (static_cast<int>(i) == label_idx) {
                double lv = parse_double(fields[i], row, label_column);
                if (lv != 0.0 && lv != 1.0) {
                    throw DataError("label value '" + fields[i] + "' at data row " + std::to_string(row) +
                                    " is not 0 or 1");
                }
                m.labels.push_back(static_cast<int>(lv));
            } else if (static_cast<int>(i) == id_idx) {
                m.source_ids.push_back(fields[i]);
            } else {
                values.push_back(parse_double(fields[i], row, header[i]));
            }
        }
        m.rows.push_back(std::move(values));
        ++row;
    }
    if (m.rows.empty()) throw DataError("no data rows in " + path.string());
    return m;
}

void save_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path,
                         const std::string& label_column, const std::string& id_column) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());

    const bool has_ids = !matrix.source_ids.empty();
    if (has_ids) out << id_column << ',';
    for (const auto& name : matrix.feature_names) out << name << ',';
    out << label_column << '\n';

    for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
        if (has_ids) out << matrix.source_ids[r] << ',';
        for (double v : matrix.rows[r]) out << format_double(v) << ',';
        out << matrix.labels[r] << '\n';
    }
}

namespace {

FeatureMatrix take_rows(const FeatureMatrix& m, const std::vector<std::size_t>& idx) {
    FeatureMatrix out;
    out.feature_names = m.feature_names;
    out.rows.reserve(idx.size());
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) {
        out.rows.push_back(m.rows[i]);
        out.labels.push_back(m.labels[i]);
        if (!m.source_ids.empty()) out.source_ids.push_back(m.source_ids[i]);
    }
    return out;
}

}  // namespace

SplitResult resplit_until_defective(const FeatureMatrix& matrix, const SplitConfig& cfg) {
    if (cfg.eval_fraction <= 0.0 || cfg.eval_fraction >= 1.0) {
        throw ConfigError("eval_fraction must lie strictly between 0 and 1");
    }
    if (matrix.count_label(1) == 0) {
        throw DataError("cannot split: matrix contains no defective rows");
    }
    const std::size_t n = matrix.n_rows();
    const std::size_t eval_size =
        static_cast<std::size_t>(std::llround(cfg.eval_fraction * static_cast<double>(n)));
    if (eval_size == 0) throw DataError("eval_fraction yields an empty evaluation split");

    for (std::uint64_t seed = cfg.seed;; ++seed) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(seed, "split"));
        rng.shuffle(perm);

        std::vector<std::size_t> eval_idx(perm.begin(), perm.begin() + eval_size);
        bool has_defective = false;
        for (std::size_t i : eval_idx) has_defective = has_defective || matrix.labels[i] == 1;
        if (!has_defective) continue;

        std::vector<std::size_t> train_idx(perm.begin() + eval_size, perm.end());
        std::sort(eval_idx.begin(), eval_idx.end());
        std::sort(train_idx.begin(), train_idx.end());
        return {take_rows(matrix, train_idx), take_rows(matrix, eval_idx), seed};
    }
}

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

FeatureMatrix smote_oversample(const FeatureMatrix& train, int k_neighbors, std::uint64_t seed) {
    if (k_neighbors < 1) throw ConfigError("k_neighbors must be positive");
    const std::size_t n_defective = train.count_label(1);
    const std::size_t n_benign = train.n_rows() - n_defective;
    if (n_defective == 0 || n_benign == 0) {
        throw DataError("SMOTE requires both classes in the training split");
    }
    if (n_defective == n_benign) return train;

    const int minority_label = n_defective < n_benign ? 1 : 0;
    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < train.n_rows(); ++i) {
        if (train.labels[i] == minority_label) minority.push_back(i);
    }
    const std::size_t m = minority.size();
    if (m < 2) throw DataError("SMOTE needs at least two minority rows (got " + std::to_string(m) + ")");

    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors), m - 1);

    // k nearest minority neighbours of each minority row, ties by lower index.
    std::vector<std::vector<std::size_t>> neighbors(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(m - 1);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            dist.emplace_back(squared_distance(train.rows[minority[i]], train.rows[minority[j]]), j);
        }
        std::sort(dist.begin(), dist.end());
        neighbors[i].reserve(k);
        for (std::size_t t = 0; t < k; ++t) neighbors[i].push_back(dist[t].second);
    }

    FeatureMatrix out = train;
    const std::size_t need = (n_defective < n_benign ? n_benign : n_defective) - m;
    Rng rng(derive_seed(seed, "smote"));
    for (std::size_t t = 0; t < need; ++t) {
        const std::size_t i = static_cast<std::size_t>(rng.below(m));
        const std::size_t nn = neighbors[i][rng.below(k)];
        const double u = rng.uniform();
        const std::vector<double>& a = train.rows[minority[i]];
        const std::vector<double>& b = train.rows[minority[nn]];
        std::vector<double> row(a.size());
        for (std::size_t c = 0; c < a.size(); ++c) row[c] = a[c] + u * (b[c] - a[c]);
        out.rows.push_back(std::move(row));
        out.labels.push_back(minority_label);
        if (!out.source_ids.empty()) out.source_ids.push_back("synthetic:" + std::to_string(t));
    }
    return out;
}

void save_split(const SplitResult& split, double eval_fraction, const std::filesystem::path& dir,
                const std::string& label_column) {
    std::filesystem::create_directories(dir);
    save_feature_matrix(split.train, dir / "train.csv", label_column);
    save_feature_matrix(split.eval, dir / "eval.csv", label_column);
    nlohmann::json j;
    j["used_seed"] = split.used_seed;
    j["eval_fraction"] = eval_fraction;
    std::ofstream out(dir / "split.json");
    out << j.dump(2) << '\n';
}

}  // namespace sdperl
