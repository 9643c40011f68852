#ifndef RSGNN_EVALUATE_HPP
#define RSGNN_EVALUATE_HPP

// Test-set evaluation: ID classification/calibration metrics and OOD
// detection per uncertainty score, plus flat CSV export and cross-run
// aggregation.

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsgnn/graph_io.hpp"
#include "rsgnn/metrics.hpp"
#include "rsgnn/training.hpp"

namespace rsgnn {

struct ScoreReport {
    std::string name;
    std::optional<double> auroc;
    std::optional<double> auprc;
    std::optional<double> fpr95;
    std::optional<double> mean_id;
    std::optional<double> mean_ood;
};

struct EvalReport {
    ModelKind model = ModelKind::rsgnn;
    std::uint64_t seed = 0;
    std::size_t num_id = 0;
    std::size_t num_ood = 0;
    double accuracy = 0.0;
    double ece = 0.0;
    double nll = 0.0;
    double brier = 0.0;
    std::vector<CalibrationBin> bins;
    std::vector<ScoreReport> scores;  // entropy, msp, then credal_width for rsgnn

    const ScoreReport* score(const std::string& name) const {
        for (const auto& s : scores)
            if (s.name == name) return &s;
        return nullptr;
    }
};

namespace detail {
inline std::optional<double> mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}
}  // namespace detail

/// Labeled test nodes only. Classification metrics use the ID subset;
/// detection metrics use ID (negative) and OOD (positive) nodes together.
inline EvalReport evaluate(const Model& model, const NodeGraph& g, const OodSplit& split, std::uint64_t seed = 0) {
    if (g.num_classes() > model.num_classes) throw DataError("graph has more classes than the trained model");
    const Predictions pred = model.predict(g);

    std::vector<std::size_t> id_nodes;
    std::vector<std::size_t> scored_nodes;
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        if (g.split[v] != Split::test || g.labels[v] < 0) continue;
        if (split.is_id(g.labels[v])) {
            id_nodes.push_back(v);
            scored_nodes.push_back(v);
        } else if (split.is_ood(g.labels[v])) {
            scored_nodes.push_back(v);
        }
    }
    if (id_nodes.empty()) throw DataError("no labeled in-distribution test nodes to evaluate");

    EvalReport r;
    r.model = model.kind;
    r.seed = seed;
    r.num_id = id_nodes.size();
    r.num_ood = scored_nodes.size() - id_nodes.size();

    Matrix probs(id_nodes.size(), pred.probs.cols());
    std::vector<int> labels(id_nodes.size());
    for (std::size_t i = 0; i < id_nodes.size(); ++i) {
        const auto v = id_nodes[i];
        std::copy(pred.probs.row(v).begin(), pred.probs.row(v).end(), probs.row(i).begin());
        labels[i] = model.classes.local(g.labels[v]);
    }
    r.accuracy = accuracy(probs, labels);
    r.ece = ece(probs, labels);
    r.nll = nll(probs, labels);
    r.brier = brier(probs, labels);
    r.bins = calibration_bins(probs, labels);

    std::vector<bool> targets(scored_nodes.size());
    for (std::size_t i = 0; i < scored_nodes.size(); ++i) targets[i] = split.is_ood(g.labels[scored_nodes[i]]);

    auto add_score = [&](const std::string& name, const std::vector<double>& per_node) {
        ScoreReport s;
        s.name = name;
        std::vector<double> scores(scored_nodes.size());
        std::vector<double> id_vals;
        std::vector<double> ood_vals;
        for (std::size_t i = 0; i < scored_nodes.size(); ++i) {
            scores[i] = per_node[scored_nodes[i]];
            (targets[i] ? ood_vals : id_vals).push_back(scores[i]);
        }
        s.auroc = auroc(scores, targets);
        s.auprc = auprc(scores, targets);
        s.fpr95 = fpr_at_95_tpr(scores, targets);
        s.mean_id = detail::mean_of(id_vals);
        s.mean_ood = detail::mean_of(ood_vals);
        r.scores.push_back(std::move(s));
    };
    add_score("entropy", pred.entropy);
    add_score("msp", pred.msp);
    if (pred.credal_width) add_score("credal_width", *pred.credal_width);
    return r;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {
inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}
}  // namespace detail

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["model"] = to_string(r.model);
    j["seed"] = r.seed;
    j["num_test_id"] = r.num_id;
    j["num_test_ood"] = r.num_ood;
    j["id_metrics"] = {{"accuracy", r.accuracy}, {"ece", r.ece}, {"nll", r.nll}, {"brier", r.brier}};
    nlohmann::ordered_json det = nlohmann::ordered_json::object();
    nlohmann::ordered_json means = nlohmann::ordered_json::object();
    for (const auto& s : r.scores) {
        det[s.name] = {{"auroc", detail::opt_json(s.auroc)},
                       {"auprc", detail::opt_json(s.auprc)},
                       {"fpr95", detail::opt_json(s.fpr95)}};
        means[s.name] = {{"id", detail::opt_json(s.mean_id)}, {"ood", detail::opt_json(s.mean_ood)}};
    }
    j["ood_detection"] = det;
    j["means"] = means;
    nlohmann::ordered_json bins = nlohmann::ordered_json::array();
    for (const auto& b : r.bins)
        bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}, {"accuracy", b.accuracy},
                        {"confidence", b.confidence}});
    j["calibration_bins"] = bins;
    return j;
}

inline const std::vector<std::string>& metric_score_names() {
    static const std::vector<std::string> names{"entropy", "msp", "credal_width"};
    return names;
}

/// Column names of metrics.csv; identical for both model kinds.
inline std::vector<std::string> metrics_csv_columns() {
    std::vector<std::string> cols{"model", "seed", "num_test_id", "num_test_ood", "accuracy", "ece", "nll", "brier"};
    for (const auto& s : metric_score_names())
        for (const char* m : {"auroc", "auprc", "fpr95", "mean_id", "mean_ood"}) cols.push_back(s + "_" + m);
    return cols;
}

inline std::string metrics_csv(const EvalReport& r) {
    std::ostringstream os;
    const auto cols = metrics_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    os << to_string(r.model) << ',' << r.seed << ',' << r.num_id << ',' << r.num_ood << ',' << format_double(r.accuracy)
       << ',' << format_double(r.ece) << ',' << format_double(r.nll) << ',' << format_double(r.brier);
    for (const auto& name : metric_score_names()) {
        const ScoreReport* s = r.score(name);
        if (!s) {
            os << ",,,,,";
            continue;
        }
        os << ',' << opt(s->auroc) << ',' << opt(s->auprc) << ',' << opt(s->fpr95) << ',' << opt(s->mean_id) << ','
           << opt(s->mean_ood);
    }
    os << '\n';
    return os.str();
}

inline void write_metrics(const fs::path& dir, const EvalReport& r) {
    fs::create_directories(dir);
    {
        auto os = open_out(dir / "metrics.json");
        os << to_json(r).dump(2) << '\n';
    }
    auto os = open_out(dir / "metrics.csv");
    os << metrics_csv(r);
}

// ---------------------------------------------------------------------------
// Aggregation across runs
// ---------------------------------------------------------------------------

using MetricsRow = std::map<std::string, std::string>;

inline MetricsRow read_metrics_csv(const fs::path& path) {
    auto is = open_in(path);
    std::string header;
    std::string row;
    if (!std::getline(is, header) || !std::getline(is, row)) throw DataError(path.string() + ": expected header and one row");
    const auto h = split_csv(header);
    const auto v = split_csv(row);
    if (h.size() != v.size()) throw DataError(path.string() + ": header/row width mismatch");
    MetricsRow out;
    for (std::size_t i = 0; i < h.size(); ++i) out[std::string(h[i])] = std::string(v[i]);
    return out;
}

struct AggregateRow {
    std::string model;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single run
    std::size_t n = 0;
};

/// Mean and sample standard deviation of every numeric column, grouped by
/// model. Empty cells are skipped.
inline std::vector<AggregateRow> aggregate_metrics(const std::vector<MetricsRow>& rows) {
    std::vector<AggregateRow> out;
    std::map<std::string, std::vector<const MetricsRow*>> by_model;
    for (const auto& r : rows) by_model[r.count("model") ? r.at("model") : ""].push_back(&r);
    for (const auto& [model, group] : by_model) {
        for (const auto& col : metrics_csv_columns()) {
            if (col == "model" || col == "seed") continue;
            std::vector<double> xs;
            for (const auto* r : group) {
                auto it = r->find(col);
                if (it != r->end() && !it->second.empty()) xs.push_back(parse_double(it->second, col));
            }
            if (xs.empty()) continue;
            AggregateRow a;
            a.model = model;
            a.metric = col;
            a.n = xs.size();
            for (double x : xs) a.mean += x;
            a.mean /= static_cast<double>(xs.size());
            if (xs.size() > 1) {
                double ss = 0.0;
                for (double x : xs) ss += (x - a.mean) * (x - a.mean);
                a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
            }
            out.push_back(a);
        }
    }
    return out;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::ostringstream os;
    os << "model,metric,mean,std,n\n";
    for (const auto& r : rows)
        os << r.model << ',' << r.metric << ',' << format_double(r.mean) << ',' << format_double(r.stddev) << ',' << r.n
           << '\n';
    return os.str();
}

}  // namespace rsgnn

#endif  // RSGNN_EVALUATE_HPP
