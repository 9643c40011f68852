#ifndef RSGNN_GRAPH_HPP
#define RSGNN_GRAPH_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rsgnn/errors.hpp"
#include "rsgnn/matrix.hpp"
#include "rsgnn/rng.hpp"

namespace rsgnn {

inline constexpr int kUnlabeled = -1;

enum class Split : std::uint8_t { train, val, test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw DataError("unknown split tag '" + s + "'");
}

/// Directed edge src -> dst; messages flow from src into dst.
struct Edge {
    int src = 0;
    int dst = 0;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

using NodeMask = std::vector<bool>;

struct NodeGraph {
    Matrix features;  // num_nodes x d
    std::vector<Edge> edges;
    std::vector<int> labels;  // kUnlabeled or 0..C-1
    std::vector<Split> split;
    std::map<std::string, std::string> metadata;

    std::size_t num_nodes() const noexcept { return labels.size(); }
    std::size_t feature_dim() const noexcept { return features.cols(); }

    /// `num_classes` from metadata when present, else max label + 1.
    int num_classes() const {
        if (auto it = metadata.find("num_classes"); it != metadata.end()) return std::stoi(it->second);
        int c = 0;
        for (int y : labels) c = std::max(c, y + 1);
        return c;
    }

    void validate() const {
        const auto n = num_nodes();
        if (features.rows() != n) throw DataError("feature rows do not match node count");
        if (split.size() != n) throw DataError("split tags do not match node count");
        const int c = metadata.count("num_classes") ? num_classes() : -1;
        for (int y : labels) {
            if (y < kUnlabeled) throw DataError("label below -1");
            if (c >= 0 && y >= c) throw DataError("label exceeds num_classes");
        }
        for (const auto& e : edges) {
            if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= n || static_cast<std::size_t>(e.dst) >= n)
                throw DataError("edge endpoint out of range");
        }
    }
};

/// Appends a self-loop to every node that lacks one.
inline void add_self_loops(NodeGraph& g) {
    std::vector<bool> has(g.num_nodes(), false);
    for (const auto& e : g.edges)
        if (e.src == e.dst) has[static_cast<std::size_t>(e.src)] = true;
    for (std::size_t v = 0; v < has.size(); ++v)
        if (!has[v]) g.edges.push_back({static_cast<int>(v), static_cast<int>(v)});
}

// ---------------------------------------------------------------------------
// Leave-out-class split
// ---------------------------------------------------------------------------

struct OodSplit {
    std::set<int> id_classes;
    std::set<int> ood_classes;

    /// Every class not listed in `ood` is in-distribution.
    static OodSplit leave_out(int num_classes, const std::set<int>& ood) {
        OodSplit s;
        for (int c : ood)
            if (c < 0 || c >= num_classes) throw std::invalid_argument("OOD class " + std::to_string(c) + " out of range");
        for (int c = 0; c < num_classes; ++c) (ood.count(c) ? s.ood_classes : s.id_classes).insert(c);
        s.validate(num_classes);
        return s;
    }

    void validate(int num_classes) const {
        if (id_classes.empty()) throw std::invalid_argument("at least one class must stay in-distribution");
        for (int c : id_classes) {
            if (c < 0 || c >= num_classes) throw std::invalid_argument("ID class out of range");
            if (ood_classes.count(c)) throw std::invalid_argument("ID and OOD classes overlap");
        }
        for (int c : ood_classes)
            if (c < 0 || c >= num_classes) throw std::invalid_argument("OOD class out of range");
    }

    bool is_id(int label) const { return id_classes.count(label) > 0; }
    bool is_ood(int label) const { return ood_classes.count(label) > 0; }
};

inline NodeMask id_label_mask_for(const NodeGraph& g, const OodSplit& split, Split which) {
    NodeMask m(g.num_nodes(), false);
    for (std::size_t v = 0; v < m.size(); ++v)
        m[v] = g.labels[v] >= 0 && g.split[v] == which && split.is_id(g.labels[v]);
    return m;
}

/// Labeled train nodes whose class is in-distribution; the only nodes
/// allowed to contribute to the training loss.
inline NodeMask id_label_mask(const NodeGraph& g, const OodSplit& split) {
    return id_label_mask_for(g, split, Split::train);
}

inline std::size_t count(const NodeMask& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), true)); }

// ---------------------------------------------------------------------------
// Temporal scene graphs
// ---------------------------------------------------------------------------

struct AgentAnnotation {
    std::string tube_uid;
    std::array<double, 4> box{};  // normalized to [0,1]
    std::vector<double> action_onehot;
    std::vector<double> location_onehot;
    int class_label = kUnlabeled;
};

struct FrameAnnotation {
    int frame_id = 0;
    std::vector<AgentAnnotation> agents;
};

struct TemporalGraphConfig {
    int window_size = 4;
    int window_stride = 4;
    int frame_step = 5;
};

namespace detail {
inline void check_onehot(const std::vector<double>& v, const char* what) {
    int nonzero = 0;
    for (double x : v) nonzero += (x != 0.0);
    if (nonzero > 1) throw DataError(std::string(what) + " one-hot has more than one nonzero entry");
}
}  // namespace detail

/// Cuts annotated frames into windowed node graphs. Each frame contributes
/// an unlabeled scene node (connected both ways to its agents) and one node
/// per agent. Consecutive frames in a window are joined scene-to-scene and
/// agent-to-agent by matching tube_uid, both directions. Every node carries
/// a self-loop. Features: [box(4) | action | location | is_scene, is_agent].
inline std::vector<NodeGraph> build_temporal_graph(std::vector<FrameAnnotation> frames,
                                                   const TemporalGraphConfig& cfg) {
    if (cfg.window_size < 1) throw std::invalid_argument("window_size must be >= 1");
    if (cfg.window_stride < 1) throw std::invalid_argument("window_stride must be >= 1");
    if (cfg.frame_step < 1) throw std::invalid_argument("frame_step must be >= 1");
    if (frames.empty()) return {};

    std::stable_sort(frames.begin(), frames.end(),
                     [](const FrameAnnotation& a, const FrameAnnotation& b) { return a.frame_id < b.frame_id; });

    std::size_t action_dim = 0;
    std::size_t location_dim = 0;
    bool dims_known = false;
    for (const auto& f : frames) {
        std::set<std::string> uids;
        for (const auto& a : f.agents) {
            if (!dims_known) {
                action_dim = a.action_onehot.size();
                location_dim = a.location_onehot.size();
                dims_known = true;
            }
            if (a.action_onehot.size() != action_dim || a.location_onehot.size() != location_dim)
                throw DataError("inconsistent one-hot lengths across agents");
            for (double b : a.box)
                if (!(b >= 0.0 && b <= 1.0)) throw DataError("box coordinate outside [0,1]");
            detail::check_onehot(a.action_onehot, "action");
            detail::check_onehot(a.location_onehot, "location");
            if (a.class_label < kUnlabeled) throw DataError("agent class label below -1");
            if (!uids.insert(a.tube_uid).second)
                throw DataError("duplicate tube_uid '" + a.tube_uid + "' in frame " + std::to_string(f.frame_id));
        }
    }

    std::vector<const FrameAnnotation*> sampled;
    for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(cfg.frame_step)) sampled.push_back(&frames[i]);

    const std::size_t feat_dim = 4 + action_dim + location_dim + 2;
    const auto window = static_cast<std::size_t>(cfg.window_size);
    std::vector<NodeGraph> out;
    for (std::size_t start = 0; start + window <= sampled.size(); start += static_cast<std::size_t>(cfg.window_stride)) {
        std::size_t n = 0;
        for (std::size_t t = 0; t < window; ++t) n += 1 + sampled[start + t]->agents.size();

        NodeGraph g;
        g.features = Matrix(n, feat_dim);
        g.labels.assign(n, kUnlabeled);
        g.split.assign(n, Split::train);

        std::vector<int> scene_node(window);
        std::vector<std::unordered_map<std::string, int>> agent_node(window);
        int next = 0;
        for (std::size_t t = 0; t < window; ++t) {
            const auto& frame = *sampled[start + t];
            const int s = next++;
            scene_node[t] = s;
            g.features(static_cast<std::size_t>(s), feat_dim - 2) = 1.0;
            for (const auto& a : frame.agents) {
                const int v = next++;
                const auto row = static_cast<std::size_t>(v);
                agent_node[t][a.tube_uid] = v;
                g.labels[row] = a.class_label;
                std::size_t col = 0;
                for (double b : a.box) g.features(row, col++) = b;
                for (double x : a.action_onehot) g.features(row, col++) = x;
                for (double x : a.location_onehot) g.features(row, col++) = x;
                g.features(row, feat_dim - 1) = 1.0;
                g.edges.push_back({s, v});
                g.edges.push_back({v, s});
            }
        }
        for (std::size_t t = 0; t + 1 < window; ++t) {
            g.edges.push_back({scene_node[t], scene_node[t + 1]});
            g.edges.push_back({scene_node[t + 1], scene_node[t]});
            for (const auto& a : sampled[start + t]->agents) {
                auto it = agent_node[t + 1].find(a.tube_uid);
                if (it == agent_node[t + 1].end()) continue;
                const int u = agent_node[t].at(a.tube_uid);
                g.edges.push_back({u, it->second});
                g.edges.push_back({it->second, u});
            }
        }
        for (int v = 0; v < static_cast<int>(n); ++v) g.edges.push_back({v, v});

        g.metadata["source"] = "temporal";
        g.metadata["first_frame"] = std::to_string(sampled[start]->frame_id);
        g.metadata["last_frame"] = std::to_string(sampled[start + window - 1]->frame_id);
        g.metadata["window_index"] = std::to_string(out.size());
        out.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic stochastic block model
// ---------------------------------------------------------------------------

struct SbmConfig {
    int num_classes = 6;
    int nodes_per_class = 100;
    double p_in = 0.1;
    double p_out = 0.01;
    int feature_dim = 16;
    double feature_shift = 1.0;
    std::uint64_t seed = 0;
};

/// Planted-partition graph with Gaussian features. Class c has mean
/// feature_shift * e_{c mod d} and unit variance. Nodes are laid out class by
/// class; splits are a seeded 60/20/20 shuffle. Self-loops are included.
inline NodeGraph generate_sbm(const SbmConfig& cfg) {
    if (cfg.num_classes < 1 || cfg.nodes_per_class < 1) throw std::invalid_argument("SBM needs classes and nodes");
    if (cfg.feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
    if (!(cfg.p_out >= 0.0 && cfg.p_out <= cfg.p_in && cfg.p_in <= 1.0))
        throw std::invalid_argument("SBM requires 0 <= p_out <= p_in <= 1");

    const auto n = static_cast<std::size_t>(cfg.num_classes) * static_cast<std::size_t>(cfg.nodes_per_class);
    const auto d = static_cast<std::size_t>(cfg.feature_dim);
    Rng edge_rng(derive_seed(cfg.seed, 1));
    Rng feat_rng(derive_seed(cfg.seed, 2));
    Rng split_rng(derive_seed(cfg.seed, 3));

    NodeGraph g;
    g.labels.resize(n);
    for (std::size_t v = 0; v < n; ++v) g.labels[v] = static_cast<int>(v / static_cast<std::size_t>(cfg.nodes_per_class));

    g.features = Matrix(n, d);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j = 0; j < d; ++j) g.features(v, j) = feat_rng.normal();
        g.features(v, static_cast<std::size_t>(g.labels[v]) % d) += cfg.feature_shift;
    }

    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = u + 1; v < n; ++v) {
            const double p = g.labels[u] == g.labels[v] ? cfg.p_in : cfg.p_out;
            if (edge_rng.bernoulli(p)) {
                g.edges.push_back({static_cast<int>(u), static_cast<int>(v)});
                g.edges.push_back({static_cast<int>(v), static_cast<int>(u)});
            }
        }
    }
    add_self_loops(g);

    std::vector<std::size_t> order(n);
    for (std::size_t v = 0; v < n; ++v) order[v] = v;
    split_rng.shuffle(std::span<std::size_t>(order));
    const std::size_t n_train = n * 6 / 10;
    const std::size_t n_val = n * 2 / 10;
    g.split.assign(n, Split::test);
    for (std::size_t i = 0; i < n; ++i)
        g.split[order[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);

    g.metadata["source"] = "sbm";
    g.metadata["num_classes"] = std::to_string(cfg.num_classes);
    g.metadata["seed"] = std::to_string(cfg.seed);
    return g;
}

}  // namespace rsgnn

#endif  // RSGNN_GRAPH_HPP
