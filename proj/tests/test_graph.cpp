#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "test_util.hpp"

using namespace rsgnn;

namespace {

AgentAnnotation agent(const std::string& uid, int label = 0) {
    AgentAnnotation a;
    a.tube_uid = uid;
    a.box = {0.1, 0.2, 0.3, 0.4};
    a.action_onehot = {0.0, 1.0};
    a.location_onehot = {1.0, 0.0, 0.0};
    a.class_label = label;
    return a;
}

FrameAnnotation frame(int id, std::vector<AgentAnnotation> agents) { return {id, std::move(agents)}; }

/// Frame position of every node, recovered from the node layout (a scene
/// node opens each frame) and the scene indicator column.
std::vector<int> frame_of(const NodeGraph& g) {
    const auto scene_col = g.feature_dim() - 2;
    std::vector<int> f(g.num_nodes());
    int t = -1;
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        if (g.features(v, scene_col) == 1.0) ++t;
        f[v] = t;
    }
    return f;
}

std::size_t count_edges(const NodeGraph& g, const std::function<bool(const Edge&)>& pred) {
    return static_cast<std::size_t>(std::count_if(g.edges.begin(), g.edges.end(), pred));
}

}  // namespace

TEST(IdLabelMask, AllOodIsEmpty) {
    NodeGraph g;
    g.features = Matrix(3, 1);
    g.labels = {1, 2, 1};
    g.split.assign(3, Split::train);
    const auto split = OodSplit{{0}, {1, 2}};
    EXPECT_EQ(count(id_label_mask(g, split)), 0u);
}

TEST(IdLabelMask, DirectRule) {
    NodeGraph g;
    g.features = Matrix(3, 1);
    g.labels = {-1, 0, 8};
    g.split.assign(3, Split::train);
    const auto split = OodSplit::leave_out(10, {8, 9});
    EXPECT_EQ(id_label_mask(g, split), (NodeMask{false, true, false}));
}

TEST(IdLabelMask, MatchesLinearScanOnLargeGraph) {
    Rng rng(3);
    NodeGraph g;
    const std::size_t n = 1000;
    g.features = Matrix(n, 1);
    for (std::size_t v = 0; v < n; ++v) {
        g.labels.push_back(static_cast<int>(rng.below(11)) - 1);
        g.split.push_back(static_cast<Split>(rng.below(3)));
    }
    const auto split = OodSplit::leave_out(10, {2, 7});
    std::size_t expected = 0;
    for (std::size_t v = 0; v < n; ++v)
        expected += g.labels[v] >= 0 && g.split[v] == Split::train && g.labels[v] != 2 && g.labels[v] != 7;
    EXPECT_EQ(count(id_label_mask(g, split)), expected);
}

TEST(OodSplit, Validation) {
    EXPECT_THROW(OodSplit::leave_out(3, {0, 1, 2}), std::invalid_argument);
    EXPECT_THROW(OodSplit::leave_out(3, {5}), std::invalid_argument);
    const OodSplit bad{{0, 1}, {1}};
    EXPECT_THROW(bad.validate(3), std::invalid_argument);
    const auto s = OodSplit::leave_out(4, {3});
    EXPECT_EQ(s.id_classes, (std::set<int>{0, 1, 2}));
    EXPECT_TRUE(s.is_ood(3));
    EXPECT_FALSE(s.is_id(-1));
}

TEST(NodeGraph, ValidateCatchesBadInput) {
    NodeGraph g;
    g.features = Matrix(2, 1);
    g.labels = {0, 1};
    g.split = {Split::train, Split::test};
    g.edges = {{0, 2}};
    EXPECT_THROW(g.validate(), DataError);
    g.edges = {{0, 1}};
    g.labels = {0, -2};
    EXPECT_THROW(g.validate(), DataError);
    g.labels = {0, 1};
    g.metadata["num_classes"] = "1";
    EXPECT_THROW(g.validate(), DataError);
    g.metadata["num_classes"] = "4";
    EXPECT_NO_THROW(g.validate());
    EXPECT_EQ(g.num_classes(), 4);
}

TEST(SelfLoops, AddedOncePerNode) {
    NodeGraph g;
    g.features = Matrix(3, 1);
    g.labels = {0, 0, 0};
    g.split.assign(3, Split::train);
    g.edges = {{1, 1}, {0, 2}};
    add_self_loops(g);
    add_self_loops(g);
    EXPECT_EQ(count_edges(g, [](const Edge& e) { return e.src == e.dst; }), 3u);
}

// ---------------------------------------------------------------------------
// Temporal graphs
// ---------------------------------------------------------------------------

TEST(Temporal, SingleFrameTwoAgents) {
    const auto graphs = build_temporal_graph({frame(0, {agent("a"), agent("b", 1)})}, {1, 1, 1});
    ASSERT_EQ(graphs.size(), 1u);
    const auto& g = graphs[0];
    EXPECT_EQ(g.num_nodes(), 3u);
    EXPECT_EQ(g.edges.size(), 7u);
    EXPECT_EQ(g.labels, (std::vector<int>{-1, 0, 1}));
    // Features: box(4) | action(2) | location(3) | scene, agent.
    ASSERT_EQ(g.feature_dim(), 11u);
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(g.features(0, j), 0.0);
    EXPECT_EQ(g.features(0, 9), 1.0);
    EXPECT_EQ(g.features(0, 10), 0.0);
    EXPECT_EQ(g.features(1, 0), 0.1);
    EXPECT_EQ(g.features(1, 5), 1.0);
    EXPECT_EQ(g.features(1, 6), 1.0);
    EXPECT_EQ(g.features(1, 10), 1.0);
}

TEST(Temporal, PersistingAgentGetsTwoTemporalEdges) {
    const auto graphs = build_temporal_graph({frame(0, {agent("a")}), frame(1, {agent("a")})}, {2, 2, 1});
    ASSERT_EQ(graphs.size(), 1u);
    const auto& g = graphs[0];
    const auto f = frame_of(g);
    const auto scene_col = g.feature_dim() - 2;
    const auto agent_agent_temporal = count_edges(g, [&](const Edge& e) {
        const auto s = static_cast<std::size_t>(e.src);
        const auto d = static_cast<std::size_t>(e.dst);
        return g.features(s, scene_col) == 0.0 && g.features(d, scene_col) == 0.0 && f[s] != f[d];
    });
    EXPECT_EQ(agent_agent_temporal, 2u);
}

TEST(Temporal, RoadConfigOverFortyFrames) {
    std::vector<FrameAnnotation> frames;
    for (int i = 0; i < 40; ++i) frames.push_back(frame(i, {agent("a")}));
    const auto graphs = build_temporal_graph(frames, {4, 4, 5});
    ASSERT_EQ(graphs.size(), 2u);
    EXPECT_EQ(graphs[0].metadata.at("first_frame"), "0");
    EXPECT_EQ(graphs[0].metadata.at("last_frame"), "15");
    EXPECT_EQ(graphs[1].metadata.at("first_frame"), "20");
    EXPECT_EQ(graphs[1].metadata.at("last_frame"), "35");
}

TEST(Temporal, EmptyInputAndShortWindows) {
    EXPECT_TRUE(build_temporal_graph({}, {}).empty());
    EXPECT_TRUE(build_temporal_graph({frame(0, {agent("a")}), frame(1, {agent("a")})}, {3, 1, 1}).empty());
    EXPECT_THROW(build_temporal_graph({frame(0, {})}, {0, 1, 1}), std::invalid_argument);
}

TEST(Temporal, RejectsBadAnnotations) {
    auto a = agent("a");
    a.box[2] = 1.5;
    EXPECT_THROW(build_temporal_graph({frame(0, {a})}, {1, 1, 1}), DataError);
    a = agent("a");
    a.action_onehot = {1.0, 1.0};
    EXPECT_THROW(build_temporal_graph({frame(0, {a})}, {1, 1, 1}), DataError);
    EXPECT_THROW(build_temporal_graph({frame(0, {agent("a"), agent("a")})}, {1, 1, 1}), DataError);
}

TEST(Temporal, StructuralInvariantsOnRandomScenes) {
    Rng rng(21);
    std::vector<FrameAnnotation> frames;
    for (int i = 0; i < 30; ++i) {
        std::vector<AgentAnnotation> agents;
        for (int u = 0; u < 6; ++u)
            if (rng.bernoulli(0.6)) agents.push_back(agent("tube" + std::to_string(u), u % 3));
        frames.push_back(frame(i, agents));
    }
    const auto graphs = build_temporal_graph(frames, {3, 2, 2});
    ASSERT_EQ(graphs.size(), 7u);  // 15 sampled frames, windows start at 0,2,...,12
    for (const auto& g : graphs) {
        const auto f = frame_of(g);
        const auto scene_col = g.feature_dim() - 2;
        std::vector<int> loops(g.num_nodes(), 0);
        for (const auto& e : g.edges) {
            const auto s = static_cast<std::size_t>(e.src);
            const auto d = static_cast<std::size_t>(e.dst);
            if (s == d) {
                ++loops[s];
                continue;
            }
            EXPECT_LE(std::abs(f[s] - f[d]), 1) << "edge spans non-adjacent frames";
            const bool s_scene = g.features(s, scene_col) == 1.0;
            const bool d_scene = g.features(d, scene_col) == 1.0;
            if (f[s] != f[d] && !s_scene && !d_scene) {
                // Tube u carries label u % 3; a temporal link must keep it.
                EXPECT_EQ(g.labels[s], g.labels[d]);
            }
            if (f[s] != f[d]) EXPECT_EQ(s_scene, d_scene) << "scene linked to agent across frames";
        }
        for (std::size_t v = 0; v < g.num_nodes(); ++v) {
            EXPECT_EQ(loops[v], 1);
            if (g.features(v, scene_col) == 1.0) EXPECT_EQ(g.labels[v], kUnlabeled);
        }
        // Scene nodes never enter a supervision mask.
        const auto mask = id_label_mask(g, OodSplit::leave_out(3, {}));
        for (std::size_t v = 0; v < g.num_nodes(); ++v)
            if (g.features(v, scene_col) == 1.0) EXPECT_FALSE(mask[v]);
    }
}

TEST(Temporal, TemporalEdgesOnlyJoinSameTube) {
    // Two tubes swap positions between frames; only uid decides linkage.
    const auto graphs =
        build_temporal_graph({frame(0, {agent("x", 0), agent("y", 1)}), frame(1, {agent("y", 1), agent("z", 2)})},
                             {2, 1, 1});
    ASSERT_EQ(graphs.size(), 1u);
    const auto& g = graphs[0];
    // Nodes: 0 scene, 1 x, 2 y | 3 scene, 4 y, 5 z.
    std::set<std::pair<int, int>> temporal;
    for (const auto& e : g.edges)
        if (e.src != e.dst && e.src != 0 && e.src != 3 && e.dst != 0 && e.dst != 3) temporal.insert({e.src, e.dst});
    EXPECT_EQ(temporal, (std::set<std::pair<int, int>>{{2, 4}, {4, 2}}));
    EXPECT_EQ(count_edges(g, [](const Edge& e) { return (e.src == 0 && e.dst == 3) || (e.src == 3 && e.dst == 0); }), 2u);
}

// ---------------------------------------------------------------------------
// Stochastic block model
// ---------------------------------------------------------------------------

TEST(Sbm, DegenerateCliques) {
    SbmConfig cfg;
    cfg.num_classes = 2;
    cfg.nodes_per_class = 3;
    cfg.p_in = 1.0;
    cfg.p_out = 0.0;
    cfg.feature_dim = 4;
    const auto g = generate_sbm(cfg);
    std::size_t within = 0;
    std::size_t cross = 0;
    for (const auto& e : g.edges) {
        if (e.src == e.dst) continue;
        (g.labels[static_cast<std::size_t>(e.src)] == g.labels[static_cast<std::size_t>(e.dst)] ? within : cross) += 1;
    }
    EXPECT_EQ(within, 12u);  // two 3-cliques, both directions
    EXPECT_EQ(cross, 0u);
}

TEST(Sbm, EdgeCountWithinFiveSigma) {
    SbmConfig cfg;
    cfg.num_classes = 4;
    cfg.nodes_per_class = 50;
    cfg.p_in = 0.2;
    cfg.p_out = 0.02;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        const auto g = generate_sbm(cfg);
        std::size_t undirected = 0;
        for (const auto& e : g.edges) undirected += e.src < e.dst;
        const double n_in = 4.0 * 50.0 * 49.0 / 2.0;
        const double n_out = 6.0 * 50.0 * 50.0;
        const double mean = n_in * cfg.p_in + n_out * cfg.p_out;
        const double sd = std::sqrt(n_in * cfg.p_in * (1 - cfg.p_in) + n_out * cfg.p_out * (1 - cfg.p_out));
        EXPECT_LT(std::abs(static_cast<double>(undirected) - mean), 5.0 * sd) << "seed " << seed;
    }
}

TEST(Sbm, DeterministicAndUniform) {
    SbmConfig cfg;
    cfg.seed = 42;
    const auto a = generate_sbm(cfg);
    const auto b = generate_sbm(cfg);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.edges, b.edges);
    EXPECT_EQ(a.split, b.split);
    cfg.seed = 43;
    EXPECT_NE(generate_sbm(cfg).edges, a.edges);

    std::map<int, int> hist;
    for (int y : a.labels) ++hist[y];
    ASSERT_EQ(hist.size(), 6u);
    for (const auto& [y, n] : hist) EXPECT_EQ(n, 100);

    std::map<Split, int> splits;
    for (auto s : a.split) ++splits[s];
    EXPECT_EQ(splits[Split::train], 360);
    EXPECT_EQ(splits[Split::val], 120);
    EXPECT_EQ(splits[Split::test], 120);
    EXPECT_EQ(count_edges(a, [](const Edge& e) { return e.src == e.dst; }), a.num_nodes());
}

TEST(Sbm, FeatureMeansFollowClass) {
    SbmConfig cfg;
    cfg.num_classes = 3;
    cfg.nodes_per_class = 400;
    cfg.feature_dim = 3;
    cfg.feature_shift = 2.0;
    const auto g = generate_sbm(cfg);
    for (int c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t v = 0; v < g.num_nodes(); ++v)
                if (g.labels[v] == c) s += g.features(v, j);
            const double mean = s / 400.0;
            const double want = static_cast<std::size_t>(c) == j ? 2.0 : 0.0;
            EXPECT_NEAR(mean, want, 5.0 / std::sqrt(400.0));
        }
}

TEST(Sbm, RejectsBadProbabilities) {
    SbmConfig cfg;
    cfg.p_in = 0.1;
    cfg.p_out = 0.2;
    EXPECT_THROW(generate_sbm(cfg), std::invalid_argument);
    cfg.p_out = -0.1;
    EXPECT_THROW(generate_sbm(cfg), std::invalid_argument);
}
