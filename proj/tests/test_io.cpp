#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace rsgnn;

namespace {

/// Fresh scratch directory named after the running test.
fs::path scratch() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    const fs::path dir = fs::temp_directory_path() / "rsgnn_test_io" / (std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    os << s;
}

NodeGraph small_sbm() {
    SbmConfig cfg;
    cfg.num_classes = 3;
    cfg.nodes_per_class = 20;
    cfg.p_in = 0.2;
    cfg.feature_dim = 5;
    cfg.feature_shift = 2.0;
    cfg.seed = 12;
    return generate_sbm(cfg);
}

TrainConfig small_config(ModelKind kind) {
    TrainConfig cfg;
    cfg.model = kind;
    cfg.epochs = 12;
    cfg.warmup_epochs = 3;
    cfg.lr = 0.05;
    cfg.hidden = 8;
    cfg.seed = 2;
    cfg.ood_classes = {1};
    cfg.budget = 1;
    return cfg;
}

}  // namespace

TEST(GraphIo, RoundTripIsExact) {
    const auto dir = scratch();
    const auto g = small_sbm();
    write_graph(dir / "a", g);
    const auto back = read_graph(dir / "a");
    EXPECT_EQ(back.features, g.features);
    EXPECT_EQ(back.labels, g.labels);
    EXPECT_EQ(back.split, g.split);
    ASSERT_EQ(back.edges.size(), g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        EXPECT_EQ(back.edges[i].src, g.edges[i].src);
        EXPECT_EQ(back.edges[i].dst, g.edges[i].dst);
    }
    EXPECT_EQ(back.metadata, g.metadata);
    write_graph(dir / "b", back);
    for (const char* f : {"nodes.csv", "edges.csv", "meta.json"}) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(GraphIo, DoublesSurviveText) {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, -0.0})
        EXPECT_EQ(parse_double(format_double(x), "x"), x) << format_double(x);
}

TEST(GraphIo, MalformedFilesAreDataErrors) {
    const auto dir = scratch();
    write_graph(dir, small_sbm());
    const std::string nodes = slurp(dir / "nodes.csv");
    const std::string edges = slurp(dir / "edges.csv");

    spit(dir / "nodes.csv", "id,label,split,f0\n");
    EXPECT_THROW(read_graph(dir), DataError);
    spit(dir / "nodes.csv", nodes + "60,0,train,1,2\n");
    EXPECT_THROW(read_graph(dir), DataError);
    spit(dir / "nodes.csv", nodes + "60,0,train,1,2,x,4,5\n");
    EXPECT_THROW(read_graph(dir), DataError);
    spit(dir / "nodes.csv", nodes + "60,0,holdout,1,2,3,4,5\n");
    EXPECT_THROW(read_graph(dir), DataError);
    spit(dir / "nodes.csv", nodes);

    spit(dir / "edges.csv", edges + "0,999\n");
    EXPECT_THROW(read_graph(dir), DataError);
    spit(dir / "edges.csv", "a,b\n");
    EXPECT_THROW(read_graph(dir), DataError);
    fs::remove(dir / "edges.csv");
    EXPECT_THROW(read_graph(dir), DataError);
}

TEST(FrameIo, ParsesAnnotations) {
    const auto j = nlohmann::json::parse(R"({"frames": [
        {"frame_id": 0, "agents": [
            {"tube_uid": "car-1", "box": [0.1, 0.2, 0.3, 0.4], "action": [1, 0], "location": [0, 1], "label": 2},
            {"tube_uid": "ped-7", "box": [0.5, 0.5, 0.6, 0.9], "action": [0, 1], "location": [1, 0]}]},
        {"frame_id": 1, "agents": []}]})");
    const auto frames = frames_from_json(j);
    ASSERT_EQ(frames.size(), 2u);
    ASSERT_EQ(frames[0].agents.size(), 2u);
    EXPECT_EQ(frames[0].agents[0].tube_uid, "car-1");
    EXPECT_EQ(frames[0].agents[0].box[3], 0.4);
    EXPECT_EQ(frames[0].agents[0].class_label, 2);
    EXPECT_EQ(frames[0].agents[1].class_label, kUnlabeled);
    EXPECT_TRUE(frames[1].agents.empty());

    EXPECT_THROW(frames_from_json(nlohmann::json::parse(R"({"frames": [{"agents": []}]})")), DataError);
    EXPECT_THROW(frames_from_json(nlohmann::json::parse(
                     R"({"frames": [{"frame_id": 0, "agents": [{"tube_uid": "a", "box": [1, 2]}]}]})")),
                 DataError);
    const auto dir = scratch();
    spit(dir / "bad.json", "{\"frames\": [");
    EXPECT_THROW(read_frames(dir / "bad.json"), DataError);
}

TEST(ConfigIo, JsonRoundTrip) {
    TrainConfig cfg = small_config(ModelKind::rsgnn);
    cfg.optimizer = OptimizerKind::adam;
    cfg.full_power_set = true;
    cfg.loss.alpha = 0.25;
    cfg.loss.norm_penalty = NormPenalty::relaxed;
    cfg.loss.label_smoothing = 0.1;
    cfg.loss.class_weights = {1.0, 2.0, 0.5};
    const auto back = train_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
    EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
    EXPECT_EQ(back.ood_classes, cfg.ood_classes);
    EXPECT_EQ(back.loss.norm_penalty, NormPenalty::relaxed);

    auto j = to_json(cfg);
    j.erase("epochs");
    EXPECT_THROW(train_config_from_json(j), DataError);
    j = to_json(cfg);
    j["model"] = "gcn";
    EXPECT_THROW(train_config_from_json(j), DataError);
}

TEST(Checkpoint, ReloadReproducesPredictionsExactly) {
    const auto dir = scratch();
    const auto g = small_sbm();
    for (auto kind : {ModelKind::rsgnn, ModelKind::vanilla}) {
        const auto cfg = small_config(kind);
        auto result = train(cfg, g);
        const auto run = dir / to_string(kind);
        write_run(run, cfg, result, g.feature_dim());
        const auto loaded = load_run(run);
        EXPECT_EQ(to_json(loaded.config).dump(), to_json(cfg).dump());
        if (kind == ModelKind::rsgnn) EXPECT_EQ(loaded.model.family, result.model.family);

        const auto a = result.model.predict(g);
        const auto b = loaded.model.predict(g);
        EXPECT_EQ(a.probs, b.probs);
        const auto split = OodSplit::leave_out(3, cfg.ood_classes);
        EXPECT_EQ(to_json(evaluate(result.model, g, split, 2)).dump(), to_json(evaluate(loaded.model, g, split, 2)).dump());
    }
}

TEST(Checkpoint, CorruptFilesAreDataErrors) {
    const auto dir = scratch();
    const auto g = small_sbm();
    const auto cfg = small_config(ModelKind::rsgnn);
    auto result = train(cfg, g);
    write_run(dir, cfg, result, g.feature_dim());
    const std::string good = slurp(dir / "checkpoint.bin");

    spit(dir / "checkpoint.bin", "NOTACKPT" + good.substr(8));
    EXPECT_THROW(load_run(dir), DataError);
    spit(dir / "checkpoint.bin", good.substr(0, good.size() / 2));
    EXPECT_THROW(load_run(dir), DataError);
    std::string bumped = good;
    bumped[8] = 9;  // version field
    spit(dir / "checkpoint.bin", bumped);
    EXPECT_THROW(load_run(dir), DataError);
    spit(dir / "checkpoint.bin", good);
    EXPECT_NO_THROW(load_run(dir));

    // A model of another width rejects the tensors by shape.
    Model other = result.model;
    other.encoder = Encoder({g.feature_dim(), 16, 4, 0.2}, 0);
    EXPECT_THROW(load_checkpoint(dir / "checkpoint.bin", other), DataError);

    spit(dir / "config.json", "{");
    EXPECT_THROW(load_run(dir), DataError);
}

TEST(Aggregate, MeanAndSampleStd) {
    std::vector<MetricsRow> rows;
    for (const char* acc : {"0.8", "0.9", "1.0"}) rows.push_back({{"model", "rsgnn"}, {"seed", "0"}, {"accuracy", acc}});
    rows.push_back({{"model", "vanilla"}, {"accuracy", "0.5"}, {"credal_width_auroc", ""}});
    const auto agg = aggregate_metrics(rows);
    ASSERT_EQ(agg.size(), 2u);
    EXPECT_EQ(agg[0].model, "rsgnn");
    EXPECT_EQ(agg[0].metric, "accuracy");
    EXPECT_NEAR(agg[0].mean, 0.9, 1e-15);
    EXPECT_NEAR(agg[0].stddev, 0.1, 1e-15);
    EXPECT_EQ(agg[0].n, 3u);
    EXPECT_EQ(agg[1].stddev, 0.0);
    EXPECT_EQ(aggregate_csv(agg).substr(0, 24), "model,metric,mean,std,n\n");
}

TEST(Aggregate, MetricsCsvRoundTrip) {
    const auto dir = scratch();
    const auto g = small_sbm();
    const auto cfg = small_config(ModelKind::vanilla);
    const auto report = evaluate(train(cfg, g).model, g, OodSplit::leave_out(3, cfg.ood_classes), 2);
    write_metrics(dir, report);
    const auto row = read_metrics_csv(dir / "metrics.csv");
    EXPECT_EQ(row.at("model"), "vanilla");
    EXPECT_EQ(parse_double(row.at("accuracy"), "accuracy"), report.accuracy);
    EXPECT_EQ(row.at("credal_width_auroc"), "");
    const auto j = nlohmann::json::parse(slurp(dir / "metrics.json"));
    EXPECT_EQ(j.at("num_test_id").get<std::size_t>(), report.num_id);
}
