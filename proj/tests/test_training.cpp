#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace rsgnn;
using rsgnn::testing::check_params;
using rsgnn::testing::model_gradients;
using rsgnn::testing::model_loss;
using rsgnn::testing::random_graph;
using rsgnn::testing::tiny_model;

namespace {

NodeGraph small_sbm(std::uint64_t seed = 0) {
    SbmConfig cfg;
    cfg.num_classes = 4;
    cfg.nodes_per_class = 30;
    cfg.p_in = 0.2;
    cfg.p_out = 0.01;
    cfg.feature_dim = 8;
    cfg.feature_shift = 2.0;
    cfg.seed = seed;
    return generate_sbm(cfg);
}

TrainConfig small_config(ModelKind kind) {
    TrainConfig cfg;
    cfg.model = kind;
    cfg.epochs = 40;
    cfg.warmup_epochs = 5;
    cfg.lr = 0.05;
    cfg.hidden = 16;
    cfg.heads = 4;
    cfg.seed = 3;
    cfg.ood_classes = {3};
    return cfg;
}

}  // namespace

TEST(ClassMapping, RoundTrips) {
    const auto split = OodSplit::leave_out(6, {1, 4});
    const auto m = ClassMapping::from_split(split, 6);
    EXPECT_EQ(m.to_original, (std::vector<int>{0, 2, 3, 5}));
    for (int local = 0; local < m.num_local(); ++local) EXPECT_EQ(m.local(m.original(local)), local);
    EXPECT_EQ(m.local(1), -1);
    EXPECT_EQ(m.local(-1), -1);
    EXPECT_EQ(m.localize({5, -1, 4, 0}), (std::vector<int>{3, -1, -1, 0}));
}

TEST(TrainConfig, Validation) {
    TrainConfig cfg;
    cfg.warmup_epochs = 5;
    cfg.epochs = 3;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.epochs = 10;
    cfg.lr = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.lr = 0.1;
    cfg.hidden = 10;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.hidden = 16;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_THROW(parse_model_kind("gcn"), std::invalid_argument);
    EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::adam);
}

TEST(Training, GradientsMatchFiniteDifferencesForBothModels) {
    auto g = random_graph(10, 4, 3, 8, 0.3);
    for (auto kind : {ModelKind::rsgnn, ModelKind::vanilla}) {
        TrainConfig cfg;
        cfg.model = kind;
        cfg.hidden = 8;
        cfg.heads = 4;
        cfg.dropout = 0.2;
        cfg.loss.alpha = 0.5;
        cfg.loss.beta = 0.5;
        const auto s = prepare_training(cfg, g);
        Model m = tiny_model(kind, g, s, cfg);
        const auto r = check_params(
            m.params(), [&] { model_gradients(m, g, s, 4); }, [&] { return model_loss(m, g, s, 4); });
        EXPECT_LT(r.worst, 1e-4) << to_string(kind) << ": " << r.where;
    }
}

TEST(Training, NoGradientFromOutsideIdTrainMask) {
    auto g = random_graph(12, 4, 4, 9, 0.3);
    g.metadata["num_classes"] = "4";
    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.ood_classes = {3};
    cfg.loss.alpha = 0.5;
    cfg.loss.beta = 0.5;
    const auto s = prepare_training(cfg, g);

    NodeGraph stripped = g;
    for (std::size_t v = 0; v < g.num_nodes(); ++v)
        if (!s.train_mask[v]) stripped.labels[v] = kUnlabeled;
    const auto s2 = prepare_training(cfg, stripped);
    ASSERT_EQ(s.train_mask, s2.train_mask);

    for (auto kind : {ModelKind::rsgnn, ModelKind::vanilla}) {
        Model a = tiny_model(kind, g, s, cfg);
        Model b = a;
        a.zero_grad();
        b.zero_grad();
        model_gradients(a, g, s, 1);
        model_gradients(b, stripped, s2, 1);
        const auto pa = a.params();
        const auto pb = b.params();
        for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->grad, pb[i]->grad) << pa[i]->name;
    }
}

TEST(Training, WarmupConfusionCountsIdTrainNodes) {
    const auto g = small_sbm();
    auto cfg = small_config(ModelKind::rsgnn);
    cfg.warmup_epochs = 30;
    const Matrix conf = warmup_confusion(cfg, g);
    ASSERT_EQ(conf.rows(), 4u);
    const auto s = prepare_training(cfg, g);
    double total = 0.0;
    double off = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            row += conf(i, j);
            if (i != j) off += conf(i, j);
        }
        std::size_t expected = 0;
        for (std::size_t v = 0; v < g.num_nodes(); ++v) expected += s.train_mask[v] && g.labels[v] == static_cast<int>(i);
        EXPECT_EQ(row, static_cast<double>(expected)) << "class " << i;
        total += row;
    }
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(conf(3, j) + conf(j, 3), 0.0);  // OOD row/column stay empty
    EXPECT_LT(off, 0.1 * total);
}

TEST(Training, WarmupWithZeroEpochsStillBudgets) {
    const auto g = small_sbm();
    auto cfg = small_config(ModelKind::rsgnn);
    cfg.warmup_epochs = 0;
    cfg.epochs = 2;
    cfg.budget = 2;
    const auto r = train(cfg, g);
    EXPECT_EQ(r.model.family.size(), 5u);
    EXPECT_EQ(r.trace.size(), 2u);
}

TEST(Training, LossDecreasesAndStaysFinite) {
    const auto g = small_sbm();
    for (auto kind : {ModelKind::rsgnn, ModelKind::vanilla}) {
        const auto r = train(small_config(kind), g);
        ASSERT_FALSE(r.trace.empty());
        for (const auto& row : r.trace) EXPECT_TRUE(std::isfinite(row.train_loss));
        // Compare within the main phase (the warm-up trace uses a different loss).
        const auto first = std::find_if(r.trace.begin(), r.trace.end(),
                                        [&](const TraceRow& t) { return kind == ModelKind::vanilla || t.epoch > 5; });
        EXPECT_LT(r.trace.back().train_loss, first->train_loss) << to_string(kind);
        EXPECT_GE(r.best_val_acc, 0.8) << to_string(kind);
    }
}

TEST(Training, SameSeedSameTrace) {
    const auto g = small_sbm();
    auto cfg = small_config(ModelKind::rsgnn);
    cfg.epochs = 10;
    const auto a = train(cfg, g);
    const auto b = train(cfg, g);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace[i].train_loss, b.trace[i].train_loss);
        EXPECT_EQ(a.trace[i].val_acc, b.trace[i].val_acc);
    }
    cfg.seed = 4;
    EXPECT_NE(train(cfg, g).trace.back().train_loss, a.trace.back().train_loss);
}

TEST(Training, VanillaHeadCoversIdClassesOnly) {
    const auto g = small_sbm();
    auto cfg = small_config(ModelKind::vanilla);
    cfg.epochs = 2;
    auto r = train(cfg, g);
    EXPECT_EQ(r.model.vanilla.num_classes(), 3u);
    const auto pred = r.model.predict(g);
    EXPECT_EQ(pred.probs.cols(), 3u);
    EXPECT_FALSE(pred.credal_width.has_value());
    for (int y : pred.predicted) EXPECT_NE(y, 3);
}

TEST(Training, FullPowerSetOption) {
    const auto g = small_sbm();
    auto cfg = small_config(ModelKind::rsgnn);
    cfg.epochs = 6;
    cfg.full_power_set = true;
    const auto r = train(cfg, g);
    EXPECT_TRUE(r.model.family.is_full_power_set());
    EXPECT_EQ(r.model.family.num_classes(), 3);
    ASSERT_TRUE(r.model.predict(g).credal_width.has_value());
}

TEST(Training, BestValidationSnapshotIsKept) {
    const auto g = small_sbm();
    const auto r = train(small_config(ModelKind::rsgnn), g);
    // No main-phase epoch after the kept one reaches its accuracy.
    for (const auto& row : r.trace)
        if (row.epoch > 5) {
            EXPECT_LE(row.val_acc, r.best_val_acc) << row.epoch;
            if (row.epoch > r.best_epoch) EXPECT_LT(row.val_acc, r.best_val_acc) << row.epoch;
        }
    if (r.best_epoch > 5) EXPECT_EQ(r.trace[static_cast<std::size_t>(r.best_epoch - 1)].val_acc, r.best_val_acc);
    const auto s = prepare_training(small_config(ModelKind::rsgnn), g);
    EXPECT_EQ(detail::masked_accuracy(r.model.predict(g).probs, s.local_labels, s.val_mask), r.best_val_acc);
}

TEST(Training, AdamOptimizerTrains) {
    const auto g = small_sbm();
    auto cfg = small_config(ModelKind::rsgnn);
    cfg.optimizer = OptimizerKind::adam;
    cfg.lr = 0.01;
    const auto r = train(cfg, g);
    EXPECT_GE(r.best_val_acc, 0.8);
}

TEST(Training, PreconditionErrors) {
    auto g = small_sbm();
    auto cfg = small_config(ModelKind::rsgnn);
    cfg.ood_classes = {0, 1, 2};
    EXPECT_THROW(train(cfg, g), std::invalid_argument);  // one ID class left
    cfg.ood_classes = {3};
    NodeGraph no_train = g;
    for (auto& s : no_train.split)
        if (s == Split::train) s = Split::val;
    EXPECT_THROW(train(cfg, no_train), DataError);
}

TEST(Training, NonFiniteLossAborts) {
    auto g = small_sbm();
    g.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(train(small_config(ModelKind::vanilla), g), NumericalError);
}
