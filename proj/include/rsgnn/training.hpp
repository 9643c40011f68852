#ifndef RSGNN_TRAINING_HPP
#define RSGNN_TRAINING_HPP

// Leave-out-class training. The whole graph takes part in message passing;
// only labeled in-distribution train nodes produce loss. ID classes are
// re-indexed 0..C_ID-1 for the heads and the focal-family universe.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsgnn/belief.hpp"
#include "rsgnn/encoder.hpp"
#include "rsgnn/errors.hpp"
#include "rsgnn/graph.hpp"
#include "rsgnn/heads.hpp"
#include "rsgnn/loss.hpp"
#include "rsgnn/metrics.hpp"
#include "rsgnn/rng.hpp"

namespace rsgnn {

enum class ModelKind { vanilla, rsgnn };

inline const char* to_string(ModelKind k) { return k == ModelKind::vanilla ? "vanilla" : "rsgnn"; }

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "vanilla") return ModelKind::vanilla;
    if (s == "rsgnn") return ModelKind::rsgnn;
    throw std::invalid_argument("model must be 'vanilla' or 'rsgnn', got '" + s + "'");
}

enum class OptimizerKind { gd, adam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::gd ? "gd" : "adam"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "gd") return OptimizerKind::gd;
    if (s == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("optimizer must be 'gd' or 'adam', got '" + s + "'");
}

struct TrainConfig {
    ModelKind model = ModelKind::rsgnn;
    int epochs = 30;
    int warmup_epochs = 1;  // counted inside `epochs`
    double lr = 1e-3;
    std::size_t hidden = 128;
    std::size_t heads = 4;
    double dropout = 0.2;
    std::uint64_t seed = 0;
    std::set<int> ood_classes;
    int budget = 64;
    int max_card = 3;
    bool full_power_set = false;
    OptimizerKind optimizer = OptimizerKind::gd;
    LossConfig loss;

    void validate() const {
        if (epochs < 0 || warmup_epochs < 0) throw std::invalid_argument("epoch counts must be >= 0");
        if (model == ModelKind::rsgnn && warmup_epochs > epochs)
            throw std::invalid_argument("warmup_epochs may not exceed epochs");
        if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be positive");
        if (hidden == 0 || heads == 0 || hidden % heads != 0)
            throw std::invalid_argument("hidden size must be a positive multiple of the head count");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0,1)");
        if (budget < 0) throw std::invalid_argument("focal budget must be >= 0");
        if (max_card < 2) throw std::invalid_argument("max_card must be >= 2");
    }
};

/// Bijection between original class labels and the local ID indices.
struct ClassMapping {
    std::vector<int> to_original;  // local -> original
    std::vector<int> to_local;     // original -> local, -1 for OOD classes

    static ClassMapping from_split(const OodSplit& split, int num_classes) {
        ClassMapping m;
        m.to_local.assign(static_cast<std::size_t>(num_classes), -1);
        for (int c : split.id_classes) {
            m.to_local[static_cast<std::size_t>(c)] = static_cast<int>(m.to_original.size());
            m.to_original.push_back(c);
        }
        return m;
    }

    int num_local() const noexcept { return static_cast<int>(to_original.size()); }
    int local(int original) const {
        if (original < 0 || static_cast<std::size_t>(original) >= to_local.size()) return -1;
        return to_local[static_cast<std::size_t>(original)];
    }
    int original(int local_index) const { return to_original.at(static_cast<std::size_t>(local_index)); }

    /// Original labels mapped to local indices; unlabeled and OOD become -1.
    std::vector<int> localize(const std::vector<int>& labels) const {
        std::vector<int> out(labels.size());
        for (std::size_t v = 0; v < labels.size(); ++v) out[v] = local(labels[v]);
        return out;
    }
};

/// Eval-mode outputs over all nodes. Probabilities are over local ID
/// classes (softmax for vanilla, BetP for rsgnn).
struct Predictions {
    Matrix probs;
    std::vector<int> predicted;  // original class labels
    std::vector<double> entropy;
    std::vector<double> msp;
    std::optional<std::vector<double>> credal_width;
};

struct Model {
    ModelKind kind = ModelKind::rsgnn;
    int num_classes = 0;
    ClassMapping classes;
    Encoder encoder;
    VanillaHead vanilla;
    BeliefHead belief;
    FocalFamily family;

    std::vector<Param*> params() {
        auto out = encoder.params();
        if (kind == ModelKind::vanilla)
            vanilla.collect(out);
        else
            belief.collect(out);
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

    Predictions predict(const NodeGraph& g) const {
        ForwardTape tape;
        const Matrix emb = encoder.forward(g, Mode::eval, 0, tape);
        Predictions out;
        if (kind == ModelKind::vanilla) {
            VanillaTape vt;
            out.probs = vanilla.forward(emb, vt);
        } else {
            BeliefTape bt;
            const BeliefBatch batch = belief.forward(emb, family, bt);
            out.probs = batch.betp;
            std::vector<double> widths(g.num_nodes());
            for (std::size_t v = 0; v < g.num_nodes(); ++v) widths[v] = summarize_node(batch, v, family).credal_width;
            out.credal_width = std::move(widths);
        }
        out.entropy = entropy_score(out.probs);
        out.msp = msp_score(out.probs);
        out.predicted.resize(g.num_nodes());
        for (std::size_t v = 0; v < g.num_nodes(); ++v)
            out.predicted[v] = classes.original(static_cast<int>(argmax(out.probs.row(v))));
        return out;
    }
};

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

/// Plain gradient descent, or Adam when selected.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

    void step(const std::vector<Param*>& params) {
        if (kind_ == OptimizerKind::gd) {
            for (auto* p : params) {
                auto v = p->value.values();
                const auto g = p->grad.values();
                for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr_ * g[i];
            }
            return;
        }
        constexpr double b1 = 0.9;
        constexpr double b2 = 0.999;
        constexpr double eps = 1e-8;
        if (first_.size() != params.size()) {
            first_.clear();
            second_.clear();
            for (auto* p : params) {
                first_.emplace_back(p->value.rows(), p->value.cols());
                second_.emplace_back(p->value.rows(), p->value.cols());
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(b1, t_);
        const double c2 = 1.0 - std::pow(b2, t_);
        for (std::size_t j = 0; j < params.size(); ++j) {
            auto v = params[j]->value.values();
            const auto g = params[j]->grad.values();
            auto m = first_[j].values();
            auto s = second_[j].values();
            for (std::size_t i = 0; i < v.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                s[i] = b2 * s[i] + (1.0 - b2) * g[i] * g[i];
                v[i] -= lr_ * (m[i] / c1) / (std::sqrt(s[i] / c2) + eps);
            }
        }
    }

private:
    OptimizerKind kind_;
    double lr_;
    int t_ = 0;
    std::vector<Matrix> first_;
    std::vector<Matrix> second_;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TraceRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;  // NaN when there are no ID validation nodes
};

struct TrainResult {
    Model model;  // best-validation snapshot
    std::vector<TraceRow> trace;
    Matrix confusion;  // C x C warm-up confusion (rsgnn only)
    int best_epoch = 0;
    double best_val_acc = 0.0;
};

namespace seeds {
inline constexpr std::uint64_t encoder = 10;
inline constexpr std::uint64_t warmup_head = 11;
inline constexpr std::uint64_t belief_head = 12;
inline constexpr std::uint64_t vanilla_head = 13;
inline constexpr std::uint64_t dropout = 1000;
}  // namespace seeds

/// Everything derived from (config, graph) before any parameter update.
struct TrainingSetup {
    OodSplit split;
    ClassMapping classes;
    std::vector<int> local_labels;
    NodeMask train_mask;
    NodeMask val_mask;
    LossConfig loss;  // class weights re-indexed to local classes
};

inline TrainingSetup prepare_training(const TrainConfig& cfg, const NodeGraph& g) {
    cfg.validate();
    g.validate();
    const int c = g.num_classes();
    if (c < 1) throw DataError("graph has no labeled nodes");
    TrainingSetup s;
    s.split = OodSplit::leave_out(c, cfg.ood_classes);
    s.classes = ClassMapping::from_split(s.split, c);
    if (s.classes.num_local() < 2) throw std::invalid_argument("need at least two in-distribution classes");
    s.local_labels = s.classes.localize(g.labels);
    s.train_mask = id_label_mask(g, s.split);
    s.val_mask = id_label_mask_for(g, s.split, Split::val);
    if (count(s.train_mask) == 0) throw DataError("no labeled in-distribution train nodes");
    s.loss = cfg.loss;
    if (!cfg.loss.class_weights.empty()) {
        if (static_cast<int>(cfg.loss.class_weights.size()) != c)
            throw std::invalid_argument("class weights need one entry per class in the graph");
        s.loss.class_weights.clear();
        for (int orig : s.classes.to_original) s.loss.class_weights.push_back(cfg.loss.class_weights[static_cast<std::size_t>(orig)]);
    }
    return s;
}

namespace detail {

inline void check_finite(double loss, int epoch) {
    if (!std::isfinite(loss))
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
}

/// Fraction of masked nodes whose argmax matches the local label.
inline double masked_accuracy(const Matrix& probs, const std::vector<int>& local_labels, const NodeMask& mask) {
    std::size_t n = 0;
    std::size_t hits = 0;
    for (std::size_t v = 0; v < mask.size(); ++v) {
        if (!mask[v]) continue;
        ++n;
        hits += static_cast<int>(argmax(probs.row(v))) == local_labels[v];
    }
    return n ? static_cast<double>(hits) / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

/// One full-batch step of softmax training; returns the loss.
inline double softmax_step(Encoder& enc, VanillaHead& head, const NodeGraph& g, const TrainingSetup& s,
                           std::uint64_t dropout_seed, Optimizer& opt, std::vector<Param*>& params) {
    for (auto* p : params) p->zero_grad();
    ForwardTape tape;
    const Matrix emb = enc.forward(g, Mode::train, dropout_seed, tape);
    VanillaTape vt;
    const Matrix probs = head.forward(emb, vt);
    const auto loss = cross_entropy_loss(probs, s.local_labels, s.train_mask, s.loss);
    enc.backward(tape, head.backward(vt, loss.grad));
    opt.step(params);
    return loss.value;
}

inline double belief_step(Encoder& enc, BeliefHead& head, const FocalFamily& family, const NodeGraph& g,
                          const TrainingSetup& s, std::uint64_t dropout_seed, Optimizer& opt,
                          std::vector<Param*>& params) {
    for (auto* p : params) p->zero_grad();
    ForwardTape tape;
    const Matrix emb = enc.forward(g, Mode::train, dropout_seed, tape);
    BeliefTape bt;
    const Matrix bel = head.forward_beliefs(emb, bt);
    const auto loss = total_loss(bel, s.local_labels, family, s.train_mask, s.loss);
    enc.backward(tape, head.backward(bt, loss.grad_bel));
    opt.step(params);
    return loss.value;
}

inline Matrix softmax_probs(const Encoder& enc, const VanillaHead& head, const NodeGraph& g) {
    ForwardTape tape;
    VanillaTape vt;
    return head.forward(enc.forward(g, Mode::eval, 0, tape), vt);
}

/// Trains `enc` jointly with a temporary softmax head for the warm-up epochs
/// and returns the C x C confusion of the ID train nodes (original class
/// indices; OOD rows and columns stay zero).
inline Matrix run_warmup(Encoder& enc, const TrainConfig& cfg, const NodeGraph& g, const TrainingSetup& s,
                         std::vector<TraceRow>* trace) {
    VanillaHead head(cfg.hidden, static_cast<std::size_t>(s.classes.num_local()), derive_seed(cfg.seed, seeds::warmup_head),
                     "warmup");
    Optimizer opt(cfg.optimizer, cfg.lr);
    auto params = enc.params();
    head.collect(params);
    for (int epoch = 1; epoch <= cfg.warmup_epochs; ++epoch) {
        const double loss = softmax_step(enc, head, g, s, derive_seed(cfg.seed, seeds::dropout + epoch), opt, params);
        check_finite(loss, epoch);
        if (trace) {
            const Matrix probs = softmax_probs(enc, head, g);
            trace->push_back({epoch, loss, masked_accuracy(probs, s.local_labels, s.val_mask)});
        }
    }
    const Matrix probs = softmax_probs(enc, head, g);
    const auto c = static_cast<std::size_t>(g.num_classes());
    Matrix confusion(c, c);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        if (!s.train_mask[v]) continue;
        const int pred = s.classes.original(static_cast<int>(argmax(probs.row(v))));
        confusion(static_cast<std::size_t>(g.labels[v]), static_cast<std::size_t>(pred)) += 1.0;
    }
    return confusion;
}

}  // namespace detail

inline Encoder make_encoder(const TrainConfig& cfg, std::size_t in_dim) {
    return Encoder(EncoderConfig{in_dim, cfg.hidden, cfg.heads, cfg.dropout}, derive_seed(cfg.seed, seeds::encoder));
}

/// Confusion matrix of ID train nodes after `warmup_epochs` of softmax
/// training from a fresh seeded encoder.
inline Matrix warmup_confusion(const TrainConfig& cfg, const NodeGraph& g) {
    const auto s = prepare_training(cfg, g);
    Encoder enc = make_encoder(cfg, g.feature_dim());
    return detail::run_warmup(enc, cfg, g, s, nullptr);
}

/// Focal family for the ID universe: the full power set when requested (and
/// C_ID <= 16), otherwise singletons plus the confusion-ranked budget.
inline FocalFamily select_family(const TrainConfig& cfg, const ClassMapping& classes, const Matrix& confusion) {
    const ClassUniverse universe(classes.num_local());
    if (cfg.full_power_set && universe.num_classes <= kMaxPowerSetClasses) return enumerate_power_set(universe);
    const auto c = static_cast<std::size_t>(universe.num_classes);
    Matrix local(c, c);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j)
            local(i, j) = confusion(static_cast<std::size_t>(classes.to_original[i]),
                                    static_cast<std::size_t>(classes.to_original[j]));
    return budget_focal_family(universe, local, cfg.budget, std::min(cfg.max_card, universe.num_classes));
}

/// Full training run. Keeps the parameters with the best ID validation
/// accuracy; ties go to the later epoch. Without a validation set the last
/// epoch is kept.
inline TrainResult train(const TrainConfig& cfg, const NodeGraph& g) {
    const TrainingSetup s = prepare_training(cfg, g);
    TrainResult result;
    Model& model = result.model;
    model.kind = cfg.model;
    model.num_classes = g.num_classes();
    model.classes = s.classes;
    model.encoder = make_encoder(cfg, g.feature_dim());
    const auto c_local = static_cast<std::size_t>(s.classes.num_local());

    int first_epoch = 1;
    if (cfg.model == ModelKind::vanilla) {
        model.vanilla = VanillaHead(cfg.hidden, c_local, derive_seed(cfg.seed, seeds::vanilla_head));
    } else {
        result.confusion = detail::run_warmup(model.encoder, cfg, g, s, &result.trace);
        model.family = select_family(cfg, s.classes, result.confusion);
        model.belief = BeliefHead(cfg.hidden, cfg.hidden, model.family.size(), derive_seed(cfg.seed, seeds::belief_head));
        first_epoch = cfg.warmup_epochs + 1;
    }

    const bool has_val = count(s.val_mask) > 0;
    Model best = model;
    result.best_epoch = first_epoch - 1;
    result.best_val_acc = has_val ? detail::masked_accuracy(model.predict(g).probs, s.local_labels, s.val_mask)
                                  : std::numeric_limits<double>::quiet_NaN();

    Optimizer opt(cfg.optimizer, cfg.lr);
    auto params = model.params();
    for (int epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
        const auto dropout_seed = derive_seed(cfg.seed, seeds::dropout + epoch);
        const double loss =
            cfg.model == ModelKind::vanilla
                ? detail::softmax_step(model.encoder, model.vanilla, g, s, dropout_seed, opt, params)
                : detail::belief_step(model.encoder, model.belief, model.family, g, s, dropout_seed, opt, params);
        detail::check_finite(loss, epoch);
        const double val_acc = detail::masked_accuracy(model.predict(g).probs, s.local_labels, s.val_mask);
        result.trace.push_back({epoch, loss, val_acc});
        if (!has_val || val_acc >= result.best_val_acc) {
            best = model;
            result.best_epoch = epoch;
            result.best_val_acc = val_acc;
        }
    }
    result.model = std::move(best);
    return result;
}

}  // namespace rsgnn

#endif  // RSGNN_TRAINING_HPP
