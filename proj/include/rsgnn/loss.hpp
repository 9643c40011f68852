#ifndef RSGNN_LOSS_HPP
#define RSGNN_LOSS_HPP

// Training objectives. Every loss is a mean over the masked nodes and comes
// with its exact gradient.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsgnn/belief.hpp"
#include "rsgnn/graph.hpp"
#include "rsgnn/matrix.hpp"

namespace rsgnn {

/// How the mass-normalization penalty treats sum(m) != 1.
enum class NormPenalty {
    absolute,  // |sum m - 1|
    relaxed,   // max(0, sum m - 1)
};

inline const char* to_string(NormPenalty p) { return p == NormPenalty::absolute ? "absolute" : "relaxed"; }

inline NormPenalty parse_norm_penalty(const std::string& s) {
    if (s == "absolute") return NormPenalty::absolute;
    if (s == "relaxed") return NormPenalty::relaxed;
    throw std::invalid_argument("norm penalty must be 'absolute' or 'relaxed', got '" + s + "'");
}

struct LossConfig {
    double alpha = 1e-3;
    double beta = 1e-3;
    NormPenalty norm_penalty = NormPenalty::absolute;
    double label_smoothing = 0.0;
    std::vector<double> class_weights;  // empty or one weight per class

    void validate(int num_classes) const {
        if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("alpha and beta must be >= 0");
        if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
            throw std::invalid_argument("label smoothing must lie in [0,1)");
        if (!class_weights.empty() && static_cast<int>(class_weights.size()) != num_classes)
            throw std::invalid_argument("class weights need one entry per class");
        for (double w : class_weights)
            if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("class weights must be finite and >= 0");
    }

    double weight(int label) const {
        return class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(label)];
    }
};

struct LossResult {
    double value = 0.0;
    Matrix grad;
};

namespace detail {
inline std::size_t supervised_count(const NodeMask& mask, std::size_t rows, const char* what) {
    if (mask.size() != rows) throw std::invalid_argument(std::string(what) + ": mask length mismatch");
    const auto n = count(mask);
    if (n == 0) throw std::invalid_argument(std::string(what) + ": empty mask, nothing to supervise");
    return n;
}

inline int checked_label(std::span<const int> labels, std::size_t v, int num_classes, const char* what) {
    const int y = labels[v];
    if (y < 0 || y >= num_classes)
        throw std::invalid_argument(std::string(what) + ": masked node " + std::to_string(v) + " has label " +
                                    std::to_string(y));
    return y;
}
}  // namespace detail

/// Binary cross-entropy between predicted beliefs and the set-membership
/// targets, summed over focal sets and averaged over masked nodes. Smoothed
/// targets are t(1-s) + s/2; kLogEps is added inside both logs.
inline LossResult belief_bce_loss(const Matrix& bel, std::span<const int> labels, const FocalFamily& family,
                                  const NodeMask& mask, const LossConfig& cfg) {
    if (bel.cols() != family.size() || labels.size() != bel.rows())
        throw std::invalid_argument("belief_bce_loss: dimension mismatch");
    cfg.validate(family.num_classes());
    const auto n = detail::supervised_count(mask, bel.rows(), "belief_bce_loss");
    const double inv_n = 1.0 / static_cast<double>(n);
    const double s = cfg.label_smoothing;

    LossResult out{0.0, Matrix(bel.rows(), bel.cols())};
    for (std::size_t v = 0; v < bel.rows(); ++v) {
        if (!mask[v]) continue;
        const int y = detail::checked_label(labels, v, family.num_classes(), "belief_bce_loss");
        const ClassMask bit = ClassMask{1} << y;
        const double w = cfg.weight(y);
        const auto p = bel.row(v);
        auto g = out.grad.row(v);
        double node = 0.0;
        for (std::size_t k = 0; k < family.size(); ++k) {
            const double t0 = (family.mask(k) & bit) ? 1.0 : 0.0;
            const double t = t0 * (1.0 - s) + 0.5 * s;
            node -= t * std::log(p[k] + kLogEps) + (1.0 - t) * std::log(1.0 - p[k] + kLogEps);
            g[k] = w * inv_n * (-t / (p[k] + kLogEps) + (1.0 - t) / (1.0 - p[k] + kLogEps));
        }
        out.value += w * node;
    }
    out.value *= inv_n;
    return out;
}

/// alpha * mean_v sum_k max(0, -m) + beta * mean_v penalty(sum_k m - 1).
/// Subgradients are zero at the kinks.
inline LossResult mass_regularizer(const Matrix& mass, const NodeMask& mask, const LossConfig& cfg) {
    if (mask.size() != mass.rows()) throw std::invalid_argument("mass_regularizer: mask length mismatch");
    LossResult out{0.0, Matrix(mass.rows(), mass.cols())};
    const auto n = count(mask);
    if (n == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(n);
    double neg_total = 0.0;
    double norm_total = 0.0;
    for (std::size_t v = 0; v < mass.rows(); ++v) {
        if (!mask[v]) continue;
        const auto m = mass.row(v);
        auto g = out.grad.row(v);
        double sum = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            sum += m[k];
            if (m[k] < 0.0) {
                neg_total -= m[k];
                g[k] -= cfg.alpha * inv_n;
            }
        }
        const double excess = sum - 1.0;
        double dnorm = 0.0;
        if (cfg.norm_penalty == NormPenalty::absolute) {
            norm_total += std::abs(excess);
            dnorm = excess > 0.0 ? 1.0 : (excess < 0.0 ? -1.0 : 0.0);
        } else if (excess > 0.0) {
            norm_total += excess;
            dnorm = 1.0;
        }
        if (dnorm != 0.0)
            for (auto& x : g) x += cfg.beta * inv_n * dnorm;
    }
    out.value = cfg.alpha * neg_total * inv_n + cfg.beta * norm_total * inv_n;
    return out;
}

struct TotalLoss {
    double value = 0.0;
    double bce = 0.0;
    double regularizer = 0.0;
    Matrix grad_bel;  // d(value)/d(Bel), including the path through M
};

/// L = BCE(Bel) + R(Bel M). The regularizer's gradient is pulled back
/// through the constant Moebius map: dBel_j += sum_k dm_k M[j][k].
inline TotalLoss total_loss(const Matrix& bel, std::span<const int> labels, const FocalFamily& family,
                            const NodeMask& mask, const LossConfig& cfg) {
    auto bce = belief_bce_loss(bel, labels, family, mask, cfg);
    Matrix mass(bel.rows(), bel.cols());
    for (std::size_t v = 0; v < bel.rows(); ++v) {
        if (!mask[v]) continue;
        const auto m = bel_to_mass(bel.row(v), family);
        std::copy(m.begin(), m.end(), mass.row(v).begin());
    }
    auto reg = mass_regularizer(mass, mask, cfg);
    TotalLoss out;
    out.bce = bce.value;
    out.regularizer = reg.value;
    out.value = bce.value + reg.value;
    out.grad_bel = std::move(bce.grad);
    for (std::size_t v = 0; v < bel.rows(); ++v) {
        if (!mask[v]) continue;
        const auto dm = reg.grad.row(v);
        auto db = out.grad_bel.row(v);
        for (std::size_t k = 0; k < family.size(); ++k) {
            if (dm[k] == 0.0) continue;
            for (const auto& t : family.subsets_of(k)) db[t.index] += t.sign * dm[k];
        }
    }
    return out;
}

/// Mean over masked nodes of -w_y sum_i t_i log(p_i + eps), with smoothed
/// targets t = (1-s) onehot(y) + s/C. Gradient is w.r.t. the probabilities.
inline LossResult cross_entropy_loss(const Matrix& probs, std::span<const int> labels, const NodeMask& mask,
                                     const LossConfig& cfg) {
    if (labels.size() != probs.rows()) throw std::invalid_argument("cross_entropy_loss: dimension mismatch");
    const int c = static_cast<int>(probs.cols());
    cfg.validate(c);
    const auto n = detail::supervised_count(mask, probs.rows(), "cross_entropy_loss");
    const double inv_n = 1.0 / static_cast<double>(n);
    const double s = cfg.label_smoothing;
    LossResult out{0.0, Matrix(probs.rows(), probs.cols())};
    for (std::size_t v = 0; v < probs.rows(); ++v) {
        if (!mask[v]) continue;
        const int y = detail::checked_label(labels, v, c, "cross_entropy_loss");
        const double w = cfg.weight(y);
        const auto p = probs.row(v);
        auto g = out.grad.row(v);
        double node = 0.0;
        for (int i = 0; i < c; ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double t = (i == y ? 1.0 - s : 0.0) + s / c;
            if (t == 0.0) continue;
            node -= t * std::log(p[k] + kLogEps);
            g[k] = -w * inv_n * t / (p[k] + kLogEps);
        }
        out.value += w * node;
    }
    out.value *= inv_n;
    return out;
}

}  // namespace rsgnn

#endif  // RSGNN_LOSS_HPP
