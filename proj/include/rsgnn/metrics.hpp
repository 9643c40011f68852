#ifndef RSGNN_METRICS_HPP
#define RSGNN_METRICS_HPP

// Uncertainty scores, OOD-detection metrics and calibration metrics.
// OOD nodes are the positive class throughout; a higher score means "more
// likely OOD".

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rsgnn/belief.hpp"
#include "rsgnn/matrix.hpp"

namespace rsgnn {

inline constexpr int kDefaultCalibrationBins = 15;

/// 1 - max_i p(i) per row.
inline std::vector<double> msp_score(const Matrix& probs) {
    std::vector<double> s(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto p = probs.row(r);
        s[r] = 1.0 - *std::max_element(p.begin(), p.end());
    }
    return s;
}

/// Shannon entropy per row (nats, kLogEps inside the log).
inline std::vector<double> entropy_score(const Matrix& probs) {
    std::vector<double> s(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) s[r] = pignistic_entropy(probs.row(r));
    return s;
}

namespace detail {
inline void check_scored(std::span<const double> scores, const std::vector<bool>& targets) {
    if (scores.size() != targets.size()) throw std::invalid_argument("scores and targets differ in length");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("scores must be finite");
}

/// Indices sorted by descending score.
inline std::vector<std::size_t> order_desc(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}
}  // namespace detail

/// Mann-Whitney estimate of P(score_ood > score_id), ties counting one half.
/// nullopt when either class is empty.
inline std::optional<double> auroc(std::span<const double> scores, const std::vector<bool>& targets) {
    detail::check_scored(scores, targets);
    const auto n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    double pos = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (targets[idx[k]]) {
                rank_sum += avg_rank;
                pos += 1.0;
            }
        i = j;
    }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) return std::nullopt;
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

/// Average precision: sum over thresholds of (R_t - R_{t-1}) * P_t, with no
/// interpolation between operating points. Tied scores form one threshold.
inline std::optional<double> auprc(std::span<const double> scores, const std::vector<bool>& targets) {
    detail::check_scored(scores, targets);
    const double total_pos = static_cast<double>(std::count(targets.begin(), targets.end(), true));
    if (total_pos == 0.0 || total_pos == static_cast<double>(targets.size())) return std::nullopt;
    const auto idx = detail::order_desc(scores);
    double tp = 0.0;
    double fp = 0.0;
    double prev_recall = 0.0;
    double ap = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (targets[idx[j]] ? tp : fp) += 1.0;
            ++j;
        }
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
        i = j;
    }
    return ap;
}

/// Smallest false-positive rate over thresholds (score >= t flags OOD)
/// whose true-positive rate reaches 95%.
inline std::optional<double> fpr_at_95_tpr(std::span<const double> scores, const std::vector<bool>& targets) {
    detail::check_scored(scores, targets);
    const auto total_pos = static_cast<std::size_t>(std::count(targets.begin(), targets.end(), true));
    const auto total_neg = targets.size() - total_pos;
    if (total_pos == 0 || total_neg == 0) return std::nullopt;
    const auto idx = detail::order_desc(scores);
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (targets[idx[j]] ? tp : fp) += 1;
            ++j;
        }
        // FPR only grows as the threshold drops, so the first hit is minimal.
        if (tp * 100 >= total_pos * 95) return static_cast<double>(fp) / static_cast<double>(total_neg);
        i = j;
    }
    return 1.0;
}

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double accuracy = 0.0;
    double confidence = 0.0;
};

namespace detail {
inline void check_probs(const Matrix& probs, std::span<const int> labels) {
    if (labels.size() != probs.rows()) throw std::invalid_argument("probs and labels differ in length");
    if (probs.rows() == 0) throw std::invalid_argument("no nodes to evaluate");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) throw std::invalid_argument("label out of range");
}
}  // namespace detail

/// Equal-width bins on max-probability confidence; bin b covers
/// (b/B, (b+1)/B], with confidence 0 folded into the first bin.
inline std::vector<CalibrationBin> calibration_bins(const Matrix& probs, std::span<const int> labels,
                                                    int num_bins = kDefaultCalibrationBins) {
    detail::check_probs(probs, labels);
    if (num_bins < 1) throw std::invalid_argument("need at least one calibration bin");
    const auto b = static_cast<std::size_t>(num_bins);
    std::vector<CalibrationBin> bins(b);
    for (std::size_t i = 0; i < b; ++i) {
        bins[i].lower = static_cast<double>(i) / num_bins;
        bins[i].upper = static_cast<double>(i + 1) / num_bins;
    }
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto p = probs.row(r);
        const auto pred = argmax(p);
        const double conf = p[pred];
        auto slot = static_cast<long>(std::ceil(conf * num_bins)) - 1;
        slot = std::clamp(slot, 0L, static_cast<long>(num_bins) - 1);
        auto& bin = bins[static_cast<std::size_t>(slot)];
        bin.count += 1;
        bin.confidence += conf;
        bin.accuracy += (static_cast<int>(pred) == labels[r]) ? 1.0 : 0.0;
    }
    for (auto& bin : bins)
        if (bin.count) {
            bin.accuracy /= static_cast<double>(bin.count);
            bin.confidence /= static_cast<double>(bin.count);
        }
    return bins;
}

inline double ece(const Matrix& probs, std::span<const int> labels, int num_bins = kDefaultCalibrationBins) {
    const auto bins = calibration_bins(probs, labels, num_bins);
    double total = 0.0;
    for (const auto& bin : bins)
        if (bin.count) total += static_cast<double>(bin.count) * std::abs(bin.accuracy - bin.confidence);
    return total / static_cast<double>(probs.rows());
}

inline double nll(const Matrix& probs, std::span<const int> labels) {
    detail::check_probs(probs, labels);
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r) total -= std::log(probs(r, static_cast<std::size_t>(labels[r])) + kLogEps);
    return total / static_cast<double>(probs.rows());
}

inline double brier(const Matrix& probs, std::span<const int> labels) {
    detail::check_probs(probs, labels);
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto p = probs.row(r);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double d = p[i] - (static_cast<int>(i) == labels[r] ? 1.0 : 0.0);
            total += d * d;
        }
    }
    return total / static_cast<double>(probs.rows());
}

inline double accuracy(const Matrix& probs, std::span<const int> labels) {
    detail::check_probs(probs, labels);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < probs.rows(); ++r) hits += static_cast<int>(argmax(probs.row(r))) == labels[r];
    return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

}  // namespace rsgnn

#endif  // RSGNN_METRICS_HPP
