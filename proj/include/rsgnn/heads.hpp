#ifndef RSGNN_HEADS_HPP
#define RSGNN_HEADS_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rsgnn/belief.hpp"
#include "rsgnn/encoder.hpp"
#include "rsgnn/matrix.hpp"
#include "rsgnn/rng.hpp"

namespace rsgnn {

inline void softmax_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        double mx = row[0];
        for (double x : row) mx = std::max(mx, x);
        double total = 0.0;
        for (auto& x : row) total += (x = std::exp(x - mx));
        for (auto& x : row) x /= total;
    }
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Softmax baseline head: p = softmax(z W + b)
// ---------------------------------------------------------------------------

struct VanillaTape {
    Matrix embeddings;
    Matrix probs;
};

class VanillaHead {
public:
    VanillaHead() = default;
    VanillaHead(std::size_t hidden, std::size_t num_classes, std::uint64_t seed, const std::string& prefix = "vanilla")
        : weight_(prefix + ".weight", hidden, num_classes), bias_(prefix + ".bias", 1, num_classes) {
        Rng rng(seed);
        glorot_uniform(weight_.value, hidden, num_classes, rng);
    }

    std::size_t num_classes() const noexcept { return weight_.value.cols(); }

    Matrix forward(const Matrix& embeddings, VanillaTape& tape) const {
        if (embeddings.cols() != weight_.value.rows()) throw std::invalid_argument("vanilla head: embedding width mismatch");
        Matrix logits = matmul(embeddings, weight_.value);
        const auto b = bias_.value.row(0);
        for (std::size_t r = 0; r < logits.rows(); ++r) {
            auto row = logits.row(r);
            for (std::size_t k = 0; k < row.size(); ++k) row[k] += b[k];
        }
        softmax_rows(logits);
        tape.embeddings = embeddings;
        tape.probs = logits;
        return logits;
    }

    /// Takes d(loss)/d(probs); returns d(loss)/d(embeddings).
    Matrix backward(const VanillaTape& tape, const Matrix& grad_probs) {
        if (!grad_probs.same_shape(tape.probs)) throw std::invalid_argument("vanilla head backward: shape mismatch");
        Matrix dlogits(grad_probs.rows(), grad_probs.cols());
        for (std::size_t r = 0; r < dlogits.rows(); ++r) {
            const auto p = tape.probs.row(r);
            const auto g = grad_probs.row(r);
            double dot = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) dot += g[k] * p[k];
            auto d = dlogits.row(r);
            for (std::size_t k = 0; k < p.size(); ++k) d[k] = p[k] * (g[k] - dot);
        }
        add_in_place(weight_.grad, matmul_tn(tape.embeddings, dlogits));
        auto db = bias_.grad.row(0);
        for (std::size_t r = 0; r < dlogits.rows(); ++r) {
            const auto d = dlogits.row(r);
            for (std::size_t k = 0; k < d.size(); ++k) db[k] += d[k];
        }
        return matmul_nt(dlogits, weight_.value);
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    Param& weight() noexcept { return weight_; }
    Param& bias() noexcept { return bias_; }

private:
    Param weight_;
    Param bias_;
};

// ---------------------------------------------------------------------------
// Belief head: Bel = sigmoid(W2 relu(W1 z + b1) + b2), one output per focal set
// ---------------------------------------------------------------------------

/// Per-node rows of belief, mass (raw, unsanitized) and pignistic vectors.
struct BeliefBatch {
    Matrix bel;   // N x K
    Matrix mass;  // N x K
    Matrix betp;  // N x C
};

/// mass = Bel M and BetP = norm(mass P) row by row.
inline BeliefBatch beliefs_to_outputs(Matrix bel, const FocalFamily& family) {
    if (bel.cols() != family.size()) throw std::invalid_argument("belief width does not match focal family");
    BeliefBatch out;
    out.mass = Matrix(bel.rows(), family.size());
    out.betp = Matrix(bel.rows(), static_cast<std::size_t>(family.num_classes()));
    for (std::size_t r = 0; r < bel.rows(); ++r) {
        const auto m = bel_to_mass(bel.row(r), family);
        std::copy(m.begin(), m.end(), out.mass.row(r).begin());
        const auto p = mass_to_betp(m, family);
        std::copy(p.begin(), p.end(), out.betp.row(r).begin());
    }
    out.bel = std::move(bel);
    return out;
}

struct BeliefTape {
    Matrix embeddings;
    Matrix pre_hidden;
    Matrix hidden;
    Matrix bel;
};

class BeliefHead {
public:
    BeliefHead() = default;
    BeliefHead(std::size_t in_dim, std::size_t mlp_hidden, std::size_t num_sets, std::uint64_t seed)
        : w1_("belief.w1", in_dim, mlp_hidden),
          b1_("belief.b1", 1, mlp_hidden),
          w2_("belief.w2", mlp_hidden, num_sets),
          b2_("belief.b2", 1, num_sets) {
        Rng rng(seed);
        glorot_uniform(w1_.value, in_dim, mlp_hidden, rng);
        glorot_uniform(w2_.value, mlp_hidden, num_sets, rng);
    }

    std::size_t num_sets() const noexcept { return w2_.value.cols(); }

    /// Raw belief outputs in (0,1), N x K.
    Matrix forward_beliefs(const Matrix& embeddings, BeliefTape& tape) const {
        if (embeddings.cols() != w1_.value.rows()) throw std::invalid_argument("belief head: embedding width mismatch");
        tape.embeddings = embeddings;
        tape.pre_hidden = matmul(embeddings, w1_.value);
        add_bias(tape.pre_hidden, b1_.value);
        tape.hidden = tape.pre_hidden;
        for (auto& x : tape.hidden.values()) x = std::max(x, 0.0);
        Matrix bel = matmul(tape.hidden, w2_.value);
        add_bias(bel, b2_.value);
        for (auto& x : bel.values()) x = sigmoid(x);
        tape.bel = bel;
        return bel;
    }

    BeliefBatch forward(const Matrix& embeddings, const FocalFamily& family, BeliefTape& tape) const {
        if (family.size() != num_sets()) throw std::invalid_argument("belief head width does not match focal family");
        return beliefs_to_outputs(forward_beliefs(embeddings, tape), family);
    }

    /// Takes d(loss)/d(Bel); returns d(loss)/d(embeddings).
    Matrix backward(const BeliefTape& tape, const Matrix& grad_bel) {
        if (!grad_bel.same_shape(tape.bel)) throw std::invalid_argument("belief head backward: shape mismatch");
        Matrix dlogit = grad_bel;
        {
            auto d = dlogit.values();
            const auto b = tape.bel.values();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= b[i] * (1.0 - b[i]);
        }
        add_in_place(w2_.grad, matmul_tn(tape.hidden, dlogit));
        accumulate_bias(b2_.grad, dlogit);
        Matrix dh = matmul_nt(dlogit, w2_.value);
        {
            auto d = dh.values();
            const auto pre = tape.pre_hidden.values();
            for (std::size_t i = 0; i < d.size(); ++i)
                if (!(pre[i] > 0.0)) d[i] = 0.0;
        }
        add_in_place(w1_.grad, matmul_tn(tape.embeddings, dh));
        accumulate_bias(b1_.grad, dh);
        return matmul_nt(dh, w1_.value);
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&w1_);
        out.push_back(&b1_);
        out.push_back(&w2_);
        out.push_back(&b2_);
    }

    Param& output_weight() noexcept { return w2_; }
    Param& output_bias() noexcept { return b2_; }

private:
    static void add_bias(Matrix& m, const Matrix& bias) {
        const auto b = bias.row(0);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            auto row = m.row(r);
            for (std::size_t k = 0; k < row.size(); ++k) row[k] += b[k];
        }
    }
    static void accumulate_bias(Matrix& grad, const Matrix& d) {
        auto g = grad.row(0);
        for (std::size_t r = 0; r < d.rows(); ++r) {
            const auto row = d.row(r);
            for (std::size_t k = 0; k < row.size(); ++k) g[k] += row[k];
        }
    }

    Param w1_;
    Param b1_;
    Param w2_;
    Param b2_;
};

/// Everything reported for one node of the belief head.
struct BeliefOutput {
    BeliefVector bel;
    MassVector mass;
    PignisticVector betp;
    CredalInterval credal;
    int prediction = 0;
    double entropy = 0.0;
    double credal_width = 0.0;
};

/// Derives the reported quantities from one row of a BeliefBatch. The same
/// mass row feeds BetP, the credal interval and the width.
inline BeliefOutput summarize_node(const BeliefBatch& batch, std::size_t row, const FocalFamily& family) {
    BeliefOutput o;
    const auto bel = batch.bel.row(row);
    const auto mass = batch.mass.row(row);
    const auto betp = batch.betp.row(row);
    o.bel.assign(bel.begin(), bel.end());
    o.mass.assign(mass.begin(), mass.end());
    o.betp.assign(betp.begin(), betp.end());
    o.credal = credal_bounds(o.mass, family);
    o.prediction = static_cast<int>(argmax(o.betp));
    o.entropy = pignistic_entropy(o.betp);
    o.credal_width = credal_width(o.credal, o.prediction);
    return o;
}

}  // namespace rsgnn

#endif  // RSGNN_HEADS_HPP
