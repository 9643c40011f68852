#ifndef RSGNN_ENCODER_HPP
#define RSGNN_ENCODER_HPP

// Two-layer GATv2 node encoder with an explicit reverse pass.
//
// For an edge u -> v and one attention head:
//   z_uv   = W_src h_u + W_dst h_v
//   e_uv   = a . LeakyReLU(z_uv)             (slope 0.2)
//   alpha  = softmax of e_uv over the in-edges of v
//   out_v  = sum_u alpha_uv W_src h_u + b
// Layer 1 runs 4 heads of width hidden/4 and concatenates them, then ReLU
// and dropout. Layer 2 is a single head of width hidden, then ReLU.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsgnn/graph.hpp"
#include "rsgnn/matrix.hpp"
#include "rsgnn/rng.hpp"

namespace rsgnn {

inline constexpr double kLeakySlope = 0.2;

enum class Mode { train, eval };

/// Trainable tensor with its gradient buffer.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;

    Param() = default;
    Param(std::string n, std::size_t rows, std::size_t cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

    void zero_grad() { grad.fill(0.0); }
};

/// Glorot-uniform fill in +-sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : m.values()) x = rng.uniform(-limit, limit);
}

/// In-edges grouped by destination node.
struct EdgeIndex {
    std::size_t num_nodes = 0;
    std::vector<std::size_t> offsets;  // num_nodes + 1
    std::vector<int> src;              // in destination-sorted order
    std::vector<int> dst;

    static EdgeIndex build(const NodeGraph& g) {
        EdgeIndex idx;
        idx.num_nodes = g.num_nodes();
        if (idx.num_nodes == 0) throw std::invalid_argument("encoder needs a nonempty graph");
        idx.offsets.assign(idx.num_nodes + 1, 0);
        for (const auto& e : g.edges) {
            if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= idx.num_nodes ||
                static_cast<std::size_t>(e.dst) >= idx.num_nodes)
                throw std::invalid_argument("edge endpoint out of range");
            ++idx.offsets[static_cast<std::size_t>(e.dst) + 1];
        }
        for (std::size_t v = 0; v < idx.num_nodes; ++v) {
            if (idx.offsets[v + 1] == 0)
                throw std::invalid_argument("node " + std::to_string(v) + " has no in-edges; add self-loops first");
            idx.offsets[v + 1] += idx.offsets[v];
        }
        idx.src.resize(g.edges.size());
        idx.dst.resize(g.edges.size());
        std::vector<std::size_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
        for (const auto& e : g.edges) {
            const auto slot = cursor[static_cast<std::size_t>(e.dst)]++;
            idx.src[slot] = e.src;
            idx.dst[slot] = e.dst;
        }
        return idx;
    }

    std::size_t num_edges() const noexcept { return src.size(); }
};

struct GatLayerTape {
    Matrix input;
    std::vector<Matrix> src_proj;  // per head, N x head_dim
    std::vector<Matrix> pre_act;   // per head, E x head_dim (z_uv)
    std::vector<std::vector<double>> alpha;  // per head, E
};

class GatLayer {
public:
    GatLayer() = default;
    GatLayer(std::size_t in_dim, std::size_t heads, std::size_t head_dim, const std::string& prefix, Rng& rng)
        : in_dim_(in_dim), heads_(heads), head_dim_(head_dim) {
        for (std::size_t h = 0; h < heads; ++h) {
            w_src_.emplace_back(prefix + ".w_src." + std::to_string(h), in_dim, head_dim);
            w_dst_.emplace_back(prefix + ".w_dst." + std::to_string(h), in_dim, head_dim);
            glorot_uniform(w_src_.back().value, in_dim, head_dim, rng);
            glorot_uniform(w_dst_.back().value, in_dim, head_dim, rng);
        }
        att_ = Param(prefix + ".att", heads, head_dim);
        glorot_uniform(att_.value, head_dim, 1, rng);
        bias_ = Param(prefix + ".bias", 1, heads * head_dim);
    }

    std::size_t in_dim() const noexcept { return in_dim_; }
    std::size_t out_dim() const noexcept { return heads_ * head_dim_; }
    std::size_t heads() const noexcept { return heads_; }

    /// Pre-activation output (heads concatenated, bias added).
    Matrix forward(const Matrix& x, const EdgeIndex& idx, GatLayerTape& tape) const {
        if (x.cols() != in_dim_) throw std::invalid_argument("GAT layer input width mismatch");
        const std::size_t n = x.rows();
        const std::size_t ne = idx.num_edges();
        tape.input = x;
        tape.src_proj.assign(heads_, {});
        tape.pre_act.assign(heads_, {});
        tape.alpha.assign(heads_, {});
        Matrix out(n, out_dim());
        for (std::size_t h = 0; h < heads_; ++h) {
            Matrix s = matmul(x, w_src_[h].value);
            const Matrix t = matmul(x, w_dst_[h].value);
            Matrix z(ne, head_dim_);
            std::vector<double> score(ne);
            const auto a = att_.value.row(h);
            for (std::size_t e = 0; e < ne; ++e) {
                auto zr = z.row(e);
                const auto su = s.row(static_cast<std::size_t>(idx.src[e]));
                const auto tv = t.row(static_cast<std::size_t>(idx.dst[e]));
                double acc = 0.0;
                for (std::size_t k = 0; k < head_dim_; ++k) {
                    zr[k] = su[k] + tv[k];
                    acc += a[k] * (zr[k] > 0.0 ? zr[k] : kLeakySlope * zr[k]);
                }
                score[e] = acc;
            }
            std::vector<double> alpha(ne);
            for (std::size_t v = 0; v < n; ++v) {
                const auto lo = idx.offsets[v];
                const auto hi = idx.offsets[v + 1];
                double mx = score[lo];
                for (auto e = lo + 1; e < hi; ++e) mx = std::max(mx, score[e]);
                double total = 0.0;
                for (auto e = lo; e < hi; ++e) total += (alpha[e] = std::exp(score[e] - mx));
                auto o = out.row(v).subspan(h * head_dim_, head_dim_);
                for (auto e = lo; e < hi; ++e) {
                    alpha[e] /= total;
                    const auto su = s.row(static_cast<std::size_t>(idx.src[e]));
                    for (std::size_t k = 0; k < head_dim_; ++k) o[k] += alpha[e] * su[k];
                }
            }
            tape.src_proj[h] = std::move(s);
            tape.pre_act[h] = std::move(z);
            tape.alpha[h] = std::move(alpha);
        }
        const auto b = bias_.value.row(0);
        for (std::size_t v = 0; v < n; ++v) {
            auto o = out.row(v);
            for (std::size_t k = 0; k < o.size(); ++k) o[k] += b[k];
        }
        return out;
    }

    /// Accumulates parameter gradients and returns d(loss)/d(input).
    Matrix backward(const GatLayerTape& tape, const EdgeIndex& idx, const Matrix& grad_out) {
        const Matrix& x = tape.input;
        const std::size_t n = x.rows();
        if (grad_out.rows() != n || grad_out.cols() != out_dim() || tape.alpha.size() != heads_)
            throw std::invalid_argument("GAT layer backward: tape/shape mismatch");
        const std::size_t ne = idx.num_edges();

        auto db = bias_.grad.row(0);
        for (std::size_t v = 0; v < n; ++v) {
            const auto g = grad_out.row(v);
            for (std::size_t k = 0; k < g.size(); ++k) db[k] += g[k];
        }

        Matrix grad_x(n, in_dim_);
        for (std::size_t h = 0; h < heads_; ++h) {
            const Matrix& s = tape.src_proj[h];
            const Matrix& z = tape.pre_act[h];
            const auto& alpha = tape.alpha[h];
            const auto a = att_.value.row(h);
            auto da = att_.grad.row(h);
            Matrix ds(n, head_dim_);
            Matrix dt(n, head_dim_);
            std::vector<double> dalpha(ne);
            for (std::size_t v = 0; v < n; ++v) {
                const auto g = grad_out.row(v).subspan(h * head_dim_, head_dim_);
                const auto lo = idx.offsets[v];
                const auto hi = idx.offsets[v + 1];
                double weighted = 0.0;
                for (auto e = lo; e < hi; ++e) {
                    const auto u = static_cast<std::size_t>(idx.src[e]);
                    const auto su = s.row(u);
                    auto dsu = ds.row(u);
                    double dot = 0.0;
                    for (std::size_t k = 0; k < head_dim_; ++k) {
                        dsu[k] += alpha[e] * g[k];
                        dot += g[k] * su[k];
                    }
                    dalpha[e] = dot;
                    weighted += alpha[e] * dot;
                }
                for (auto e = lo; e < hi; ++e) {
                    const double dscore = alpha[e] * (dalpha[e] - weighted);
                    const auto zr = z.row(e);
                    auto dsu = ds.row(static_cast<std::size_t>(idx.src[e]));
                    auto dtv = dt.row(v);
                    for (std::size_t k = 0; k < head_dim_; ++k) {
                        const bool pos = zr[k] > 0.0;
                        da[k] += dscore * (pos ? zr[k] : kLeakySlope * zr[k]);
                        const double dz = dscore * a[k] * (pos ? 1.0 : kLeakySlope);
                        dsu[k] += dz;
                        dtv[k] += dz;
                    }
                }
            }
            add_in_place(w_src_[h].grad, matmul_tn(x, ds));
            add_in_place(w_dst_[h].grad, matmul_tn(x, dt));
            add_in_place(grad_x, matmul_nt(ds, w_src_[h].value));
            add_in_place(grad_x, matmul_nt(dt, w_dst_[h].value));
        }
        return grad_x;
    }

    void collect(std::vector<Param*>& out) {
        for (auto& p : w_src_) out.push_back(&p);
        for (auto& p : w_dst_) out.push_back(&p);
        out.push_back(&att_);
        out.push_back(&bias_);
    }

private:
    std::size_t in_dim_ = 0;
    std::size_t heads_ = 0;
    std::size_t head_dim_ = 0;
    std::vector<Param> w_src_;
    std::vector<Param> w_dst_;
    Param att_;
    Param bias_;
};

struct EncoderConfig {
    std::size_t in_dim = 0;
    std::size_t hidden = 128;
    std::size_t heads = 4;
    double dropout = 0.2;
};

struct ForwardTape {
    EdgeIndex index;
    GatLayerTape layer1;
    GatLayerTape layer2;
    Matrix pre1;          // layer-1 output before ReLU
    Matrix dropout_scale; // 0 or 1/(1-p) per entry; all ones in eval mode
    Matrix pre2;          // layer-2 output before ReLU
    Mode mode = Mode::eval;
};

class Encoder {
public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        if (cfg.in_dim == 0) throw std::invalid_argument("encoder input width must be positive");
        if (cfg.heads == 0 || cfg.hidden % cfg.heads != 0)
            throw std::invalid_argument("hidden size must be divisible by the number of heads");
        if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw std::invalid_argument("dropout must be in [0,1)");
        Rng rng(seed);
        layer1_ = GatLayer(cfg.in_dim, cfg.heads, cfg.hidden / cfg.heads, "encoder.layer1", rng);
        layer2_ = GatLayer(cfg.hidden, 1, cfg.hidden, "encoder.layer2", rng);
    }

    const EncoderConfig& config() const noexcept { return cfg_; }

    /// Node embeddings (N x hidden). The dropout mask is drawn from
    /// `rng_seed` in train mode, so a forward pass is reproducible.
    Matrix forward(const NodeGraph& g, Mode mode, std::uint64_t rng_seed, ForwardTape& tape) const {
        tape.index = EdgeIndex::build(g);
        tape.mode = mode;
        tape.pre1 = layer1_.forward(g.features, tape.index, tape.layer1);
        Matrix h1 = tape.pre1;
        tape.dropout_scale = Matrix(h1.rows(), h1.cols(), 1.0);
        if (mode == Mode::train && cfg_.dropout > 0.0) {
            Rng rng(rng_seed);
            const double keep = 1.0 / (1.0 - cfg_.dropout);
            for (auto& m : tape.dropout_scale.values()) m = rng.uniform() < cfg_.dropout ? 0.0 : keep;
        }
        auto hv = h1.values();
        const auto mv = tape.dropout_scale.values();
        for (std::size_t i = 0; i < hv.size(); ++i) hv[i] = std::max(hv[i], 0.0) * mv[i];
        tape.pre2 = layer2_.forward(h1, tape.index, tape.layer2);
        Matrix h2 = tape.pre2;
        for (auto& x : h2.values()) x = std::max(x, 0.0);
        return h2;
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. the
    /// input features.
    Matrix backward(const ForwardTape& tape, const Matrix& grad_embeddings) {
        if (!grad_embeddings.same_shape(tape.pre2)) throw std::invalid_argument("encoder backward: shape mismatch");
        Matrix g2 = grad_embeddings;
        {
            auto gv = g2.values();
            const auto pv = tape.pre2.values();
            for (std::size_t i = 0; i < gv.size(); ++i)
                if (!(pv[i] > 0.0)) gv[i] = 0.0;
        }
        Matrix g1 = layer2_.backward(tape.layer2, tape.index, g2);
        auto gv = g1.values();
        const auto pv = tape.pre1.values();
        const auto mv = tape.dropout_scale.values();
        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = pv[i] > 0.0 ? gv[i] * mv[i] : 0.0;
        return layer1_.backward(tape.layer1, tape.index, g1);
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        layer1_.collect(out);
        layer2_.collect(out);
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

private:
    EncoderConfig cfg_;
    GatLayer layer1_;
    GatLayer layer2_;
};

}  // namespace rsgnn

#endif  // RSGNN_ENCODER_HPP
