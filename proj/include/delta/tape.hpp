#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "delta/matrix.hpp"

namespace delta {

// Reverse-mode tape over dense matrices. Supports exactly the primitive set
// the two subnetworks need; no general graph compilation. A tape is built
// fresh for each training step and confined to one thread.
class GradTape {
public:
    using NodeId = std::size_t;

    NodeId leaf(DenseMatrix value) {
        return push(std::move(value), {});
    }

    const DenseMatrix& value(NodeId id) const { return nodes_[id].value; }
    const DenseMatrix& grad(NodeId id) const { return nodes_[id].grad; }

    NodeId matmul(NodeId a, NodeId b) {
        NodeId out = push(delta::matmul(value(a), value(b)), [this, a, b](NodeId o) {
            accumulate(a, matmul_a_bt(nodes_[o].grad, nodes_[b].value));
            accumulate(b, matmul_at_b(nodes_[a].value, nodes_[o].grad));
        });
        return out;
    }

    // Sparse operand is a fixed constant (graph operator); no gradient to it.
    NodeId spmm(const SparseCsr& a, NodeId b) {
        const SparseCsr* ap = &a;
        return push(delta::spmm_fast(a, value(b)), [this, ap, b](NodeId o) {
            accumulate(b, spmm_at_b(*ap, nodes_[o].grad));
        });
    }

    NodeId relu(NodeId a) {
        return push(delta::relu(value(a)), [this, a](NodeId o) {
            DenseMatrix g = nodes_[o].grad;
            const DenseMatrix& x = nodes_[a].value;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x.raw()[i] <= 0.0) g.raw()[i] = 0.0;
            accumulate(a, g);
        });
    }

    NodeId dropout(NodeId a, double p, std::uint64_t seed, std::uint64_t stream) {
        if (p == 0.0) return a;
        return push(delta::dropout(value(a), p, seed, stream), [this, a, p, seed, stream](NodeId o) {
            DenseMatrix g = nodes_[o].grad;
            const double scale = 1.0 / (1.0 - p);
            for (std::size_t i = 0; i < g.size(); ++i)
                g.raw()[i] = rng::uniform(seed, stream, i) < p ? 0.0 : g.raw()[i] * scale;
            accumulate(a, g);
        });
    }

    NodeId add(NodeId a, NodeId b) {
        if (!value(a).same_shape(value(b)))
            throw std::invalid_argument("tape add: shape mismatch");
        DenseMatrix v = value(a);
        for (std::size_t i = 0; i < v.size(); ++i) v.raw()[i] += value(b).raw()[i];
        return push(std::move(v), [this, a, b](NodeId o) {
            accumulate(a, nodes_[o].grad);
            accumulate(b, nodes_[o].grad);
        });
    }

    NodeId scale(NodeId a, double c) {
        DenseMatrix v = value(a);
        for (double& x : v.raw()) x *= c;
        return push(std::move(v), [this, a, c](NodeId o) {
            DenseMatrix g = nodes_[o].grad;
            for (double& x : g.raw()) x *= c;
            accumulate(a, g);
        });
    }

    // Identity forward; backward multiplies the incoming gradient by -1.
    // Placed between feature extractor and domain discriminator.
    NodeId grad_reverse(NodeId a) {
        return push(value(a), [this, a](NodeId o) {
            DenseMatrix g = nodes_[o].grad;
            for (double& x : g.raw()) x = -x;
            accumulate(a, g);
        });
    }

    // Scalar (1x1) node: mean NLL over masked rows.
    NodeId softmax_cross_entropy(NodeId logits, const std::vector<int>& labels,
                                 const std::vector<std::uint8_t>& mask) {
        CrossEntropyResult ce = delta::softmax_cross_entropy(value(logits), labels, mask);
        DenseMatrix local = ce.grad;
        return push(DenseMatrix(1, 1, {ce.loss}), [this, logits, local](NodeId o) {
            double g = nodes_[o].grad(0, 0);
            DenseMatrix gl = local;
            for (double& x : gl.raw()) x *= g;
            accumulate(logits, gl);
        });
    }

    // Scalar node: mean binary cross-entropy of sigmoid(logits) against a
    // constant domain label (1 = source, 0 = target). Numerically stable form.
    NodeId sigmoid_bce(NodeId logits, double target) {
        const DenseMatrix& x = value(logits);
        if (x.cols() != 1)
            throw std::invalid_argument("sigmoid_bce: expected column vector of logits");
        const double n = static_cast<double>(x.rows());
        long double loss = 0.0L;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            double v = x(i, 0);
            loss += std::max(v, 0.0) - v * target + std::log1p(std::exp(-std::abs(v)));
        }
        return push(DenseMatrix(1, 1, {static_cast<double>(loss / n)}),
                    [this, logits, target, n](NodeId o) {
            double g = nodes_[o].grad(0, 0);
            const DenseMatrix& xv = nodes_[logits].value;
            DenseMatrix gl(xv.rows(), 1);
            for (std::size_t i = 0; i < xv.rows(); ++i) {
                double s = 1.0 / (1.0 + std::exp(-xv(i, 0)));
                gl(i, 0) = g * (s - target) / n;
            }
            accumulate(logits, gl);
        });
    }

    // Application of the path-convolution operator to a dense input:
    // out = M^{-1/2} S M^{-1/2} h with S = sum_n exp(-E_n/T) A^n and
    // M = diag(S * 1); energies is a 1 x (L+1) node, powers[n] holds A^n
    // (A^0 = I). The dense V x V operator is never formed: forward and
    // backward each run one sparse pass per power, and d loss / d E_n
    // reduces to row-wise dot products, which removes the dense
    // dP = g h^T product a materialized operator would need.
    // rowsums[n][i] must hold the i-th row sum of powers[n].
    NodeId pan_apply(NodeId energies, NodeId h, const std::vector<SparseCsr>& powers,
                     const std::vector<std::vector<double>>& rowsums, double temperature) {
        const DenseMatrix& e = value(energies);
        if (e.rows() != 1 || e.cols() != powers.size())
            throw std::invalid_argument("pan_apply: energies must be 1 x (L+1)");
        const std::size_t n_nodes = powers[0].rows();
        const DenseMatrix& hv = value(h);
        if (hv.rows() != n_nodes)
            throw std::invalid_argument("pan_apply: input rows != operator size");
        const std::size_t np = powers.size();
        const std::size_t cols = hv.cols();

        struct State {
            std::vector<double> w, alpha;
            std::vector<DenseMatrix> y; // y[n] = A^n (alpha ∘ h)
            DenseMatrix u;              // S (alpha ∘ h)
        };
        auto st = std::make_shared<State>();
        st->w.resize(np);
        for (std::size_t n = 0; n < np; ++n)
            st->w[n] = std::exp(-e(0, n) / temperature);
        st->alpha.resize(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            double m = 0.0;
            for (std::size_t n = 0; n < np; ++n) m += st->w[n] * rowsums[n][i];
            if (m <= 0.0)
                throw std::logic_error("pan_apply: nonpositive row sum (requires w_0 > 0)");
            st->alpha[i] = 1.0 / std::sqrt(m);
        }

        DenseMatrix halpha = hv;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            double* row = halpha.raw().data() + i * cols;
            for (std::size_t c = 0; c < cols; ++c) row[c] *= st->alpha[i];
        }
        st->u = DenseMatrix(n_nodes, cols);
        st->y.reserve(np);
        for (std::size_t n = 0; n < np; ++n) {
            st->y.push_back(spmm_fast(powers[n], halpha));
            const double wn = st->w[n];
            const double* src = st->y.back().raw().data();
            double* dst = st->u.raw().data();
            for (std::size_t i = 0; i < n_nodes * cols; ++i) dst[i] += wn * src[i];
        }
        DenseMatrix out = st->u;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            double* row = out.raw().data() + i * cols;
            for (std::size_t c = 0; c < cols; ++c) row[c] *= st->alpha[i];
        }

        const std::vector<SparseCsr>* pw = &powers;
        const std::vector<std::vector<double>>* rs = &rowsums;
        return push(std::move(out),
                    [this, energies, h, pw, rs, temperature, st, n_nodes, cols, np](NodeId o) {
            const DenseMatrix& g = nodes_[o].grad;
            const DenseMatrix& hv = nodes_[h].value;
            const auto& alpha = st->alpha;

            DenseMatrix galpha = g;
            for (std::size_t i = 0; i < n_nodes; ++i) {
                double* row = galpha.raw().data() + i * cols;
                for (std::size_t c = 0; c < cols; ++c) row[c] *= alpha[i];
            }
            // v = S^T (alpha ∘ g); dh = alpha ∘ v
            DenseMatrix v(n_nodes, cols);
            for (std::size_t n = 0; n < np; ++n) {
                DenseMatrix vn = spmm_at_b((*pw)[n], galpha);
                const double wn = st->w[n];
                const double* src = vn.raw().data();
                double* dst = v.raw().data();
                for (std::size_t i = 0; i < n_nodes * cols; ++i) dst[i] += wn * src[i];
            }
            DenseMatrix dh = v;
            for (std::size_t i = 0; i < n_nodes; ++i) {
                double* row = dh.raw().data() + i * cols;
                for (std::size_t c = 0; c < cols; ++c) row[c] *= alpha[i];
            }
            accumulate(h, dh);

            // d loss / d w_n splits into the direct S term and the two
            // alpha-sensitivity terms (rows scale out by alpha_i, input by
            // alpha_j).
            DenseMatrix ge(1, np);
            for (std::size_t n = 0; n < np; ++n) {
                double t1 = 0.0, t2 = 0.0, t3 = 0.0;
                const double* yrow = st->y[n].raw().data();
                const double* grow = g.raw().data();
                const double* urow = st->u.raw().data();
                const double* hrow = hv.raw().data();
                const double* vrow = v.raw().data();
                for (std::size_t i = 0; i < n_nodes; ++i) {
                    double gy = 0.0, gu = 0.0, hvdot = 0.0;
                    const std::size_t base = i * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        gy += grow[base + c] * yrow[base + c];
                        gu += grow[base + c] * urow[base + c];
                        hvdot += hrow[base + c] * vrow[base + c];
                    }
                    const double dalpha = -0.5 * alpha[i] * alpha[i] * alpha[i] * (*rs)[n][i];
                    t1 += alpha[i] * gy;
                    t2 += dalpha * gu;
                    t3 += dalpha * hvdot;
                }
                ge(0, n) = (t1 + t2 + t3) * (-st->w[n] / temperature);
            }
            accumulate(energies, ge);
        });
    }

    // Seed the root with gradient 1 and replay the tape backward.
    void backward(NodeId root) {
        if (nodes_.empty())
            throw std::logic_error("backward: empty tape");
        if (value(root).rows() != 1 || value(root).cols() != 1)
            throw std::invalid_argument("backward: root must be scalar");
        for (auto& n : nodes_)
            n.grad = DenseMatrix(n.value.rows(), n.value.cols());
        nodes_[root].grad(0, 0) = 1.0;
        for (std::size_t i = root + 1; i-- > 0;)
            if (nodes_[i].backprop) nodes_[i].backprop(i);
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        DenseMatrix value;
        DenseMatrix grad;
        std::function<void(NodeId)> backprop;
    };

    NodeId push(DenseMatrix v, std::function<void(NodeId)> bp) {
        nodes_.push_back(Node{std::move(v), {}, std::move(bp)});
        return nodes_.size() - 1;
    }

    void accumulate(NodeId id, const DenseMatrix& g) {
        DenseMatrix& dst = nodes_[id].grad;
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst.raw()[i] += g.raw()[i];
    }

    std::vector<Node> nodes_;
};

} // namespace delta
