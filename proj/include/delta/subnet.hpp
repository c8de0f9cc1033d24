#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "delta/graph.hpp"
#include "delta/matrix.hpp"
#include "delta/rng.hpp"
#include "delta/tape.hpp"

namespace delta {

struct TrainConfig {
    std::size_t epochs = 200;
    double learning_rate = 0.001;
    double weight_decay = 1e-4;
    std::size_t hidden = 512;
    std::size_t out = 256;
    double dropout = 0.1;
    double lambda_da = 1.0;      // weight of the adversarial alignment term
    std::size_t path_len = 3;    // L, max adjacency power
    double temperature = 1.0;    // fixed T in the path weights exp(-E_n/T)
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: negative learning rate");
        if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: negative weight decay");
        if (hidden == 0 || out == 0) throw std::invalid_argument("TrainConfig: zero layer size");
        if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("TrainConfig: dropout outside [0,1)");
        if (lambda_da < 0.0) throw std::invalid_argument("TrainConfig: negative lambda");
        if (temperature <= 0.0) throw std::invalid_argument("TrainConfig: temperature must be positive");
    }
};

// Message-passing subnetwork: two GCN layers plus a linear classifier.
struct EdgeSubnet {
    DenseMatrix w0;   // F x hidden
    DenseMatrix w1;   // hidden x out
    DenseMatrix clf;  // out x C
    double dropout = 0.0;
};

// Path-convolution subnetwork: two layers over a weighted sum of adjacency
// powers, with learnable per-length energies.
struct PathSubnet {
    DenseMatrix w0;
    DenseMatrix w1;
    DenseMatrix clf;
    DenseMatrix energies;     // 1 x (L+1)
    double temperature = 1.0;
    std::size_t path_len = 3;
    double dropout = 0.0;

    std::vector<double> path_weights() const {
        std::vector<double> w(energies.cols());
        for (std::size_t n = 0; n < w.size(); ++n)
            w[n] = std::exp(-energies(0, n) / temperature);
        return w;
    }
};

// Linear domain discriminator on embeddings, behind a gradient-reversal hop.
struct Discriminator {
    DenseMatrix w;    // out x 1
};

struct DualLogits {
    DenseMatrix edge; // V x C
    DenseMatrix path; // V x C
};

struct TraceRow {
    std::size_t epoch = 0;
    double l_sup = 0.0;
    double l_da = 0.0;
    double total = 0.0;
};

struct DualNets {
    EdgeSubnet edge;
    PathSubnet path;
    Discriminator edge_disc;
    Discriminator path_disc;
    std::vector<TraceRow> edge_trace;
    std::vector<TraceRow> path_trace;
};

namespace detail {

inline DenseMatrix glorot(std::size_t rows, std::size_t cols,
                          std::uint64_t seed, std::uint64_t stream) {
    DenseMatrix m(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (std::size_t i = 0; i < m.size(); ++i)
        m.raw()[i] = (2.0 * rng::uniform(seed, stream, i) - 1.0) * limit;
    return m;
}

// Decoupled-weight-decay Adam, one state per parameter matrix.
struct AdamState {
    DenseMatrix m, v;
};

inline void adamw_step(DenseMatrix& param, const DenseMatrix& grad, AdamState& st,
                       std::size_t t, double lr, double wd,
                       double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (st.m.size() == 0) {
        st.m = DenseMatrix(param.rows(), param.cols());
        st.v = DenseMatrix(param.rows(), param.cols());
    }
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = grad.raw()[i];
        st.m.raw()[i] = beta1 * st.m.raw()[i] + (1.0 - beta1) * g;
        st.v.raw()[i] = beta2 * st.v.raw()[i] + (1.0 - beta2) * g * g;
        double mhat = st.m.raw()[i] / bc1;
        double vhat = st.v.raw()[i] / bc2;
        param.raw()[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * param.raw()[i]);
    }
}

// Dropout stream ids; graph_tag 0 = source, 1 = target.
inline std::uint64_t dropout_stream(std::size_t epoch, int graph_tag) {
    return rng::splitmix64(epoch * 2 + static_cast<std::uint64_t>(graph_tag) + 0x517cc1b727220a95ULL);
}

} // namespace detail

// Structural pieces that depend only on the graph, precomputed once.
struct GraphOperators {
    SparseCsr gcn;
    std::vector<SparseCsr> powers;
    std::vector<std::vector<double>> power_rowsums;

    GraphOperators() = default;
    GraphOperators(const Graph& g, std::size_t path_len)
        : gcn(normalized_gcn_operator(g)), powers(adjacency_powers(g, path_len)) {
        power_rowsums.resize(powers.size());
        for (std::size_t n = 0; n < powers.size(); ++n) {
            const auto& rp = powers[n].row_ptr();
            const auto& vv = powers[n].values();
            power_rowsums[n].assign(powers[n].rows(), 0.0);
            for (std::size_t i = 0; i < powers[n].rows(); ++i)
                for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
                    power_rowsums[n][i] += vv[k];
        }
    }
};

// Eval-mode forward passes (no dropout, no tape).

inline std::pair<DenseMatrix, DenseMatrix> forward_edge(const EdgeSubnet& net, const Graph& g,
                                                        const SparseCsr& op) {
    if (g.features.cols() != net.w0.rows())
        throw std::invalid_argument("forward_edge: feature width != W0 rows");
    DenseMatrix h1 = relu(spmm(op, matmul(g.features, net.w0)));
    DenseMatrix z = matmul(spmm(op, h1), net.w1);
    DenseMatrix logits = matmul(z, net.clf);
    return {std::move(z), std::move(logits)};
}

inline std::pair<DenseMatrix, DenseMatrix> forward_edge(const EdgeSubnet& net, const Graph& g) {
    return forward_edge(net, g, normalized_gcn_operator(g));
}

inline std::pair<DenseMatrix, DenseMatrix> forward_path(const PathSubnet& net, const Graph& g,
                                                        const std::vector<SparseCsr>& powers) {
    if (g.features.cols() != net.w0.rows())
        throw std::invalid_argument("forward_path: feature width != W0 rows");
    // weighted sparse operator from the current energies
    std::vector<double> w = net.path_weights();
    std::vector<std::size_t> ri, ci;
    std::vector<double> vals;
    const std::size_t n = powers[0].rows();
    for (std::size_t pn = 0; pn < powers.size(); ++pn)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = powers[pn].row_ptr()[i]; k < powers[pn].row_ptr()[i + 1]; ++k) {
                ri.push_back(i);
                ci.push_back(powers[pn].col_idx()[k]);
                vals.push_back(w[pn] * powers[pn].values()[k]);
            }
    SparseCsr s = SparseCsr::from_triplets(n, n, std::move(ri), std::move(ci), std::move(vals));
    std::vector<double> alpha(n);
    std::vector<double> terms;
    for (std::size_t i = 0; i < n; ++i) {
        terms.assign(s.values().begin() + static_cast<std::ptrdiff_t>(s.row_ptr()[i]),
                     s.values().begin() + static_cast<std::ptrdiff_t>(s.row_ptr()[i + 1]));
        alpha[i] = 1.0 / std::sqrt(canonical_sum(terms));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = s.row_ptr()[i]; k < s.row_ptr()[i + 1]; ++k)
            s.values()[k] *= alpha[i] * alpha[s.col_idx()[k]];

    DenseMatrix h1 = relu(spmm(s, matmul(g.features, net.w0)));
    DenseMatrix z = relu(spmm(s, matmul(h1, net.w1)));
    DenseMatrix logits = matmul(z, net.clf);
    return {std::move(z), std::move(logits)};
}

inline std::pair<DenseMatrix, DenseMatrix> forward_path(const PathSubnet& net, const Graph& g) {
    return forward_path(net, g, adjacency_powers(g, net.path_len));
}

// One supervised + adversarial loss evaluation for either subnetwork,
// optionally with gradients. Shared by the trainer and the gradient tests.

struct EdgeStepResult {
    double l_sup = 0.0, l_da = 0.0, total = 0.0;
    DenseMatrix g_w0, g_w1, g_clf, g_disc;
};

struct PathStepResult {
    double l_sup = 0.0, l_da = 0.0, total = 0.0;
    DenseMatrix g_w0, g_w1, g_clf, g_disc, g_energies;
};

namespace detail {

struct ForwardNodes {
    GradTape::NodeId emb;
    GradTape::NodeId logits;
};

inline ForwardNodes tape_forward_edge(GradTape& tape, const Graph& g, const SparseCsr& op,
                                      GradTape::NodeId x, GradTape::NodeId w0,
                                      GradTape::NodeId w1, GradTape::NodeId clf,
                                      double dropout_p, bool training,
                                      std::uint64_t seed, std::uint64_t stream) {
    (void)g;
    auto h1 = tape.relu(tape.spmm(op, tape.matmul(x, w0)));
    if (training && dropout_p > 0.0) h1 = tape.dropout(h1, dropout_p, seed, stream);
    auto z = tape.matmul(tape.spmm(op, h1), w1);
    return {z, tape.matmul(z, clf)};
}

inline ForwardNodes tape_forward_path(GradTape& tape, const SparseCsr* /*unused*/,
                                      GradTape::NodeId x, GradTape::NodeId w0,
                                      GradTape::NodeId w1, GradTape::NodeId clf,
                                      GradTape::NodeId energies,
                                      const GraphOperators& ops, double temperature,
                                      double dropout_p, bool training,
                                      std::uint64_t seed, std::uint64_t stream) {
    auto h1 = tape.relu(tape.pan_apply(energies, tape.matmul(x, w0), ops.powers,
                                       ops.power_rowsums, temperature));
    if (training && dropout_p > 0.0) h1 = tape.dropout(h1, dropout_p, seed, stream);
    auto z = tape.relu(tape.pan_apply(energies, tape.matmul(h1, w1), ops.powers,
                                      ops.power_rowsums, temperature));
    return {z, tape.matmul(z, clf)};
}

// Assembles L_Sup + lambda * L_DA on the tape. The domain term runs the
// embeddings through a gradient-reversal hop before the discriminator, so a
// single backward pass trains the discriminator to classify domains while
// pushing the extractor the other way.
struct LossNodes {
    GradTape::NodeId l_sup;
    GradTape::NodeId l_da;
    GradTape::NodeId total;
    double l_da_value = 0.0;
};

inline LossNodes assemble_loss(GradTape& tape, const Graph& src, const Graph& tgt,
                               ForwardNodes fs, ForwardNodes ft,
                               GradTape::NodeId disc, double lambda_da) {
    auto l_sup = tape.softmax_cross_entropy(fs.logits, src.labels, src.labeled_mask);
    bool target_supervised = false;
    for (auto m : tgt.labeled_mask)
        if (m) { target_supervised = true; break; }
    if (target_supervised)
        l_sup = tape.add(l_sup, tape.softmax_cross_entropy(ft.logits, tgt.labels, tgt.labeled_mask));

    auto bce_s = tape.sigmoid_bce(tape.matmul(tape.grad_reverse(fs.emb), disc), 1.0);
    auto bce_t = tape.sigmoid_bce(tape.matmul(tape.grad_reverse(ft.emb), disc), 0.0);
    auto l_da = tape.add(bce_s, bce_t);

    auto total = lambda_da > 0.0 ? tape.add(l_sup, tape.scale(l_da, lambda_da)) : l_sup;
    return {l_sup, l_da, total, tape.value(l_da)(0, 0)};
}

} // namespace detail

inline EdgeStepResult edge_step(const EdgeSubnet& net, const Discriminator& disc,
                                const Graph& src, const GraphOperators& ops_s,
                                const Graph& tgt, const GraphOperators& ops_t,
                                const TrainConfig& cfg, std::size_t epoch,
                                bool training, bool with_grads) {
    GradTape tape;
    auto x_s = tape.leaf(src.features);
    auto x_t = tape.leaf(tgt.features);
    auto w0 = tape.leaf(net.w0);
    auto w1 = tape.leaf(net.w1);
    auto clf = tape.leaf(net.clf);
    auto dw = tape.leaf(disc.w);
    std::uint64_t seed = rng::splitmix64(cfg.seed ^ 0xedbe11edULL);
    auto fs = detail::tape_forward_edge(tape, src, ops_s.gcn, x_s, w0, w1, clf,
                                        cfg.dropout, training, seed,
                                        detail::dropout_stream(epoch, 0));
    auto ft = detail::tape_forward_edge(tape, tgt, ops_t.gcn, x_t, w0, w1, clf,
                                        cfg.dropout, training, seed,
                                        detail::dropout_stream(epoch, 1));
    auto loss = detail::assemble_loss(tape, src, tgt, fs, ft, dw, cfg.lambda_da);

    EdgeStepResult r;
    r.l_sup = tape.value(loss.l_sup)(0, 0);
    r.l_da = loss.l_da_value;
    r.total = tape.value(loss.total)(0, 0);
    if (with_grads) {
        tape.backward(loss.total);
        r.g_w0 = tape.grad(w0);
        r.g_w1 = tape.grad(w1);
        r.g_clf = tape.grad(clf);
        r.g_disc = tape.grad(dw);
    }
    return r;
}

inline PathStepResult path_step(const PathSubnet& net, const Discriminator& disc,
                                const Graph& src, const GraphOperators& ops_s,
                                const Graph& tgt, const GraphOperators& ops_t,
                                const TrainConfig& cfg, std::size_t epoch,
                                bool training, bool with_grads) {
    GradTape tape;
    auto x_s = tape.leaf(src.features);
    auto x_t = tape.leaf(tgt.features);
    auto w0 = tape.leaf(net.w0);
    auto w1 = tape.leaf(net.w1);
    auto clf = tape.leaf(net.clf);
    auto en = tape.leaf(net.energies);
    auto dw = tape.leaf(disc.w);
    std::uint64_t seed = rng::splitmix64(cfg.seed ^ 0x9a7150b3ULL);
    auto fs = detail::tape_forward_path(tape, nullptr, x_s, w0, w1, clf, en,
                                        ops_s, net.temperature,
                                        cfg.dropout, training, seed,
                                        detail::dropout_stream(epoch, 0));
    auto ft = detail::tape_forward_path(tape, nullptr, x_t, w0, w1, clf, en,
                                        ops_t, net.temperature,
                                        cfg.dropout, training, seed,
                                        detail::dropout_stream(epoch, 1));
    auto loss = detail::assemble_loss(tape, src, tgt, fs, ft, dw, cfg.lambda_da);

    PathStepResult r;
    r.l_sup = tape.value(loss.l_sup)(0, 0);
    r.l_da = loss.l_da_value;
    r.total = tape.value(loss.total)(0, 0);
    if (with_grads) {
        tape.backward(loss.total);
        r.g_w0 = tape.grad(w0);
        r.g_w1 = tape.grad(w1);
        r.g_clf = tape.grad(clf);
        r.g_disc = tape.grad(dw);
        r.g_energies = tape.grad(en);
    }
    return r;
}

namespace detail {

inline void check_finite_or_abort(const DenseMatrix& m, const char* what,
                                  const std::vector<TraceRow>& trace) {
    if (m.all_finite()) return;
    std::ostringstream os;
    os << "NaN/Inf in " << what << " after " << trace.size() << " epochs; trace tail:";
    std::size_t start = trace.size() > 5 ? trace.size() - 5 : 0;
    for (std::size_t i = start; i < trace.size(); ++i)
        os << " [" << trace[i].epoch << ": sup=" << trace[i].l_sup
           << " da=" << trace[i].l_da << " total=" << trace[i].total << "]";
    throw std::runtime_error(os.str());
}

} // namespace detail

inline EdgeSubnet make_edge_subnet(std::size_t num_feats, std::size_t num_classes,
                                   const TrainConfig& cfg) {
    EdgeSubnet net;
    std::uint64_t s = rng::splitmix64(cfg.seed ^ 0xe0e0e0e0ULL);
    net.w0 = detail::glorot(num_feats, cfg.hidden, s, 0);
    net.w1 = detail::glorot(cfg.hidden, cfg.out, s, 1);
    net.clf = detail::glorot(cfg.out, num_classes, s, 2);
    net.dropout = cfg.dropout;
    return net;
}

inline PathSubnet make_path_subnet(std::size_t num_feats, std::size_t num_classes,
                                   const TrainConfig& cfg) {
    PathSubnet net;
    std::uint64_t s = rng::splitmix64(cfg.seed ^ 0x9a9a9a9aULL);
    net.w0 = detail::glorot(num_feats, cfg.hidden, s, 0);
    net.w1 = detail::glorot(cfg.hidden, cfg.out, s, 1);
    net.clf = detail::glorot(cfg.out, num_classes, s, 2);
    net.energies = DenseMatrix(1, cfg.path_len + 1); // uniform path weights at start
    net.temperature = cfg.temperature;
    net.path_len = cfg.path_len;
    net.dropout = cfg.dropout;
    return net;
}

inline Discriminator make_discriminator(const TrainConfig& cfg, std::uint64_t tag) {
    Discriminator d;
    d.w = detail::glorot(cfg.out, 1, rng::splitmix64(cfg.seed ^ tag), 3);
    return d;
}

// Full-batch training of both subnetworks, each with its own discriminator.
// Deterministic for a fixed cfg.seed. Callers retraining on the same graph
// pair can pass precomputed operators to skip rebuilding the power series.
inline DualNets train_dual(const Graph& source, const Graph& target, const TrainConfig& cfg,
                           const GraphOperators* pre_s = nullptr,
                           const GraphOperators* pre_t = nullptr) {
    cfg.validate();
    if (source.features.cols() != target.features.cols())
        throw std::invalid_argument("train_dual: feature dimensions differ across graphs");
    if (source.num_classes != target.num_classes && target.num_classes != 0)
        throw std::invalid_argument("train_dual: class counts differ across graphs");
    bool any_labeled = false;
    for (auto m : source.labeled_mask)
        if (m) { any_labeled = true; break; }
    if (!any_labeled)
        throw std::invalid_argument("train_dual: no labeled source nodes");

    const std::size_t num_feats = source.features.cols();
    const std::size_t num_classes = static_cast<std::size_t>(source.num_classes);

    GraphOperators local_s = pre_s ? GraphOperators() : GraphOperators(source, cfg.path_len);
    GraphOperators local_t = pre_t ? GraphOperators() : GraphOperators(target, cfg.path_len);
    const GraphOperators& ops_s = pre_s ? *pre_s : local_s;
    const GraphOperators& ops_t = pre_t ? *pre_t : local_t;

    DualNets nets;
    nets.edge = make_edge_subnet(num_feats, num_classes, cfg);
    nets.path = make_path_subnet(num_feats, num_classes, cfg);
    nets.edge_disc = make_discriminator(cfg, 0xd15c0001ULL);
    nets.path_disc = make_discriminator(cfg, 0xd15c0002ULL);
    // edge subnetwork
    {
        detail::AdamState s_w0, s_w1, s_clf, s_disc;
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            EdgeStepResult r = edge_step(nets.edge, nets.edge_disc, source, ops_s,
                                         target, ops_t, cfg, epoch, true, true);
            if (!std::isfinite(r.total))
                detail::check_finite_or_abort(DenseMatrix(1, 1, {r.total}),
                                              "edge loss", nets.edge_trace);
            std::size_t t = epoch + 1;
            detail::adamw_step(nets.edge.w0, r.g_w0, s_w0, t, cfg.learning_rate, cfg.weight_decay);
            detail::adamw_step(nets.edge.w1, r.g_w1, s_w1, t, cfg.learning_rate, cfg.weight_decay);
            detail::adamw_step(nets.edge.clf, r.g_clf, s_clf, t, cfg.learning_rate, cfg.weight_decay);
            detail::adamw_step(nets.edge_disc.w, r.g_disc, s_disc, t, cfg.learning_rate, cfg.weight_decay);
            detail::check_finite_or_abort(nets.edge.w0, "edge W0", nets.edge_trace);
            detail::check_finite_or_abort(nets.edge.w1, "edge W1", nets.edge_trace);
            nets.edge_trace.push_back({epoch, r.l_sup, r.l_da, r.total});
        }
    }
    // path subnetwork
    {
        detail::AdamState s_w0, s_w1, s_clf, s_disc, s_en;
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            PathStepResult r = path_step(nets.path, nets.path_disc, source, ops_s,
                                         target, ops_t, cfg, epoch, true, true);
            if (!std::isfinite(r.total))
                detail::check_finite_or_abort(DenseMatrix(1, 1, {r.total}),
                                              "path loss", nets.path_trace);
            std::size_t t = epoch + 1;
            detail::adamw_step(nets.path.w0, r.g_w0, s_w0, t, cfg.learning_rate, cfg.weight_decay);
            detail::adamw_step(nets.path.w1, r.g_w1, s_w1, t, cfg.learning_rate, cfg.weight_decay);
            detail::adamw_step(nets.path.clf, r.g_clf, s_clf, t, cfg.learning_rate, cfg.weight_decay);
            detail::adamw_step(nets.path.energies, r.g_energies, s_en, t, cfg.learning_rate, 0.0);
            detail::adamw_step(nets.path_disc.w, r.g_disc, s_disc, t, cfg.learning_rate, cfg.weight_decay);
            detail::check_finite_or_abort(nets.path.w0, "path W0", nets.path_trace);
            detail::check_finite_or_abort(nets.path.energies, "path energies", nets.path_trace);
            nets.path_trace.push_back({epoch, r.l_sup, r.l_da, r.total});
        }
    }
    return nets;
}

// Evaluation-mode logits on the target graph from both subnetworks.
inline DualLogits target_logits(const DualNets& nets, const Graph& target,
                                const GraphOperators& ops) {
    DualLogits out;
    out.edge = forward_edge(nets.edge, target, ops.gcn).second;
    out.path = forward_path(nets.path, target, ops.powers).second;
    return out;
}

inline DualLogits target_logits(const DualNets& nets, const Graph& target) {
    return target_logits(nets, target, GraphOperators(target, nets.path.path_len));
}

inline void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& os) {
    os << "epoch,l_sup,l_da,total\n";
    os.precision(17);
    for (const auto& r : trace)
        os << r.epoch << "," << r.l_sup << "," << r.l_da << "," << r.total << "\n";
}

// Checkpoint: structured text with hexfloat values, bit-exact round trip.

namespace detail {

inline void write_matrix(std::ostream& os, const std::string& name, const DenseMatrix& m) {
    os << "matrix " << name << " " << m.rows() << " " << m.cols() << "\n";
    os << std::hexfloat;
    for (std::size_t i = 0; i < m.size(); ++i)
        os << m.raw()[i] << (i + 1 == m.size() ? "" : " ");
    os << std::defaultfloat << "\n";
}

inline DenseMatrix read_matrix(std::istream& is, const std::string& expect_name) {
    std::string kw, name;
    std::size_t rows, cols;
    if (!(is >> kw >> name >> rows >> cols) || kw != "matrix" || name != expect_name)
        throw std::runtime_error("checkpoint: expected matrix " + expect_name);
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::string tok;
        if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated matrix " + expect_name);
        m.raw()[i] = std::strtod(tok.c_str(), nullptr);
    }
    return m;
}

} // namespace detail

inline void save_checkpoint(const DualNets& nets, const TrainConfig& cfg, std::ostream& os) {
    os << "delta-checkpoint 1\n";
    os << std::hexfloat;
    os << "config epochs " << cfg.epochs << " lr " << cfg.learning_rate
       << " wd " << cfg.weight_decay << " hidden " << cfg.hidden << " out " << cfg.out
       << " dropout " << cfg.dropout << " lambda " << cfg.lambda_da
       << " path_len " << cfg.path_len << " temperature " << cfg.temperature
       << " seed " << cfg.seed << "\n";
    os << std::defaultfloat;
    detail::write_matrix(os, "edge.w0", nets.edge.w0);
    detail::write_matrix(os, "edge.w1", nets.edge.w1);
    detail::write_matrix(os, "edge.clf", nets.edge.clf);
    detail::write_matrix(os, "path.w0", nets.path.w0);
    detail::write_matrix(os, "path.w1", nets.path.w1);
    detail::write_matrix(os, "path.clf", nets.path.clf);
    detail::write_matrix(os, "path.energies", nets.path.energies);
    detail::write_matrix(os, "edge_disc.w", nets.edge_disc.w);
    detail::write_matrix(os, "path_disc.w", nets.path_disc.w);
}

inline std::pair<DualNets, TrainConfig> load_checkpoint(std::istream& is) {
    std::string magic;
    int version;
    if (!(is >> magic >> version) || magic != "delta-checkpoint" || version != 1)
        throw std::runtime_error("checkpoint: bad header");
    TrainConfig cfg;
    std::string kw, tok;
    auto expect = [&](const char* key) {
        if (!(is >> kw >> tok) || kw != key)
            throw std::runtime_error(std::string("checkpoint: expected key ") + key);
        return tok;
    };
    if (!(is >> kw) || kw != "config") throw std::runtime_error("checkpoint: expected config");
    cfg.epochs = std::stoull(expect("epochs"));
    cfg.learning_rate = std::strtod(expect("lr").c_str(), nullptr);
    cfg.weight_decay = std::strtod(expect("wd").c_str(), nullptr);
    cfg.hidden = std::stoull(expect("hidden"));
    cfg.out = std::stoull(expect("out"));
    cfg.dropout = std::strtod(expect("dropout").c_str(), nullptr);
    cfg.lambda_da = std::strtod(expect("lambda").c_str(), nullptr);
    cfg.path_len = std::stoull(expect("path_len"));
    cfg.temperature = std::strtod(expect("temperature").c_str(), nullptr);
    cfg.seed = std::stoull(expect("seed"));

    DualNets nets;
    nets.edge.w0 = detail::read_matrix(is, "edge.w0");
    nets.edge.w1 = detail::read_matrix(is, "edge.w1");
    nets.edge.clf = detail::read_matrix(is, "edge.clf");
    nets.edge.dropout = cfg.dropout;
    nets.path.w0 = detail::read_matrix(is, "path.w0");
    nets.path.w1 = detail::read_matrix(is, "path.w1");
    nets.path.clf = detail::read_matrix(is, "path.clf");
    nets.path.energies = detail::read_matrix(is, "path.energies");
    nets.path.temperature = cfg.temperature;
    nets.path.path_len = cfg.path_len;
    nets.path.dropout = cfg.dropout;
    nets.edge_disc.w = detail::read_matrix(is, "edge_disc.w");
    nets.path_disc.w = detail::read_matrix(is, "path_disc.w");
    return {std::move(nets), cfg};
}

} // namespace delta
