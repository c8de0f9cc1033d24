#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "delta/matrix.hpp"

namespace delta {

// Immutable attributed graph. Adjacency is symmetric with no stored
// self-loops; labels use -1 for "unlabeled".
struct Graph {
    std::size_t num_nodes = 0;
    SparseCsr adjacency;
    DenseMatrix features;
    std::vector<int> labels;
    std::vector<std::uint8_t> labeled_mask;
    int num_classes = 0;

    std::size_t undirected_edge_count() const { return adjacency.nnz() / 2; }
};

struct KHopSubgraph {
    std::size_t center = 0;
    std::size_t radius = 0;
    std::vector<std::size_t> members; // sorted, includes center
};

// Symmetrize, dedup, drop self-loops; adjacency values are all 1.
inline SparseCsr build_adjacency(std::size_t num_nodes,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<std::pair<std::size_t, std::size_t>> sym;
    sym.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
        if (u >= num_nodes || v >= num_nodes)
            throw std::invalid_argument("build_adjacency: node id out of range");
        if (u == v) continue;
        sym.emplace_back(u, v);
        sym.emplace_back(v, u);
    }
    std::sort(sym.begin(), sym.end());
    sym.erase(std::unique(sym.begin(), sym.end()), sym.end());
    std::vector<std::size_t> rp(num_nodes + 1, 0), ci;
    ci.reserve(sym.size());
    for (auto [u, v] : sym) {
        rp[u + 1]++;
        ci.push_back(v);
    }
    for (std::size_t i = 0; i < num_nodes; ++i) rp[i + 1] += rp[i];
    return SparseCsr(num_nodes, num_nodes, std::move(rp), std::move(ci),
                     std::vector<double>(sym.size(), 1.0));
}

namespace detail {

inline std::ifstream open_or_throw(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    return f;
}

} // namespace detail

// Edge list: one "u v" pair per line, '#' comments ignored. Features: CSV of
// reals, row i = node i. Labels: one class index per line, -1 = unlabeled.
// Mask: one 0/1 per line.
inline Graph load_graph(const std::string& edge_path, const std::string& feature_path,
                        const std::string& label_path, const std::string& mask_path) {
    // features first: they fix the node count
    std::vector<double> feat_data;
    std::size_t num_nodes = 0, num_feats = 0;
    {
        auto f = detail::open_or_throw(feature_path);
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            std::size_t count = 0;
            while (std::getline(ss, cell, ',')) {
                feat_data.push_back(std::stod(cell));
                ++count;
            }
            if (num_nodes == 0) num_feats = count;
            else if (count != num_feats)
                throw std::runtime_error("feature file: non-rectangular rows in " + feature_path);
            ++num_nodes;
        }
        if (num_nodes == 0) throw std::runtime_error("feature file empty: " + feature_path);
    }

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    {
        auto f = detail::open_or_throw(edge_path);
        std::string line;
        while (std::getline(f, line)) {
            auto pos = line.find('#');
            if (pos != std::string::npos) line.erase(pos);
            std::stringstream ss(line);
            long long u, v;
            if (!(ss >> u)) continue;
            if (!(ss >> v)) throw std::runtime_error("edge file: malformed line in " + edge_path);
            if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= num_nodes ||
                static_cast<std::size_t>(v) >= num_nodes)
                throw std::runtime_error("edge file: node id out of range in " + edge_path);
            edges.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
        }
    }

    std::vector<int> labels;
    {
        auto f = detail::open_or_throw(label_path);
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            labels.push_back(std::stoi(line));
        }
    }
    std::vector<std::uint8_t> mask;
    {
        auto f = detail::open_or_throw(mask_path);
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            int v = std::stoi(line);
            if (v != 0 && v != 1) throw std::runtime_error("mask file: entries must be 0 or 1");
            mask.push_back(static_cast<std::uint8_t>(v));
        }
    }
    if (labels.size() != num_nodes || mask.size() != num_nodes)
        throw std::runtime_error("label/mask length mismatch with feature rows");
    int num_classes = 0;
    for (std::size_t i = 0; i < num_nodes; ++i) {
        if (labels[i] < -1) throw std::runtime_error("label file: invalid class index");
        if (mask[i] && labels[i] < 0)
            throw std::runtime_error("mask file: labeled node has label -1");
        num_classes = std::max(num_classes, labels[i] + 1);
    }

    Graph g;
    g.num_nodes = num_nodes;
    g.adjacency = build_adjacency(num_nodes, edges);
    g.features = DenseMatrix(num_nodes, num_feats, std::move(feat_data));
    g.labels = std::move(labels);
    g.labeled_mask = std::move(mask);
    g.num_classes = num_classes;
    return g;
}

// Raw neighbor counts, no self-loops.
inline std::vector<std::size_t> degrees(const Graph& g) {
    std::vector<std::size_t> d(g.num_nodes);
    for (std::size_t i = 0; i < g.num_nodes; ++i)
        d[i] = g.adjacency.row_ptr()[i + 1] - g.adjacency.row_ptr()[i];
    return d;
}

// BFS truncated at distance K.
inline KHopSubgraph khop(const Graph& g, std::size_t center, std::size_t radius) {
    if (center >= g.num_nodes)
        throw std::invalid_argument("khop: center out of range");
    std::vector<std::size_t> dist(g.num_nodes, static_cast<std::size_t>(-1));
    std::deque<std::size_t> queue{center};
    dist[center] = 0;
    KHopSubgraph sub{center, radius, {center}};
    while (!queue.empty()) {
        std::size_t u = queue.front();
        queue.pop_front();
        if (dist[u] == radius) continue;
        const auto& rp = g.adjacency.row_ptr();
        const auto& ci = g.adjacency.col_idx();
        for (std::size_t k = rp[u]; k < rp[u + 1]; ++k) {
            std::size_t v = ci[k];
            if (dist[v] != static_cast<std::size_t>(-1)) continue;
            dist[v] = dist[u] + 1;
            sub.members.push_back(v);
            queue.push_back(v);
        }
    }
    std::sort(sub.members.begin(), sub.members.end());
    return sub;
}

// GCN renormalization: D~^{-1/2} (A + I) D~^{-1/2}.
inline SparseCsr normalized_gcn_operator(const Graph& g) {
    const std::size_t n = g.num_nodes;
    std::vector<std::size_t> ri, ci;
    std::vector<double> vals;
    std::vector<double> dtilde(n);
    for (std::size_t i = 0; i < n; ++i)
        dtilde[i] = static_cast<double>(g.adjacency.row_ptr()[i + 1] - g.adjacency.row_ptr()[i]) + 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        ri.push_back(i);
        ci.push_back(i);
        vals.push_back(1.0 / dtilde[i]);
        for (std::size_t k = g.adjacency.row_ptr()[i]; k < g.adjacency.row_ptr()[i + 1]; ++k) {
            std::size_t j = g.adjacency.col_idx()[k];
            ri.push_back(i);
            ci.push_back(j);
            vals.push_back(1.0 / std::sqrt(dtilde[i] * dtilde[j]));
        }
    }
    return SparseCsr::from_triplets(n, n, std::move(ri), std::move(ci), std::move(vals));
}

// Sparse-sparse product, used for adjacency powers.
inline SparseCsr spgemm(const SparseCsr& a, const SparseCsr& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("spgemm: inner dimensions differ");
    std::vector<std::size_t> ri, ci;
    std::vector<double> vals;
    // per-cell term lists summed in canonical order so results are invariant
    // under node relabeling
    std::vector<std::vector<double>> acc(b.cols());
    std::vector<std::size_t> touched;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        touched.clear();
        for (std::size_t ka = a.row_ptr()[i]; ka < a.row_ptr()[i + 1]; ++ka) {
            std::size_t k = a.col_idx()[ka];
            double av = a.values()[ka];
            for (std::size_t kb = b.row_ptr()[k]; kb < b.row_ptr()[k + 1]; ++kb) {
                std::size_t j = b.col_idx()[kb];
                if (acc[j].empty()) touched.push_back(j);
                acc[j].push_back(av * b.values()[kb]);
            }
        }
        std::sort(touched.begin(), touched.end());
        for (std::size_t j : touched) {
            double v = canonical_sum(acc[j]);
            if (v != 0.0) {
                ri.push_back(i);
                ci.push_back(j);
                vals.push_back(v);
            }
            acc[j].clear();
        }
    }
    return SparseCsr::from_triplets(a.rows(), b.cols(), std::move(ri), std::move(ci), std::move(vals));
}

// [I, A, A^2, ..., A^L]; the structures are fixed per graph, only the
// scalar path weights change during training.
inline std::vector<SparseCsr> adjacency_powers(const Graph& g, std::size_t max_len) {
    std::vector<SparseCsr> powers;
    powers.push_back(SparseCsr::identity(g.num_nodes));
    for (std::size_t n = 1; n <= max_len; ++n)
        powers.push_back(spgemm(powers.back(), g.adjacency));
    return powers;
}

// M^{-1/2} (sum_n w_n A^n) M^{-1/2} with M = diag of row sums of the
// unnormalized weighted sum. w_0 > 0 keeps every row sum positive.
inline SparseCsr pan_operator(const Graph& g, std::size_t max_len,
                              const std::vector<double>& path_weights) {
    if (path_weights.size() != max_len + 1)
        throw std::invalid_argument("pan_operator: need L+1 path weights");
    for (double w : path_weights)
        if (w <= 0.0) throw std::invalid_argument("pan_operator: path weights must be positive");
    auto powers = adjacency_powers(g, max_len);
    // weighted structural sum in triplet space
    std::vector<std::size_t> ri, ci;
    std::vector<double> vals;
    for (std::size_t n = 0; n <= max_len; ++n) {
        const auto& p = powers[n];
        for (std::size_t i = 0; i < p.rows(); ++i)
            for (std::size_t k = p.row_ptr()[i]; k < p.row_ptr()[i + 1]; ++k) {
                ri.push_back(i);
                ci.push_back(p.col_idx()[k]);
                vals.push_back(path_weights[n] * p.values()[k]);
            }
    }
    SparseCsr s = SparseCsr::from_triplets(g.num_nodes, g.num_nodes,
                                           std::move(ri), std::move(ci), std::move(vals));
    std::vector<double> alpha(g.num_nodes);
    std::vector<double> terms;
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        terms.assign(s.values().begin() + static_cast<std::ptrdiff_t>(s.row_ptr()[i]),
                     s.values().begin() + static_cast<std::ptrdiff_t>(s.row_ptr()[i + 1]));
        double m = canonical_sum(terms);
        if (!(m > 0.0))
            throw std::logic_error("pan_operator: nonpositive row sum");
        alpha[i] = 1.0 / std::sqrt(m);
    }
    for (std::size_t i = 0; i < g.num_nodes; ++i)
        for (std::size_t k = s.row_ptr()[i]; k < s.row_ptr()[i + 1]; ++k)
            s.values()[k] *= alpha[i] * alpha[s.col_idx()[k]];
    return s;
}

} // namespace delta
