#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "delta/graph.hpp"
#include "delta/matrix.hpp"
#include "delta/rng.hpp"
#include "delta/subnet.hpp"

namespace delta {

struct SelectConfig {
    double gamma = 0.3;          // consistency threshold
    std::size_t hop_radius = 2;  // K
    std::size_t budget = 1;      // k
    bool normalize_scores = false; // min-max U and D over the candidate set
    std::uint64_t seed = 0;

    void validate() const {
        if (budget < 1) throw std::invalid_argument("SelectConfig: budget must be >= 1");
        if (gamma < 0.0) throw std::invalid_argument("SelectConfig: gamma must be >= 0");
    }
};

struct CandidateSet {
    std::vector<std::size_t> ids;      // sorted
    std::vector<double> distances;     // parallel to ids, each > gamma
};

struct ScoreRow {
    std::size_t id = 0;
    double inconsistency = 0.0;
    double uncertainty = 0.0;  // U_j
    double discrepancy = 0.0;  // D_j
    double composite = 0.0;    // I_j
};

struct Selection {
    std::vector<std::size_t> ids;    // ordered, length exactly k
    std::vector<ScoreRow> scores;    // all scored nodes, ranked order
    std::size_t candidate_count = 0; // |T| before any fallback
};

// Per-node Euclidean distance between the two subnetworks' logit rows.
inline std::vector<double> inconsistency(const DualLogits& dual) {
    if (!dual.edge.same_shape(dual.path))
        throw std::invalid_argument("inconsistency: logit shapes differ");
    std::vector<double> d(dual.edge.rows());
    for (std::size_t i = 0; i < dual.edge.rows(); ++i) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < dual.edge.cols(); ++j) {
            long double diff = static_cast<long double>(dual.edge(i, j)) - dual.path(i, j);
            acc += diff * diff;
        }
        d[i] = static_cast<double>(std::sqrt(acc));
    }
    return d;
}

// Strict threshold: distance > gamma, unlabeled nodes only.
inline CandidateSet candidates(const std::vector<double>& distances, double gamma,
                               const std::vector<std::uint8_t>& labeled_mask) {
    if (gamma < 0.0) throw std::invalid_argument("candidates: gamma must be >= 0");
    if (distances.size() != labeled_mask.size())
        throw std::invalid_argument("candidates: mask length mismatch");
    CandidateSet cs;
    for (std::size_t i = 0; i < distances.size(); ++i)
        if (!labeled_mask[i] && distances[i] > gamma) {
            cs.ids.push_back(i);
            cs.distances.push_back(distances[i]);
        }
    return cs;
}

// Degree-reciprocal weighted sum of logits over the K-hop subgraph of the
// center, center included. Degree 0 is clamped to 1 before the reciprocal.
inline std::vector<double> weighted_khop_logits(const Graph& g, const DenseMatrix& logits,
                                                std::size_t center, std::size_t hop_radius,
                                                const std::vector<std::size_t>& degs) {
    KHopSubgraph sub = khop(g, center, hop_radius);
    std::vector<double> out(logits.cols(), 0.0);
    std::vector<double> terms;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
        terms.clear();
        for (std::size_t m : sub.members) {
            double w = 1.0 / static_cast<double>(std::max<std::size_t>(degs[m], 1));
            terms.push_back(w * logits(m, c));
        }
        // relabeling-invariant accumulation
        out[c] = canonical_sum(terms);
    }
    return out;
}

inline std::vector<double> weighted_khop_logits(const Graph& g, const DenseMatrix& logits,
                                                std::size_t center, std::size_t hop_radius) {
    return weighted_khop_logits(g, logits, center, hop_radius, degrees(g));
}

namespace detail {

inline double softmax_entropy(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    long double sum = 0.0L;
    for (double v : logits) sum += std::exp(static_cast<long double>(v) - mx);
    long double h = 0.0L;
    for (double v : logits) {
        long double p = std::exp(static_cast<long double>(v) - mx) / sum;
        if (p > 0.0L) h -= p * std::log(p);
    }
    return static_cast<double>(h);
}

} // namespace detail

// U_j: sum of Shannon entropies (nats) of the softmaxed weighted K-hop
// logits from both subnetworks.
inline std::vector<double> topo_uncertainty(const Graph& g, const DualLogits& dual,
                                            const std::vector<std::size_t>& candidate_ids,
                                            std::size_t hop_radius) {
    if (candidate_ids.empty())
        throw std::invalid_argument("topo_uncertainty: empty candidate set");
    auto degs = degrees(g);
    std::vector<double> u(candidate_ids.size());
    for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
        std::size_t j = candidate_ids[i];
        auto se = weighted_khop_logits(g, dual.edge, j, hop_radius, degs);
        auto sp = weighted_khop_logits(g, dual.path, j, hop_radius, degs);
        u[i] = detail::softmax_entropy(se) + detail::softmax_entropy(sp);
    }
    return u;
}

// D_j: degree-weighted average feature distance to the labeled source set,
// divided by |S| (raw source degrees as weights, no clamping).
inline std::vector<double> domain_discrepancy(const Graph& source, const Graph& target,
                                              const std::vector<std::size_t>& candidate_ids) {
    if (source.features.cols() != target.features.cols())
        throw std::invalid_argument("domain_discrepancy: feature dimensions differ");
    auto sdeg = degrees(source);
    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < source.num_nodes; ++i)
        if (source.labeled_mask[i]) labeled.push_back(i);
    if (labeled.empty())
        throw std::invalid_argument("domain_discrepancy: no labeled source nodes");

    std::vector<double> d(candidate_ids.size(), 0.0);
    const std::size_t nf = source.features.cols();
    for (std::size_t ci = 0; ci < candidate_ids.size(); ++ci) {
        std::size_t j = candidate_ids[ci];
        long double acc = 0.0L;
        for (std::size_t i : labeled) {
            long double dist2 = 0.0L;
            for (std::size_t f = 0; f < nf; ++f) {
                long double diff = static_cast<long double>(target.features(j, f)) - source.features(i, f);
                dist2 += diff * diff;
            }
            acc += static_cast<long double>(sdeg[i]) * std::sqrt(dist2);
        }
        d[ci] = static_cast<double>(acc / static_cast<long double>(labeled.size()));
    }
    return d;
}

namespace detail {

inline void minmax_normalize(std::vector<double>& v) {
    if (v.empty()) return;
    double lo = v[0], hi = v[0];
    for (double x : v) { lo = std::min(lo, x); hi = std::max(hi, x); }
    double span = hi - lo;
    for (double& x : v) x = span > 0.0 ? (x - lo) / span : 0.0;
}

inline std::vector<ScoreRow> score_nodes(const Graph& source, const Graph& target,
                                         const DualLogits& dual,
                                         const std::vector<std::size_t>& ids,
                                         const std::vector<double>& distances,
                                         const SelectConfig& cfg) {
    auto u = topo_uncertainty(target, dual, ids, cfg.hop_radius);
    auto d = domain_discrepancy(source, target, ids);
    if (cfg.normalize_scores) {
        minmax_normalize(u);
        minmax_normalize(d);
    }
    std::vector<ScoreRow> rows(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        rows[i] = {ids[i], distances[i], u[i], d[i], u[i] + d[i]};
    return rows;
}

// Descending composite score, ties broken by ascending node id.
inline void rank(std::vector<ScoreRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
        if (a.composite != b.composite) return a.composite > b.composite;
        return a.id < b.id;
    });
}

} // namespace detail

// One-shot top-k selection by composite score I = U + D over the candidate
// set; when the candidate set is smaller than the budget, the remaining
// unlabeled nodes are scored the same way and fill the tail.
inline Selection select(const Graph& source, const Graph& target, const DualLogits& dual,
                        const SelectConfig& cfg) {
    cfg.validate();
    if (dual.edge.rows() != target.num_nodes)
        throw std::invalid_argument("select: logit rows != target node count");
    std::size_t pool = 0;
    for (std::size_t i = 0; i < target.num_nodes; ++i)
        if (!target.labeled_mask[i]) ++pool;
    if (cfg.budget > pool)
        throw std::invalid_argument("select: budget k=" + std::to_string(cfg.budget) +
                                    " exceeds unlabeled pool of " + std::to_string(pool));

    auto dist = inconsistency(dual);
    CandidateSet cs = candidates(dist, cfg.gamma, target.labeled_mask);

    Selection sel;
    sel.candidate_count = cs.ids.size();
    std::vector<ScoreRow> ranked;
    if (!cs.ids.empty()) {
        ranked = detail::score_nodes(source, target, dual, cs.ids, cs.distances, cfg);
        detail::rank(ranked);
    }
    if (cs.ids.size() < cfg.budget) {
        // fallback: score every remaining unlabeled node
        std::vector<std::size_t> rest;
        std::vector<double> rest_dist;
        std::vector<std::uint8_t> in_cand(target.num_nodes, 0);
        for (std::size_t id : cs.ids) in_cand[id] = 1;
        for (std::size_t i = 0; i < target.num_nodes; ++i)
            if (!target.labeled_mask[i] && !in_cand[i]) {
                rest.push_back(i);
                rest_dist.push_back(dist[i]);
            }
        auto tail = detail::score_nodes(source, target, dual, rest, rest_dist, cfg);
        detail::rank(tail);
        ranked.insert(ranked.end(), tail.begin(), tail.end());
    }
    sel.scores = ranked;
    for (std::size_t i = 0; i < cfg.budget; ++i)
        sel.ids.push_back(ranked[i].id);
    return sel;
}

enum class BaselineKind { Random, Degree, Density, Uncertainty };

inline BaselineKind baseline_from_name(const std::string& name) {
    if (name == "random") return BaselineKind::Random;
    if (name == "degree") return BaselineKind::Degree;
    if (name == "density") return BaselineKind::Density;
    if (name == "uncertainty") return BaselineKind::Uncertainty;
    throw std::invalid_argument("unknown baseline: " + name);
}

namespace detail {

// Seeded k-means for the density baseline: C clusters on the edge-subnetwork
// embeddings, 50 Lloyd iterations, centroids initialized from distinct nodes.
// Score per node: 1 / (1 + distance to its centroid).
inline std::vector<double> density_scores(const DenseMatrix& embeddings, std::size_t clusters,
                                          std::uint64_t seed) {
    const std::size_t n = embeddings.rows(), dim = embeddings.cols();
    clusters = std::min<std::size_t>(std::max<std::size_t>(clusters, 1), n);
    rng::Stream init_rng(seed, 0x6b6dULL);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[init_rng.below(i)]);

    DenseMatrix centroids(clusters, dim);
    for (std::size_t c = 0; c < clusters; ++c)
        for (std::size_t f = 0; f < dim; ++f)
            centroids(c, f) = embeddings(perm[c], f);

    std::vector<std::size_t> assign(n, 0);
    auto dist2 = [&](std::size_t i, std::size_t c) {
        long double acc = 0.0L;
        for (std::size_t f = 0; f < dim; ++f) {
            long double diff = static_cast<long double>(embeddings(i, f)) - centroids(c, f);
            acc += diff * diff;
        }
        return static_cast<double>(acc);
    };
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bestd = dist2(i, 0);
            for (std::size_t c = 1; c < clusters; ++c) {
                double d = dist2(i, c);
                if (d < bestd) { bestd = d; best = c; }
            }
            if (assign[i] != best) { assign[i] = best; changed = true; }
        }
        DenseMatrix sums(clusters, dim);
        std::vector<std::size_t> counts(clusters, 0);
        for (std::size_t i = 0; i < n; ++i) {
            counts[assign[i]]++;
            for (std::size_t f = 0; f < dim; ++f)
                sums(assign[i], f) += embeddings(i, f);
        }
        for (std::size_t c = 0; c < clusters; ++c)
            if (counts[c] > 0)
                for (std::size_t f = 0; f < dim; ++f)
                    centroids(c, f) = sums(c, f) / static_cast<double>(counts[c]);
        if (!changed && iter > 0) break;
    }
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i)
        score[i] = 1.0 / (1.0 + std::sqrt(dist2(i, assign[i])));
    return score;
}

// Top-k over unlabeled nodes by descending score, ascending id on ties.
inline std::vector<std::size_t> top_k_by_score(const std::vector<double>& score,
                                               const std::vector<std::uint8_t>& labeled_mask,
                                               std::size_t k) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < score.size(); ++i)
        if (!labeled_mask[i]) ids.push_back(i);
    if (k > ids.size())
        throw std::invalid_argument("baseline_select: budget exceeds unlabeled pool");
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return a < b;
    });
    ids.resize(k);
    return ids;
}

} // namespace detail

// Inputs the four simple baselines may need; unused fields can stay empty
// for kinds that do not read them.
struct BaselineInputs {
    const Graph* target = nullptr;
    const DenseMatrix* edge_logits = nullptr;      // uncertainty
    const DenseMatrix* edge_embeddings = nullptr;  // density
};

inline std::vector<std::size_t> baseline_select(BaselineKind kind, const BaselineInputs& in,
                                                std::size_t k, std::uint64_t seed) {
    if (in.target == nullptr)
        throw std::invalid_argument("baseline_select: target graph required");
    const Graph& g = *in.target;
    switch (kind) {
    case BaselineKind::Random: {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < g.num_nodes; ++i)
            if (!g.labeled_mask[i]) pool.push_back(i);
        if (k > pool.size())
            throw std::invalid_argument("baseline_select: budget exceeds unlabeled pool");
        rng::Stream r(seed, 0x72616e64ULL);
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[r.below(i)]);
        pool.resize(k);
        return pool;
    }
    case BaselineKind::Degree: {
        auto degs = degrees(g);
        std::vector<double> score(g.num_nodes);
        for (std::size_t i = 0; i < g.num_nodes; ++i)
            score[i] = static_cast<double>(degs[i]);
        return detail::top_k_by_score(score, g.labeled_mask, k);
    }
    case BaselineKind::Uncertainty: {
        if (in.edge_logits == nullptr)
            throw std::invalid_argument("baseline_select: uncertainty needs edge logits");
        std::vector<double> score(g.num_nodes);
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            std::vector<double> row(in.edge_logits->cols());
            for (std::size_t c = 0; c < row.size(); ++c) row[c] = (*in.edge_logits)(i, c);
            score[i] = detail::softmax_entropy(row);
        }
        return detail::top_k_by_score(score, g.labeled_mask, k);
    }
    case BaselineKind::Density: {
        if (in.edge_embeddings == nullptr)
            throw std::invalid_argument("baseline_select: density needs edge embeddings");
        auto score = detail::density_scores(*in.edge_embeddings,
                                            static_cast<std::size_t>(g.num_classes), seed);
        return detail::top_k_by_score(score, g.labeled_mask, k);
    }
    }
    throw std::logic_error("baseline_select: unreachable");
}

} // namespace delta
