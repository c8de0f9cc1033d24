#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "delta/rng.hpp"

namespace delta {

// Row-major dense matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw std::invalid_argument("DenseMatrix: data length != rows*cols");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Compressed sparse row matrix. Column indices strictly increasing per row.
class SparseCsr {
public:
    SparseCsr() = default;
    SparseCsr(std::size_t rows, std::size_t cols,
              std::vector<std::size_t> row_ptr,
              std::vector<std::size_t> col_idx,
              std::vector<double> values)
        : rows_(rows), cols_(cols),
          row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
        validate();
    }

    static SparseCsr identity(std::size_t n) {
        std::vector<std::size_t> rp(n + 1), ci(n);
        std::vector<double> v(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) { rp[i + 1] = i + 1; ci[i] = i; }
        return SparseCsr(n, n, std::move(rp), std::move(ci), std::move(v));
    }

    // Build from unordered (row, col, value) triplets; duplicates summed.
    static SparseCsr from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<std::size_t> ri,
                                   std::vector<std::size_t> ci,
                                   std::vector<double> vals) {
        std::vector<std::size_t> order(ri.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return ri[a] != ri[b] ? ri[a] < ri[b] : ci[a] < ci[b];
        });
        std::vector<std::size_t> rp(rows + 1, 0), cc;
        std::vector<double> vv;
        std::size_t prev_r = rows, prev_c = 0;
        std::vector<std::size_t> counts(rows, 0);
        for (std::size_t k : order) {
            if (!vv.empty() && ri[k] == prev_r && ci[k] == prev_c) {
                vv.back() += vals[k];
            } else {
                counts[ri[k]]++;
                cc.push_back(ci[k]);
                vv.push_back(vals[k]);
                prev_r = ri[k];
                prev_c = ci[k];
            }
        }
        for (std::size_t i = 0; i < rows; ++i) rp[i + 1] = rp[i] + counts[i];
        return SparseCsr(rows, cols, std::move(rp), std::move(cc), std::move(vv));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    DenseMatrix densify() const {
        DenseMatrix d(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                d(i, col_idx_[k]) = values_[k];
        return d;
    }

private:
    void validate() const {
        if (row_ptr_.size() != rows_ + 1)
            throw std::invalid_argument("SparseCsr: row_ptr length != rows+1");
        if (row_ptr_.back() != values_.size() || col_idx_.size() != values_.size())
            throw std::invalid_argument("SparseCsr: nnz mismatch");
        for (std::size_t i = 0; i < rows_; ++i) {
            if (row_ptr_[i] > row_ptr_[i + 1])
                throw std::invalid_argument("SparseCsr: row_ptr not nondecreasing");
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                if (col_idx_[k] >= cols_)
                    throw std::invalid_argument("SparseCsr: column index out of range");
                if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1])
                    throw std::invalid_argument("SparseCsr: columns not strictly increasing");
            }
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

// Sum of a multiset of doubles that does not depend on the order the terms
// arrive in: node-aggregation results must be identical under any relabeling
// of the graph, so terms are brought into a canonical order first.
inline double canonical_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc;
}

namespace detail {

// canonical_sum over a small scratch range: insertion sort beats std::sort
// for the handful of neighbor terms a sparse row produces.
inline double canonical_sum_small(double* terms, std::size_t n) {
    if (n > 48) {
        std::sort(terms, terms + n);
    } else {
        for (std::size_t i = 1; i < n; ++i) {
            double key = terms[i];
            std::size_t j = i;
            while (j > 0 && terms[j - 1] > key) {
                terms[j] = terms[j - 1];
                --j;
            }
            terms[j] = key;
        }
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += terms[i];
    return acc;
}

} // namespace detail

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
    DenseMatrix out(a.rows(), b.cols());
    // i-k-j order: the inner loop runs over contiguous memory in both b and
    // out, and the summation order per cell (ascending k) is fixed, so the
    // result is deterministic.
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* __restrict orow = out.raw().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* __restrict brow = b.raw().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline DenseMatrix spmm(const SparseCsr& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("spmm: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
    DenseMatrix out(a.rows(), b.cols());
    const auto& rp = a.row_ptr();
    const auto& ci = a.col_idx();
    const auto& v = a.values();
    // Gather from a transposed copy so each output row touches one dense row
    // of bt per column; each cell's terms go through canonical_sum so the
    // result is invariant to how the graph happens to be labeled.
    DenseMatrix bt(b.cols(), b.rows());
    for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) bt(c, r) = b(r, c);
    std::vector<double> terms;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const std::size_t deg = rp[i + 1] - rp[i];
        terms.resize(deg);
        for (std::size_t j = 0; j < b.cols(); ++j) {
            const double* btrow = bt.raw().data() + j * b.rows();
            for (std::size_t k = 0; k < deg; ++k)
                terms[k] = v[rp[i] + k] * btrow[ci[rp[i] + k]];
            out(i, j) = detail::canonical_sum_small(terms.data(), deg);
        }
    }
    return out;
}

// spmm without the canonical term ordering: summation runs in stored-column
// order. Used on the training tape, where results never feed the
// relabeling-invariant eval path.
inline DenseMatrix spmm_fast(const SparseCsr& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("spmm: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
    DenseMatrix out(a.rows(), b.cols());
    const auto& rp = a.row_ptr();
    const auto& ci = a.col_idx();
    const auto& v = a.values();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.raw().data() + i * b.cols();
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
            const double av = v[k];
            const double* brow = b.raw().data() + ci[k] * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

// A^T * B without materializing the transpose.
inline DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows())
        throw std::invalid_argument("matmul_at_b: row counts differ");
    DenseMatrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* __restrict brow = b.raw().data() + k * n;
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            double* __restrict orow = out.raw().data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

// A * B^T.
inline DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_a_bt: column counts differ");
    DenseMatrix bt(b.cols(), b.rows());
    for (std::size_t j = 0; j < b.rows(); ++j)
        for (std::size_t k = 0; k < b.cols(); ++k) bt(k, j) = b(j, k);
    DenseMatrix out(a.rows(), b.rows());
    const std::size_t n = b.rows();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* __restrict orow = out.raw().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* __restrict btrow = bt.raw().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * btrow[j];
        }
    }
    return out;
}

// Sparse-transpose times dense: A^T * B for CSR A.
inline DenseMatrix spmm_at_b(const SparseCsr& a, const DenseMatrix& b) {
    if (a.rows() != b.rows())
        throw std::invalid_argument("spmm_at_b: row counts differ");
    DenseMatrix out(a.cols(), b.cols());
    const auto& rp = a.row_ptr();
    const auto& ci = a.col_idx();
    const auto& v = a.values();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
            for (std::size_t j = 0; j < b.cols(); ++j)
                out(ci[k], j) += v[k] * b(i, j);
    return out;
}

inline DenseMatrix relu(const DenseMatrix& m) {
    DenseMatrix out = m;
    for (double& v : out.raw()) v = std::max(0.0, v);
    return out;
}

inline DenseMatrix row_softmax(const DenseMatrix& m) {
    DenseMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double mx = m(i, 0);
        for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, m(i, j));
        long double sum = 0.0L;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out(i, j) = std::exp(m(i, j) - mx);
            sum += out(i, j);
        }
        for (std::size_t j = 0; j < m.cols(); ++j)
            out(i, j) = static_cast<double>(out(i, j) / sum);
    }
    return out;
}

// Training-mode dropout; mask drawn from (seed, stream) counter positions so
// the same key always reproduces the same mask. p in [0, 1).
inline DenseMatrix dropout(const DenseMatrix& m, double p,
                           std::uint64_t seed, std::uint64_t stream) {
    if (p < 0.0 || p >= 1.0)
        throw std::invalid_argument("dropout: p must be in [0,1)");
    if (p == 0.0) return m;
    DenseMatrix out = m;
    const double scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.raw()[i] = rng::uniform(seed, stream, i) < p ? 0.0 : out.raw()[i] * scale;
    return out;
}

struct CrossEntropyResult {
    double loss = 0.0;
    DenseMatrix grad; // d loss / d logits
};

// Mean negative log-likelihood over masked rows, with analytic gradient.
inline CrossEntropyResult softmax_cross_entropy(const DenseMatrix& logits,
                                                const std::vector<int>& labels,
                                                const std::vector<std::uint8_t>& mask) {
    if (labels.size() != logits.rows() || mask.size() != logits.rows())
        throw std::invalid_argument("softmax_cross_entropy: label/mask length mismatch");
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols())
            throw std::invalid_argument("softmax_cross_entropy: class index out of range");
        ++n;
    }
    if (n == 0)
        throw std::invalid_argument("softmax_cross_entropy: no supervised rows");

    CrossEntropyResult res;
    res.grad = DenseMatrix(logits.rows(), logits.cols());
    long double loss = 0.0L;
    DenseMatrix probs = row_softmax(logits);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (!mask[i]) continue;
        const int y = labels[i];
        loss += -std::log(std::max(probs(i, static_cast<std::size_t>(y)), 1e-300));
        for (std::size_t j = 0; j < logits.cols(); ++j)
            res.grad(i, j) = (probs(i, j) - (static_cast<int>(j) == y ? 1.0 : 0.0)) / static_cast<double>(n);
    }
    res.loss = static_cast<double>(loss / static_cast<long double>(n));
    return res;
}

} // namespace delta
