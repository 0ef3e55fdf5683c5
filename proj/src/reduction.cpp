#include "selfact/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "selfact/kernels.hpp"

namespace selfact {

using nn::Mat;

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Rotations zero one
// off-diagonal pair at a time; sweeps repeat until the off-diagonal mass is
// negligible. a is destroyed; on return its diagonal holds the eigenvalues
// and the columns of v the matching eigenvectors.
void jacobi_eigen(Mat& a, Mat& v) {
    const std::size_t d = a.rows;
    v = Mat(d, d);
    for (std::size_t i = 0; i < d; ++i) v.at(i, i) = 1.0;
    if (d < 2) return;

    double frob = 0.0;
    for (double x : a.v) frob += x * x;
    const double tol = 1e-14 * std::sqrt(std::max(frob, 1e-300));

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) off += a.at(p, q) * a.at(p, q);
        }
        if (std::sqrt(off) <= tol) return;

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                double apq = a.at(p, q);
                if (std::abs(apq) <= tol / static_cast<double>(d * d)) continue;
                double tau = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;

                for (std::size_t i = 0; i < d; ++i) {
                    double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    double api = a.at(p, i), aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    double vip = v.at(i, p), viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
        }
    }
}

}  // namespace

ReducerModel fit_reducer(const std::vector<Embedding>& embeddings, std::size_t out_dim) {
    if (out_dim < 1) throw std::invalid_argument("fit_reducer: out_dim must be >= 1");
    if (embeddings.size() < out_dim + 1) {
        throw std::invalid_argument("fit_reducer: need at least out_dim + 1 embeddings");
    }
    const std::size_t d = embeddings[0].size();
    if (out_dim > d) throw std::invalid_argument("fit_reducer: out_dim exceeds input dimension");
    for (const auto& e : embeddings) {
        if (e.size() != d) throw std::invalid_argument("fit_reducer: ragged embeddings");
    }
    const std::size_t n = embeddings.size();

    ReducerModel model;
    model.input_dim = d;
    model.out_dim = out_dim;
    model.mean.assign(d, 0.0);
    for (const auto& e : embeddings) kern::axpy(d, 1.0, e.data(), model.mean.data());
    kern::scal(d, 1.0 / static_cast<double>(n), model.mean.data());

    // Unbiased sample covariance.
    Mat cov(d, d);
    std::vector<double> centered(d);
    for (const auto& e : embeddings) {
        for (std::size_t i = 0; i < d; ++i) centered[i] = e[i] - model.mean[i];
        for (std::size_t i = 0; i < d; ++i) {
            kern::axpy(d, centered[i], centered.data(), cov.row(i));
        }
    }
    kern::scal(d * d, 1.0 / static_cast<double>(n - 1), cov.v.data());

    Mat vecs;
    jacobi_eigen(cov, vecs);

    // Order eigenpairs by descending eigenvalue; stable on ties.
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return cov.at(a, a) > cov.at(b, b);
    });

    model.components = Mat(d, out_dim);
    model.eigenvalues.resize(out_dim);
    for (std::size_t c = 0; c < out_dim; ++c) {
        std::size_t src = idx[c];
        model.eigenvalues[c] = cov.at(src, src);
        // Sign convention: largest-|coordinate| positive, first on ties.
        std::size_t arg = 0;
        for (std::size_t i = 1; i < d; ++i) {
            if (std::abs(vecs.at(i, src)) > std::abs(vecs.at(arg, src))) arg = i;
        }
        double sign = vecs.at(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < d; ++i) model.components.at(i, c) = sign * vecs.at(i, src);
    }
    return model;
}

ReducedEmbedding transform(const ReducerModel& reducer, const Embedding& embedding) {
    if (embedding.size() != reducer.input_dim) {
        throw std::invalid_argument("transform: dimension mismatch");
    }
    std::vector<double> centered(reducer.input_dim);
    for (std::size_t i = 0; i < reducer.input_dim; ++i) {
        centered[i] = embedding[i] - reducer.mean[i];
    }
    ReducedEmbedding out(reducer.out_dim, 0.0);
    for (std::size_t c = 0; c < reducer.out_dim; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < reducer.input_dim; ++i) {
            s += centered[i] * reducer.components.at(i, c);
        }
        out[c] = s;
    }
    return out;
}

Embedding reconstruct(const ReducerModel& reducer, const ReducedEmbedding& reduced) {
    if (reduced.size() != reducer.out_dim) {
        throw std::invalid_argument("reconstruct: dimension mismatch");
    }
    Embedding out = reducer.mean;
    for (std::size_t c = 0; c < reducer.out_dim; ++c) {
        for (std::size_t i = 0; i < reducer.input_dim; ++i) {
            out[i] += reducer.components.at(i, c) * reduced[c];
        }
    }
    return out;
}

}  // namespace selfact
