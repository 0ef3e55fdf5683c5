#pragma once

#include <cstddef>
#include <vector>

#include "selfact/encoder.hpp"
#include "selfact/nn.hpp"

// Personalized dimensionality reduction: PCA fitted once on the accumulated
// embeddings, then applied to every subsequent embedding in real time.

namespace selfact {

using ReducedEmbedding = std::vector<double>;

struct ReducerModel {
    std::vector<double> mean;     // input_dim
    nn::Mat components;           // input_dim x out_dim, columns orthonormal
    std::vector<double> eigenvalues;  // top out_dim, descending
    std::size_t input_dim = 0;
    std::size_t out_dim = 0;
};

// Principal-component fit over the sample covariance (unbiased, n-1).
// Components are the top-out_dim eigenvectors ordered by descending
// eigenvalue; each component's largest-magnitude coordinate is made positive
// (first such coordinate on ties), which pins the sign deterministically.
// Throws std::invalid_argument on out_dim < 1, out_dim > input_dim, fewer
// than out_dim + 1 embeddings, or ragged input.
ReducerModel fit_reducer(const std::vector<Embedding>& embeddings, std::size_t out_dim);

// (embedding - mean) projected onto the components.
ReducedEmbedding transform(const ReducerModel& reducer, const Embedding& embedding);

// mean + components * reduced; the PCA reconstruction of a reduced point.
Embedding reconstruct(const ReducerModel& reducer, const ReducedEmbedding& reduced);

}  // namespace selfact
