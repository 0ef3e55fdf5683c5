#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "selfact/dataset.hpp"
#include "selfact/nn.hpp"
#include "selfact/rng.hpp"

// Two embedding backends over SensorWindows: a deterministic statistical
// feature extractor, and a 1-D convolutional encoder pre-trained with a
// rotation-augmented contrastive objective.

namespace selfact {

using Embedding = std::vector<double>;

// ============================================================================
// Statistical features
// ============================================================================

// 18 values in fixed order: for each axis (x, y, z) the mean, standard
// deviation, min, max and energy (mean of squares), then the pairwise Pearson
// correlations (xy, xz, yz). A correlation is 0 when either axis has zero
// variance. Moments are population moments (divide by n).
constexpr std::size_t kStatFeatureDim = 18;
Embedding extract_stat_features(const SensorWindow& window);

// ============================================================================
// Convolutional encoder
// ============================================================================

// Three conv stages (32/64/96 filters, kernels 24/16/8) with dropout between
// consecutive stages during training, ReLU activations, then a global max
// pool over time. The embedding is the 96-channel pooled vector.
struct EncoderModel {
    static constexpr std::size_t kEmbeddingDim = 96;

    nn::Conv1d conv1{3, 32, 24};
    nn::Conv1d conv2{32, 64, 16};
    nn::Conv1d conv3{64, 96, 8};
    double dropout_rate = 0.1;

    void init(Rng& rng);
    std::vector<nn::ParamRef> params();
    void zero_grad();
};

// Inference pass: deterministic, dropout inactive, model untouched (safe to
// share across threads). Throws std::invalid_argument when the window is
// shorter than the kernel stack needs.
Embedding encode(const EncoderModel& model, const SensorWindow& window);

// Projection head used only during pre-training: FC 256/128/50 with ReLU
// between layers, output L2-normalized. Discarded after pretrain().
struct ProjectionHead {
    nn::Dense fc1{EncoderModel::kEmbeddingDim, 256};
    nn::Dense fc2{256, 128};
    nn::Dense fc3{128, 50};

    void init(Rng& rng);
    std::vector<nn::ParamRef> params();
    void zero_grad();
};

// ============================================================================
// Rotation augmentation
// ============================================================================

// Row-major 3x3 rotation matrix.
using Rotation = std::array<double, 9>;

// Uniformly random rotation (uniform quaternion construction).
Rotation random_rotation_matrix(Rng& rng);

// Applies one rotation to every sample of the window. Norm-preserving.
SensorWindow rotate_window(const SensorWindow& window, const Rotation& r);

inline SensorWindow random_rotation(const SensorWindow& window, Rng& rng) {
    return rotate_window(window, random_rotation_matrix(rng));
}

// ============================================================================
// Contrastive objective
// ============================================================================

// NT-Xent over N embedding pairs (rows of view_a pair with the same rows of
// view_b). Cosine similarity; for each of the 2N anchors the denominator sums
// exp(sim/temperature) over the 2N-1 other samples; the result is the mean
// over anchors. Throws std::invalid_argument on temperature <= 0, mismatched
// batches, empty batches or a zero-norm embedding.
double nt_xent_loss(const nn::Mat& view_a, const nn::Mat& view_b, double temperature);

// Same loss, also producing d(loss)/d(view) for both views.
double nt_xent_loss_grad(const nn::Mat& view_a, const nn::Mat& view_b, double temperature,
                         nn::Mat& grad_a, nn::Mat& grad_b);

// ============================================================================
// Pre-training
// ============================================================================

struct PretrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 512;
    double base_lr = 0.1;
    double temperature = 0.1;
    std::uint64_t seed = 1;
};

struct PretrainResult {
    EncoderModel model;
    std::vector<double> epoch_mean_loss;  // one entry per epoch
    std::size_t steps = 0;
};

// SGD with per-step cosine decay lr(t) = base_lr * 0.5 * (1 + cos(pi*t/T))
// over T total steps. Each step draws a batch of windows, makes two
// independently rotated views per window, runs them through encoder +
// projection head and minimizes NT-Xent. Batches are full-sized (the trailing
// partial batch is dropped); when fewer than batch_size windows exist the
// whole set forms one batch. Deterministic given config.seed. Labels on the
// input windows are ignored.
PretrainResult pretrain(const std::vector<SensorWindow>& windows, const PretrainConfig& config);

}  // namespace selfact
