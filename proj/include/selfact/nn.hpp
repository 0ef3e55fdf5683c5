#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "selfact/rng.hpp"

// Minimal dense/conv building blocks, double precision throughout. Layers are
// plain structs that own their parameters, gradients and forward caches; the
// network wiring above them is explicit code, not a graph. backward() always
// accumulates into the parameter gradients and returns the input gradient, so
// a caller zeroes grads once per step and chains calls in reverse.

namespace selfact::nn {

// Row-major matrix.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    double* row(std::size_t r) { return v.data() + r * cols; }
    const double* row(std::size_t r) const { return v.data() + r * cols; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// View over one parameter tensor and its gradient, for optimizers and
// serialization.
struct ParamRef {
    std::string name;
    double* value;
    double* grad;
    std::size_t n;
};

// ============================================================================
// Layers
// ============================================================================

// Fully connected: y = x W^T + b, x is (batch x in), y is (batch x out).
struct Dense {
    std::size_t in = 0, out = 0;
    Mat w;                   // out x in
    std::vector<double> b;   // out
    Mat gw;
    std::vector<double> gb;

    Dense() = default;
    Dense(std::size_t in_dim, std::size_t out_dim);

    void init(Rng& rng);  // Kaiming-uniform over fan-in, zero bias
    Mat apply(const Mat& x) const;  // stateless; safe on shared models
    Mat forward(const Mat& x);      // apply + cache for backward
    Mat backward(const Mat& dy);
    std::vector<ParamRef> params(const char* prefix);
    void zero_grad();

private:
    Mat x_;  // forward cache
};

// 1-D valid convolution over time. Input is (T x in_ch) row-major, output is
// ((T - k + 1) x out_ch). Weights are stored (out_ch x k*in_ch) so each output
// element is one contiguous dot product against the input patch.
struct Conv1d {
    std::size_t in_ch = 0, out_ch = 0, k = 0;
    Mat w;                   // out_ch x (k*in_ch)
    std::vector<double> b;   // out_ch
    Mat gw;
    std::vector<double> gb;

    Conv1d() = default;
    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel);

    void init(Rng& rng);
    Mat apply(const Mat& x) const;
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy);
    std::vector<ParamRef> params(const char* prefix);
    void zero_grad();

private:
    Mat x_;
};

// Element-wise max(0, x).
struct Relu {
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy) const;

private:
    Mat x_;
};

// Inverted dropout: active only when training, scales kept units by 1/(1-rate)
// so inference needs no correction.
struct Dropout {
    double rate = 0.1;

    Mat forward(const Mat& x, Rng& rng, bool training);
    Mat backward(const Mat& dy) const;

private:
    Mat mask_;
    bool active_ = false;
};

// Per-channel max over the time axis: (T x C) -> (1 x C).
struct GlobalMaxPool {
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy) const;

private:
    std::vector<std::size_t> argmax_;
    std::size_t t_ = 0, c_ = 0;
};

// Row-wise L2 normalization; gradient flows through the norm.
struct L2Normalize {
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy) const;

private:
    Mat y_;
    std::vector<double> norm_;
};

// ============================================================================
// Losses
// ============================================================================

// Row-wise softmax with the usual max-shift for stability.
Mat softmax(const Mat& logits);

// Softmax + mean cross-entropy against integer class targets.
struct SoftmaxCrossEntropy {
    double forward(const Mat& logits, const std::vector<std::size_t>& targets);
    Mat backward() const;  // d(loss)/d(logits)

private:
    Mat probs_;
    std::vector<std::size_t> targets_;
};

// ============================================================================
// Optimizers
// ============================================================================

struct Sgd {
    double lr = 0.1;

    void step(const std::vector<ParamRef>& ps) const;
};

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void step(const std::vector<ParamRef>& ps);

private:
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;  // lazily sized to ps on first step
};

}  // namespace selfact::nn
