#include "selfact/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selfact/kernels.hpp"

namespace selfact::nn {

namespace {

void kaiming_uniform(Mat& w, std::size_t fan_in, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& x : w.v) x = rng.uniform(-bound, bound);
}

}  // namespace

// ============================================================================
// Dense
// ============================================================================

Dense::Dense(std::size_t in_dim, std::size_t out_dim)
    : in(in_dim), out(out_dim), w(out_dim, in_dim), b(out_dim, 0.0),
      gw(out_dim, in_dim), gb(out_dim, 0.0) {}

void Dense::init(Rng& rng) {
    kaiming_uniform(w, in, rng);
    std::fill(b.begin(), b.end(), 0.0);
}

Mat Dense::apply(const Mat& x) const {
    if (x.cols != in) throw std::invalid_argument("Dense: input width mismatch");
    Mat y(x.rows, out);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
            y.at(r, o) = kern::dot(w.row(o), x.row(r), in) + b[o];
        }
    }
    return y;
}

Mat Dense::forward(const Mat& x) {
    x_ = x;
    return apply(x);
}

Mat Dense::backward(const Mat& dy) {
    Mat dx(x_.rows, in);
    for (std::size_t r = 0; r < x_.rows; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
            double g = dy.at(r, o);
            if (g == 0.0) continue;
            kern::axpy(in, g, x_.row(r), gw.row(o));
            kern::axpy(in, g, w.row(o), dx.row(r));
            gb[o] += g;
        }
    }
    return dx;
}

std::vector<ParamRef> Dense::params(const char* prefix) {
    std::string p(prefix);
    return {
        {p + ".w", w.v.data(), gw.v.data(), w.v.size()},
        {p + ".b", b.data(), gb.data(), b.size()},
    };
}

void Dense::zero_grad() {
    gw.zero();
    std::fill(gb.begin(), gb.end(), 0.0);
}

// ============================================================================
// Conv1d
// ============================================================================

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel)
    : in_ch(in_channels), out_ch(out_channels), k(kernel),
      w(out_channels, kernel * in_channels), b(out_channels, 0.0),
      gw(out_channels, kernel * in_channels), gb(out_channels, 0.0) {}

void Conv1d::init(Rng& rng) {
    kaiming_uniform(w, k * in_ch, rng);
    std::fill(b.begin(), b.end(), 0.0);
}

Mat Conv1d::apply(const Mat& x) const {
    if (x.cols != in_ch) throw std::invalid_argument("Conv1d: channel mismatch");
    if (x.rows < k) throw std::invalid_argument("Conv1d: input shorter than kernel");
    const std::size_t t_out = x.rows - k + 1;
    const std::size_t patch = k * in_ch;
    Mat y(t_out, out_ch);
    for (std::size_t t = 0; t < t_out; ++t) {
        // Rows t..t+k-1 are contiguous, so the patch is one flat span.
        const double* px = x.row(t);
        for (std::size_t o = 0; o < out_ch; ++o) {
            y.at(t, o) = kern::dot(w.row(o), px, patch) + b[o];
        }
    }
    return y;
}

Mat Conv1d::forward(const Mat& x) {
    x_ = x;
    return apply(x);
}

Mat Conv1d::backward(const Mat& dy) {
    const std::size_t t_out = x_.rows - k + 1;
    const std::size_t patch = k * in_ch;
    Mat dx(x_.rows, in_ch);
    for (std::size_t t = 0; t < t_out; ++t) {
        const double* px = x_.row(t);
        double* pdx = dx.row(t);
        for (std::size_t o = 0; o < out_ch; ++o) {
            double g = dy.at(t, o);
            if (g == 0.0) continue;
            kern::axpy(patch, g, px, gw.row(o));
            kern::axpy(patch, g, w.row(o), pdx);
            gb[o] += g;
        }
    }
    return dx;
}

std::vector<ParamRef> Conv1d::params(const char* prefix) {
    std::string p(prefix);
    return {
        {p + ".w", w.v.data(), gw.v.data(), w.v.size()},
        {p + ".b", b.data(), gb.data(), b.size()},
    };
}

void Conv1d::zero_grad() {
    gw.zero();
    std::fill(gb.begin(), gb.end(), 0.0);
}

// ============================================================================
// Activations / pooling
// ============================================================================

Mat Relu::forward(const Mat& x) {
    x_ = x;
    Mat y = x;
    for (double& v : y.v) v = v > 0.0 ? v : 0.0;
    return y;
}

Mat Relu::backward(const Mat& dy) const {
    Mat dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i) {
        if (x_.v[i] <= 0.0) dx.v[i] = 0.0;
    }
    return dx;
}

Mat Dropout::forward(const Mat& x, Rng& rng, bool training) {
    active_ = training && rate > 0.0;
    if (!active_) return x;
    mask_ = Mat(x.rows, x.cols);
    const double keep = 1.0 - rate;
    Mat y = x;
    for (std::size_t i = 0; i < y.v.size(); ++i) {
        mask_.v[i] = rng.uniform01() < keep ? 1.0 / keep : 0.0;
        y.v[i] *= mask_.v[i];
    }
    return y;
}

Mat Dropout::backward(const Mat& dy) const {
    if (!active_) return dy;
    Mat dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= mask_.v[i];
    return dx;
}

Mat GlobalMaxPool::forward(const Mat& x) {
    t_ = x.rows;
    c_ = x.cols;
    if (t_ == 0) throw std::invalid_argument("GlobalMaxPool: empty input");
    argmax_.assign(c_, 0);
    Mat y(1, c_);
    for (std::size_t c = 0; c < c_; ++c) {
        double best = x.at(0, c);
        for (std::size_t t = 1; t < t_; ++t) {
            if (x.at(t, c) > best) {
                best = x.at(t, c);
                argmax_[c] = t;
            }
        }
        y.at(0, c) = best;
    }
    return y;
}

Mat GlobalMaxPool::backward(const Mat& dy) const {
    Mat dx(t_, c_);
    for (std::size_t c = 0; c < c_; ++c) dx.at(argmax_[c], c) = dy.at(0, c);
    return dx;
}

Mat L2Normalize::forward(const Mat& x) {
    y_ = Mat(x.rows, x.cols);
    norm_.assign(x.rows, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double n = std::sqrt(kern::sumsq(x.row(r), x.cols));
        norm_[r] = std::max(n, 1e-12);
        for (std::size_t c = 0; c < x.cols; ++c) y_.at(r, c) = x.at(r, c) / norm_[r];
    }
    return y_;
}

Mat L2Normalize::backward(const Mat& dy) const {
    // d/dx (x/|x|) applied to dy: (dy - y (dy.y)) / |x|
    Mat dx(y_.rows, y_.cols);
    for (std::size_t r = 0; r < y_.rows; ++r) {
        double proj = kern::dot(dy.row(r), y_.row(r), y_.cols);
        for (std::size_t c = 0; c < y_.cols; ++c) {
            dx.at(r, c) = (dy.at(r, c) - y_.at(r, c) * proj) / norm_[r];
        }
    }
    return dx;
}

// ============================================================================
// Losses
// ============================================================================

Mat softmax(const Mat& logits) {
    Mat p(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        double mx = logits.at(r, 0);
        for (std::size_t c = 1; c < logits.cols; ++c) mx = std::max(mx, logits.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            p.at(r, c) = std::exp(logits.at(r, c) - mx);
            sum += p.at(r, c);
        }
        for (std::size_t c = 0; c < logits.cols; ++c) p.at(r, c) /= sum;
    }
    return p;
}

double SoftmaxCrossEntropy::forward(const Mat& logits, const std::vector<std::size_t>& targets) {
    if (targets.size() != logits.rows) {
        throw std::invalid_argument("SoftmaxCrossEntropy: target count mismatch");
    }
    probs_ = softmax(logits);
    targets_ = targets;
    double loss = 0.0;
    for (std::size_t r = 0; r < probs_.rows; ++r) {
        if (targets[r] >= probs_.cols) {
            throw std::invalid_argument("SoftmaxCrossEntropy: target out of range");
        }
        loss -= std::log(std::max(probs_.at(r, targets[r]), 1e-300));
    }
    return loss / static_cast<double>(probs_.rows);
}

Mat SoftmaxCrossEntropy::backward() const {
    Mat d = probs_;
    const double inv = 1.0 / static_cast<double>(probs_.rows);
    for (std::size_t r = 0; r < d.rows; ++r) {
        d.at(r, targets_[r]) -= 1.0;
        kern::scal(d.cols, inv, d.row(r));
    }
    return d;
}

// ============================================================================
// Optimizers
// ============================================================================

void Sgd::step(const std::vector<ParamRef>& ps) const {
    for (const auto& p : ps) kern::axpy(p.n, -lr, p.grad, p.value);
}

void Adam::step(const std::vector<ParamRef>& ps) {
    if (m_.empty()) {
        for (const auto& p : ps) {
            m_.emplace_back(p.n, 0.0);
            v_.emplace_back(p.n, 0.0);
        }
    }
    if (m_.size() != ps.size()) throw std::invalid_argument("Adam: parameter set changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const ParamRef& p = ps[i];
        if (m_[i].size() != p.n) throw std::invalid_argument("Adam: parameter shape changed");
        for (std::size_t j = 0; j < p.n; ++j) {
            double g = p.grad[j];
            m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * g;
            v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * g * g;
            double mhat = m_[i][j] / bc1;
            double vhat = v_[i][j] / bc2;
            p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace selfact::nn
