#include "selfact/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "selfact/kernels.hpp"

namespace selfact {

using nn::Mat;

// ============================================================================
// Statistical features
// ============================================================================

Embedding extract_stat_features(const SensorWindow& window) {
    const std::size_t n = window.window_len;
    if (n == 0 || window.values.size() != n * 3) {
        throw std::invalid_argument("extract_stat_features: malformed window");
    }
    const double dn = static_cast<double>(n);

    std::array<double, 3> mean{}, var{}, mn{}, mx{}, energy{};
    for (std::size_t a = 0; a < 3; ++a) {
        mn[a] = mx[a] = window.at(0, a);
        for (std::size_t i = 0; i < n; ++i) {
            double v = window.at(i, a);
            mean[a] += v;
            energy[a] += v * v;
            mn[a] = std::min(mn[a], v);
            mx[a] = std::max(mx[a], v);
        }
        mean[a] /= dn;
        energy[a] /= dn;
        for (std::size_t i = 0; i < n; ++i) {
            double d = window.at(i, a) - mean[a];
            var[a] += d * d;
        }
        var[a] /= dn;
    }

    Embedding f;
    f.reserve(kStatFeatureDim);
    for (std::size_t a = 0; a < 3; ++a) {
        f.push_back(mean[a]);
        f.push_back(std::sqrt(var[a]));
        f.push_back(mn[a]);
        f.push_back(mx[a]);
        f.push_back(energy[a]);
    }
    // Pairwise Pearson correlations xy, xz, yz; 0 under zero variance.
    const std::size_t pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& p : pairs) {
        std::size_t a = p[0], b = p[1];
        if (var[a] == 0.0 || var[b] == 0.0) {
            f.push_back(0.0);
            continue;
        }
        double cov = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cov += (window.at(i, a) - mean[a]) * (window.at(i, b) - mean[b]);
        }
        cov /= dn;
        f.push_back(cov / (std::sqrt(var[a]) * std::sqrt(var[b])));
    }
    return f;
}

// ============================================================================
// Convolutional encoder
// ============================================================================

void EncoderModel::init(Rng& rng) {
    conv1.init(rng);
    conv2.init(rng);
    conv3.init(rng);
}

std::vector<nn::ParamRef> EncoderModel::params() {
    std::vector<nn::ParamRef> ps;
    for (auto& p : conv1.params("conv1")) ps.push_back(std::move(p));
    for (auto& p : conv2.params("conv2")) ps.push_back(std::move(p));
    for (auto& p : conv3.params("conv3")) ps.push_back(std::move(p));
    return ps;
}

void EncoderModel::zero_grad() {
    conv1.zero_grad();
    conv2.zero_grad();
    conv3.zero_grad();
}

namespace {

Mat window_to_mat(const SensorWindow& window) {
    if (window.window_len == 0 || window.values.size() != window.window_len * 3) {
        throw std::invalid_argument("encode: malformed window");
    }
    Mat x(window.window_len, 3);
    x.v = window.values;
    return x;
}

void relu_inplace(Mat& m) {
    for (double& v : m.v) v = v > 0.0 ? v : 0.0;
}

}  // namespace

Embedding encode(const EncoderModel& model, const SensorWindow& window) {
    Mat h = model.conv1.apply(window_to_mat(window));
    relu_inplace(h);
    h = model.conv2.apply(h);
    relu_inplace(h);
    h = model.conv3.apply(h);
    relu_inplace(h);
    Embedding e(h.cols);
    for (std::size_t c = 0; c < h.cols; ++c) {
        double best = h.at(0, c);
        for (std::size_t t = 1; t < h.rows; ++t) best = std::max(best, h.at(t, c));
        e[c] = best;
    }
    return e;
}

void ProjectionHead::init(Rng& rng) {
    fc1.init(rng);
    fc2.init(rng);
    fc3.init(rng);
}

std::vector<nn::ParamRef> ProjectionHead::params() {
    std::vector<nn::ParamRef> ps;
    for (auto& p : fc1.params("proj1")) ps.push_back(std::move(p));
    for (auto& p : fc2.params("proj2")) ps.push_back(std::move(p));
    for (auto& p : fc3.params("proj3")) ps.push_back(std::move(p));
    return ps;
}

void ProjectionHead::zero_grad() {
    fc1.zero_grad();
    fc2.zero_grad();
    fc3.zero_grad();
}

// ============================================================================
// Rotation augmentation
// ============================================================================

Rotation random_rotation_matrix(Rng& rng) {
    // Shoemake's uniform quaternion.
    const double two_pi = 2.0 * 3.14159265358979323846;
    double u1 = rng.uniform01(), u2 = rng.uniform01(), u3 = rng.uniform01();
    double x = std::sqrt(1.0 - u1) * std::sin(two_pi * u2);
    double y = std::sqrt(1.0 - u1) * std::cos(two_pi * u2);
    double z = std::sqrt(u1) * std::sin(two_pi * u3);
    double w = std::sqrt(u1) * std::cos(two_pi * u3);
    return Rotation{
        1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
        2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
        2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y),
    };
}

SensorWindow rotate_window(const SensorWindow& window, const Rotation& r) {
    SensorWindow out = window;
    for (std::size_t i = 0; i < window.window_len; ++i) {
        double x = window.at(i, 0), y = window.at(i, 1), z = window.at(i, 2);
        out.values[i * 3 + 0] = r[0] * x + r[1] * y + r[2] * z;
        out.values[i * 3 + 1] = r[3] * x + r[4] * y + r[5] * z;
        out.values[i * 3 + 2] = r[6] * x + r[7] * y + r[8] * z;
    }
    return out;
}

// ============================================================================
// Contrastive objective
// ============================================================================

namespace {

// Shared NT-Xent core; grad_a/grad_b may be null when only the loss is needed.
double nt_xent_core(const Mat& a, const Mat& b, double temperature, Mat* grad_a, Mat* grad_b) {
    if (temperature <= 0.0) throw std::invalid_argument("nt_xent: temperature must be > 0");
    if (a.rows != b.rows || a.cols != b.cols) {
        throw std::invalid_argument("nt_xent: view shape mismatch");
    }
    if (a.rows == 0) throw std::invalid_argument("nt_xent: empty batch");

    const std::size_t n = a.rows, m = 2 * n, d = a.cols;

    // Stack [a; b] and L2-normalize rows so similarities are cosine.
    Mat u(m, d);
    std::vector<double> norm(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* src = i < n ? a.row(i) : b.row(i - n);
        double nrm = std::sqrt(kern::sumsq(src, d));
        if (nrm < 1e-300) throw std::invalid_argument("nt_xent: zero-norm embedding");
        norm[i] = nrm;
        for (std::size_t c = 0; c < d; ++c) u.at(i, c) = src[c] / nrm;
    }

    Mat s(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double v = kern::dot(u.row(i), u.row(j), d) / temperature;
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
    }

    auto positive = [n, m](std::size_t i) { return (i + n) % m; };

    // Per-anchor loss: -s(i, pos) + logsumexp_{j != i} s(i, j); the gradient
    // w.r.t. each similarity is softmax probability minus the positive
    // indicator, averaged over the 2N anchors.
    double loss = 0.0;
    Mat g;  // d(loss)/d(s[i][j]), ordered pairs
    if (grad_a != nullptr) g = Mat(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < m; ++j) {
            if (j != i) mx = std::max(mx, s.at(i, j));
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j != i) denom += std::exp(s.at(i, j) - mx);
        }
        loss += -s.at(i, positive(i)) + mx + std::log(denom);
        if (grad_a != nullptr) {
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                double p = std::exp(s.at(i, j) - mx) / denom;
                g.at(i, j) = (p - (j == positive(i) ? 1.0 : 0.0)) / static_cast<double>(m);
            }
        }
    }
    loss /= static_cast<double>(m);

    if (grad_a != nullptr) {
        // du_i = sum_j (g[i][j] + g[j][i]) u_j / temperature, then back through
        // the row normalization: dz = (du - u (du.u)) / |z|.
        *grad_a = Mat(n, d);
        *grad_b = Mat(n, d);
        std::vector<double> du(d);
        for (std::size_t i = 0; i < m; ++i) {
            std::fill(du.begin(), du.end(), 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                double c = (g.at(i, j) + g.at(j, i)) / temperature;
                if (c != 0.0) kern::axpy(d, c, u.row(j), du.data());
            }
            double proj = kern::dot(du.data(), u.row(i), d);
            double* dst = i < n ? grad_a->row(i) : grad_b->row(i - n);
            for (std::size_t c = 0; c < d; ++c) {
                dst[c] = (du[c] - u.at(i, c) * proj) / norm[i];
            }
        }
    }
    return loss;
}

}  // namespace

double nt_xent_loss(const Mat& view_a, const Mat& view_b, double temperature) {
    return nt_xent_core(view_a, view_b, temperature, nullptr, nullptr);
}

double nt_xent_loss_grad(const Mat& view_a, const Mat& view_b, double temperature, Mat& grad_a,
                         Mat& grad_b) {
    return nt_xent_core(view_a, view_b, temperature, &grad_a, &grad_b);
}

// ============================================================================
// Pre-training
// ============================================================================

namespace {

// One view's training-mode pass. The layer objects hold the caches, so the
// pass is rebuilt (same dropout seed) right before its backward.
struct TrainPass {
    nn::Relu relu1, relu2, relu3, hrelu1, hrelu2;
    nn::Dropout drop1, drop2;
    nn::GlobalMaxPool pool;

    Mat forward(EncoderModel& enc, ProjectionHead& head, const Mat& x, Rng& rng) {
        drop1.rate = enc.dropout_rate;
        drop2.rate = enc.dropout_rate;
        Mat h = relu1.forward(enc.conv1.forward(x));
        h = drop1.forward(h, rng, true);
        h = relu2.forward(enc.conv2.forward(h));
        h = drop2.forward(h, rng, true);
        h = relu3.forward(enc.conv3.forward(h));
        h = pool.forward(h);
        h = hrelu1.forward(head.fc1.forward(h));
        h = hrelu2.forward(head.fc2.forward(h));
        return head.fc3.forward(h);
    }

    void backward(EncoderModel& enc, ProjectionHead& head, const Mat& dproj) {
        Mat d = head.fc3.backward(dproj);
        d = head.fc2.backward(hrelu2.backward(d));
        d = head.fc1.backward(hrelu1.backward(d));
        d = pool.backward(d);
        d = enc.conv3.backward(relu3.backward(d));
        d = drop2.backward(d);
        d = enc.conv2.backward(relu2.backward(d));
        d = drop1.backward(d);
        enc.conv1.backward(relu1.backward(d));
    }
};

}  // namespace

PretrainResult pretrain(const std::vector<SensorWindow>& windows, const PretrainConfig& config) {
    if (windows.empty()) throw std::invalid_argument("pretrain: no windows");
    if (config.epochs == 0) throw std::invalid_argument("pretrain: epochs must be >= 1");
    if (config.batch_size == 0) throw std::invalid_argument("pretrain: batch_size must be >= 1");
    if (config.temperature <= 0.0) throw std::invalid_argument("pretrain: temperature must be > 0");

    Rng root(derive_seed(config.seed, "pretrain"));
    PretrainResult res;
    {
        Rng init_rng = root.fork("init/encoder");
        res.model.init(init_rng);
    }
    ProjectionHead head;
    {
        Rng init_rng = root.fork("init/head");
        head.init(init_rng);
    }

    const std::size_t batch = std::min(config.batch_size, windows.size());
    const std::size_t steps_per_epoch = std::max<std::size_t>(1, windows.size() / config.batch_size);
    const std::size_t total_steps = config.epochs * steps_per_epoch;

    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    nn::Sgd sgd;
    auto model_params = res.model.params();
    auto head_params = head.params();
    std::vector<nn::ParamRef> all_params = model_params;
    all_params.insert(all_params.end(), head_params.begin(), head_params.end());

    struct View {
        Mat input;
        std::uint64_t drop_seed;
    };

    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng erng = root.fork("epoch/" + std::to_string(epoch));
        erng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step, ++t) {
            // Two independently rotated views per window.
            std::vector<View> va(batch), vb(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                const SensorWindow& w = windows[order[step * batch + i]];
                va[i].input = window_to_mat(rotate_window(w, random_rotation_matrix(erng)));
                vb[i].input = window_to_mat(rotate_window(w, random_rotation_matrix(erng)));
                va[i].drop_seed = erng.next_u64();
                vb[i].drop_seed = erng.next_u64();
            }

            Mat proj_a(batch, 50), proj_b(batch, 50);
            TrainPass pass;
            for (std::size_t i = 0; i < batch; ++i) {
                Rng ra(va[i].drop_seed);
                Mat pa = pass.forward(res.model, head, va[i].input, ra);
                std::copy(pa.v.begin(), pa.v.end(), proj_a.row(i));
                Rng rb(vb[i].drop_seed);
                Mat pb = pass.forward(res.model, head, vb[i].input, rb);
                std::copy(pb.v.begin(), pb.v.end(), proj_b.row(i));
            }

            Mat da, db;
            double loss = nt_xent_loss_grad(proj_a, proj_b, config.temperature, da, db);
            epoch_loss += loss;

            res.model.zero_grad();
            head.zero_grad();
            for (std::size_t i = 0; i < batch; ++i) {
                // Replay each view's forward (same dropout mask) so the layer
                // caches match, then accumulate its gradient.
                Mat dview(1, 50);
                Rng ra(va[i].drop_seed);
                pass.forward(res.model, head, va[i].input, ra);
                std::copy(da.row(i), da.row(i) + 50, dview.row(0));
                pass.backward(res.model, head, dview);
                Rng rb(vb[i].drop_seed);
                pass.forward(res.model, head, vb[i].input, rb);
                std::copy(db.row(i), db.row(i) + 50, dview.row(0));
                pass.backward(res.model, head, dview);
            }

            sgd.lr = config.base_lr * 0.5 *
                     (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(t) /
                                     static_cast<double>(total_steps)));
            sgd.step(all_params);
        }
        res.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
    }
    res.steps = t;
    return res;
}

}  // namespace selfact
