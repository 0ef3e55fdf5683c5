#include "selfact/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "selfact/errors.hpp"
#include "selfact/rng.hpp"

namespace selfact {

namespace {

using nn::Mat;

constexpr std::size_t kHiddenUnits = 1024;

Mat window_to_mat(const SensorWindow& window) {
    if (window.window_len == 0 || window.values.size() != window.window_len * 3) {
        throw std::invalid_argument("fine_tune: malformed window");
    }
    Mat x(window.window_len, 3);
    x.v = window.values;
    return x;
}

Embedding embed_eval(EncoderBackend backend, const EncoderModel& encoder,
                     const SensorWindow& window) {
    if (backend == EncoderBackend::kConv) return encode(encoder, window);
    return extract_stat_features(window);
}

Mat row_mat(const Embedding& e) {
    Mat m(1, e.size());
    m.v = e;
    return m;
}

// Head inference: fc1 -> ReLU -> out. Stateless.
Mat head_logits(const FineTuneHead& head, const Mat& e) {
    Mat h = head.fc1.apply(e);
    for (double& v : h.v) v = v > 0.0 ? v : 0.0;
    return head.out.apply(h);
}

// Training pass through the unfrozen conv stack; mirrors the pre-training
// graph (conv -> ReLU -> dropout between stages) minus the projection head.
struct ConvPass {
    nn::Relu relu1, relu2, relu3;
    nn::Dropout drop1, drop2;
    nn::GlobalMaxPool pool;

    Mat forward(EncoderModel& enc, const Mat& x, Rng& rng) {
        drop1.rate = enc.dropout_rate;
        drop2.rate = enc.dropout_rate;
        Mat h = relu1.forward(enc.conv1.forward(x));
        h = drop1.forward(h, rng, true);
        h = relu2.forward(enc.conv2.forward(h));
        h = drop2.forward(h, rng, true);
        h = relu3.forward(enc.conv3.forward(h));
        return pool.forward(h);
    }

    void backward(EncoderModel& enc, const Mat& de) {
        Mat d = pool.backward(de);
        d = enc.conv3.backward(relu3.backward(d));
        d = drop2.backward(d);
        d = enc.conv2.backward(relu2.backward(d));
        d = drop1.backward(d);
        enc.conv1.backward(relu1.backward(d));
    }
};

// Stratified-then-random validation split. Returns (train, val) index sets;
// throws PipelineError when any class would lose its every training sample.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    const std::vector<std::size_t>& classes, std::size_t n_classes, double fraction, Rng& rng) {
    const std::size_t n = classes.size();
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < n; ++i) by_class[classes[i]].push_back(i);

    const std::size_t val_total =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));

    // Per-class quotas: floor share first, remainders to the largest
    // fractional parts, always leaving each class one training sample.
    std::vector<std::size_t> quota(n_classes, 0);
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
        std::size_t cap = by_class[k].empty() ? 0 : by_class[k].size() - 1;
        quota[k] = std::min(cap, static_cast<std::size_t>(
                                     std::floor(fraction * static_cast<double>(by_class[k].size()))));
        assigned += quota[k];
    }
    if (assigned < val_total) {
        std::vector<std::size_t> order(n_classes);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            double fa = fraction * static_cast<double>(by_class[a].size()) - std::floor(fraction * static_cast<double>(by_class[a].size()));
            double fb = fraction * static_cast<double>(by_class[b].size()) - std::floor(fraction * static_cast<double>(by_class[b].size()));
            return fa > fb;
        });
        bool progress = true;
        while (assigned < val_total && progress) {
            progress = false;
            for (std::size_t k : order) {
                if (assigned == val_total) break;
                std::size_t cap = by_class[k].empty() ? 0 : by_class[k].size() - 1;
                if (quota[k] < cap) {
                    ++quota[k];
                    ++assigned;
                    progress = true;
                }
            }
        }
    }

    std::vector<std::size_t> train_idx, val_idx;
    if (assigned > 0) {
        for (std::size_t k = 0; k < n_classes; ++k) {
            rng.shuffle(by_class[k]);
            for (std::size_t i = 0; i < by_class[k].size(); ++i) {
                (i < quota[k] ? val_idx : train_idx).push_back(by_class[k][i]);
            }
        }
    } else {
        // Class counts don't permit stratification (e.g. all singletons):
        // fall back to a plain random split.
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        rng.shuffle(all);
        val_idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(val_total));
        train_idx.assign(all.begin() + static_cast<std::ptrdiff_t>(val_total), all.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    return {train_idx, val_idx};
}

}  // namespace

std::size_t FineTuneHead::class_index(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return i;
    }
    throw std::invalid_argument("class_index: unknown label '" + label + "'");
}

FineTuneHead build_head(const std::vector<LabeledWindow>& labeled, std::size_t embed_dim,
                        std::uint64_t seed) {
    if (labeled.empty()) throw std::invalid_argument("build_head: empty labeled set");
    if (embed_dim == 0) throw std::invalid_argument("build_head: embed_dim must be >= 1");

    FineTuneHead head;
    for (const auto& [w, label] : labeled) {
        if (std::find(head.labels.begin(), head.labels.end(), label) == head.labels.end()) {
            head.labels.push_back(label);
        }
    }

    head.fc1 = nn::Dense(embed_dim, kHiddenUnits);
    Rng fc1_rng(derive_seed(seed, "finetune/fc1"));
    head.fc1.init(fc1_rng);

    // Output rows keyed by label, not by index: permuting the class order
    // permutes the initial weights identically.
    head.out = nn::Dense(kHiddenUnits, head.labels.size());
    const double bound = std::sqrt(6.0 / static_cast<double>(kHiddenUnits));
    for (std::size_t r = 0; r < head.labels.size(); ++r) {
        Rng row_rng(derive_seed(seed, "finetune/out/" + head.labels[r]));
        for (std::size_t j = 0; j < kHiddenUnits; ++j) {
            head.out.w.at(r, j) = row_rng.uniform(-bound, bound);
        }
        head.out.b[r] = 0.0;
    }
    return head;
}

FineTuneResult fine_tune(const std::vector<LabeledWindow>& labeled, EncoderBackend backend,
                         const EncoderModel* encoder, const FineTuneConfig& config) {
    if (config.epochs == 0) throw std::invalid_argument("fine_tune: epochs must be >= 1");
    if (config.batch_size == 0) throw std::invalid_argument("fine_tune: batch_size must be >= 1");
    if (config.patience == 0) throw std::invalid_argument("fine_tune: patience must be >= 1");
    if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
        throw std::invalid_argument("fine_tune: validation_fraction must be in (0, 1)");
    }
    if (config.lr <= 0.0) throw std::invalid_argument("fine_tune: lr must be > 0");
    if (labeled.size() < 2) {
        throw std::invalid_argument("fine_tune: need at least 2 labeled samples for the validation split");
    }
    if (backend == EncoderBackend::kConv && encoder == nullptr) {
        throw std::invalid_argument("fine_tune: conv backend needs an encoder");
    }

    FineTuneResult res;
    Classifier& clf = res.classifier;
    clf.backend = backend;
    if (backend == EncoderBackend::kConv) clf.encoder = *encoder;

    const std::size_t embed_dim =
        backend == EncoderBackend::kConv ? EncoderModel::kEmbeddingDim : kStatFeatureDim;
    clf.head = build_head(labeled, embed_dim, config.seed);
    const std::size_t n = labeled.size();

    std::vector<std::size_t> classes(n);
    for (std::size_t i = 0; i < n; ++i) classes[i] = clf.head.class_index(labeled[i].second);

    Rng split_rng(derive_seed(config.seed, "finetune/split"));
    auto [train_idx, val_idx] =
        split_validation(classes, clf.head.labels.size(), config.validation_fraction, split_rng);

    // The split must not starve any class of training data.
    {
        std::vector<std::size_t> train_count(clf.head.labels.size(), 0);
        for (std::size_t i : train_idx) ++train_count[classes[i]];
        for (std::size_t k = 0; k < train_count.size(); ++k) {
            if (train_count[k] == 0) {
                throw PipelineError("fine_tune: validation split leaves class '" +
                                    clf.head.labels[k] + "' with no training samples");
            }
        }
    }

    const bool train_encoder = backend == EncoderBackend::kConv && config.unfreeze_encoder;
    if (backend == EncoderBackend::kStatistical && config.unfreeze_encoder) {
        res.stats.notes.push_back("unfreeze_encoder ignored: statistical backend has no encoder");
    }

    // Frozen backends embed each window exactly once.
    std::vector<Embedding> fixed_embed;
    if (!train_encoder) {
        fixed_embed.reserve(n);
        for (const auto& [w, label] : labeled) fixed_embed.push_back(embed_eval(backend, clf.encoder, w));
    }

    std::vector<nn::ParamRef> params;
    for (auto& p : clf.head.fc1.params("head.fc1")) params.push_back(p);
    for (auto& p : clf.head.out.params("head.out")) params.push_back(p);
    if (train_encoder) {
        for (auto& p : clf.encoder.params()) params.push_back(p);
    }

    nn::Adam adam;
    adam.lr = config.lr;
    Rng order_rng(derive_seed(config.seed, "finetune/order"));
    Rng drop_rng(derive_seed(config.seed, "finetune/dropout"));
    ConvPass conv_pass;
    nn::Relu head_relu;
    nn::SoftmaxCrossEntropy ce;

    auto val_loss = [&]() {
        double sum = 0.0;
        for (std::size_t i : val_idx) {
            Embedding e = train_encoder ? embed_eval(backend, clf.encoder, labeled[i].first)
                                        : fixed_embed[i];
            Mat probs = nn::softmax(head_logits(clf.head, row_mat(e)));
            sum += -std::log(std::max(probs.at(0, classes[i]), 1e-300));
        }
        return sum / static_cast<double>(val_idx.size());
    };

    struct Snapshot {
        std::vector<std::vector<double>> values;
    } best;
    auto take_snapshot = [&]() {
        best.values.clear();
        for (const auto& p : params) best.values.emplace_back(p.value, p.value + p.n);
    };
    auto restore_snapshot = [&]() {
        for (std::size_t i = 0; i < params.size(); ++i) {
            std::copy(best.values[i].begin(), best.values[i].end(), params[i].value);
        }
    };

    FineTuneStats& st = res.stats;
    std::size_t bad_epochs = 0;
    std::vector<std::size_t> order = train_idx;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            clf.head.fc1.zero_grad();
            clf.head.out.zero_grad();
            if (train_encoder) clf.encoder.zero_grad();
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t i = order[bi];
                Mat e = train_encoder
                            ? conv_pass.forward(clf.encoder, window_to_mat(labeled[i].first), drop_rng)
                            : row_mat(fixed_embed[i]);
                Mat logits = clf.head.out.forward(head_relu.forward(clf.head.fc1.forward(e)));
                ce.forward(logits, {classes[i]});
                Mat dlogits = ce.backward();
                for (double& v : dlogits.v) v *= inv;  // batch mean
                Mat de = clf.head.fc1.backward(head_relu.backward(clf.head.out.backward(dlogits)));
                if (train_encoder) conv_pass.backward(clf.encoder, de);
            }
            adam.step(params);
        }

        const double vl = val_loss();
        st.val_loss_history.push_back(vl);
        st.epochs_run = epoch;
        if (vl < st.best_val_loss) {
            st.best_val_loss = vl;
            st.best_epoch = epoch;
            take_snapshot();
            bad_epochs = 0;
        } else if (++bad_epochs >= config.patience) {
            break;
        }
    }
    restore_snapshot();

    std::size_t correct = 0;
    for (std::size_t i : train_idx) {
        if (predict(clf, labeled[i].first).first == labeled[i].second) ++correct;
    }
    st.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_idx.size());
    return res;
}

std::vector<double> predict_proba(const Classifier& classifier, const SensorWindow& window) {
    Embedding e = embed_eval(classifier.backend, classifier.encoder, window);
    Mat probs = nn::softmax(head_logits(classifier.head, row_mat(e)));
    return probs.v;
}

std::pair<std::string, double> predict(const Classifier& classifier, const SensorWindow& window) {
    auto probs = predict_proba(classifier, window);
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;  // ties keep the smaller index
    }
    return {classifier.head.labels[best], probs[best]};
}

ParamContainer to_container(const Classifier& classifier) {
    ParamContainer c;
    c.meta["kind"] = "classifier";
    c.meta["backend"] = classifier.backend == EncoderBackend::kConv ? "conv" : "statistical";
    c.labels = classifier.head.labels;
    c.tensors.push_back({"head.fc1.w",
                         {classifier.head.fc1.w.rows, classifier.head.fc1.w.cols},
                         classifier.head.fc1.w.v});
    c.tensors.push_back({"head.fc1.b", {classifier.head.fc1.b.size()}, classifier.head.fc1.b});
    c.tensors.push_back({"head.out.w",
                         {classifier.head.out.w.rows, classifier.head.out.w.cols},
                         classifier.head.out.w.v});
    c.tensors.push_back({"head.out.b", {classifier.head.out.b.size()}, classifier.head.out.b});
    if (classifier.backend == EncoderBackend::kConv) {
        auto enc = to_container(classifier.encoder);
        for (auto& t : enc.tensors) {
            t.name = "encoder." + t.name;
            c.tensors.push_back(std::move(t));
        }
        c.meta["dropout_rate"] = enc.meta.at("dropout_rate");
    }
    return c;
}

Classifier classifier_from_container(const ParamContainer& c) {
    auto kind = c.meta.find("kind");
    if (kind == c.meta.end() || kind->second != "classifier") {
        throw DataError("container is not a classifier");
    }
    auto backend_it = c.meta.find("backend");
    if (backend_it == c.meta.end()) throw DataError("classifier load: meta 'backend' is missing");
    if (c.labels.empty()) throw DataError("classifier load: empty label table");

    Classifier clf;
    clf.backend = backend_it->second == "conv" ? EncoderBackend::kConv : EncoderBackend::kStatistical;
    clf.head.labels = c.labels;

    auto tensor = [&](const std::string& name) -> const ParamContainer::Tensor& {
        const auto* t = c.find(name);
        if (!t) throw DataError("classifier load: tensor '" + name + "' is missing");
        return *t;
    };
    const auto& fc1w = tensor("head.fc1.w");
    if (fc1w.dims.size() != 2) throw DataError("classifier load: head.fc1.w must be rank 2");
    clf.head.fc1 = nn::Dense(fc1w.dims[1], fc1w.dims[0]);
    clf.head.fc1.w.v = fc1w.values;
    const auto& fc1b = tensor("head.fc1.b");
    if (fc1b.values.size() != fc1w.dims[0]) throw DataError("classifier load: head.fc1.b size mismatch");
    clf.head.fc1.b = fc1b.values;

    const auto& outw = tensor("head.out.w");
    if (outw.dims.size() != 2 || outw.dims[0] != c.labels.size() || outw.dims[1] != fc1w.dims[0]) {
        throw DataError("classifier load: head.out.w shape does not match labels/hidden units");
    }
    clf.head.out = nn::Dense(outw.dims[1], outw.dims[0]);
    clf.head.out.w.v = outw.values;
    const auto& outb = tensor("head.out.b");
    if (outb.values.size() != outw.dims[0]) throw DataError("classifier load: head.out.b size mismatch");
    clf.head.out.b = outb.values;

    if (clf.backend == EncoderBackend::kConv) {
        ParamContainer enc;
        enc.meta["kind"] = "encoder";
        if (auto it = c.meta.find("dropout_rate"); it != c.meta.end()) {
            enc.meta["dropout_rate"] = it->second;
        }
        for (const auto& t : c.tensors) {
            if (t.name.rfind("encoder.", 0) == 0) {
                enc.tensors.push_back({t.name.substr(8), t.dims, t.values});
            }
        }
        encoder_from_container(enc, clf.encoder);
    }
    return clf;
}

}  // namespace selfact
