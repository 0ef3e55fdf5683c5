#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "selfact/encoder.hpp"
#include "selfact/nn.hpp"
#include "selfact/serialize.hpp"
#include "selfact/session.hpp"

// Personalized classification: a dynamically-sized head (1024-unit dense +
// ReLU + one softmax unit per observed class) trained with Adam on the
// actively-labeled windows, with an early-stopped validation split.

namespace selfact {

using LabeledWindow = std::pair<SensorWindow, std::string>;

struct FineTuneConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 1;
    double lr = 1e-3;  // Adam, beta1 0.9 / beta2 0.999 / eps 1e-8
    std::size_t patience = 5;          // epochs without val improvement
    double validation_fraction = 0.1;  // in (0, 1)
    bool unfreeze_encoder = true;      // conv backend only
    std::uint64_t seed = 1;
};

struct FineTuneHead {
    nn::Dense fc1;  // embed_dim -> 1024
    nn::Dense out;  // 1024 -> labels.size()
    std::vector<std::string> labels;  // class index -> label, first appearance order

    std::size_t class_index(const std::string& label) const;  // throws when absent
};

// Head over the distinct labels of the labeled set, in first-appearance
// order. Each output row is seeded from (seed, label) rather than from the
// class index, so reordering the classes permutes the initial weights with
// them. Throws std::invalid_argument on an empty labeled set.
FineTuneHead build_head(const std::vector<LabeledWindow>& labeled, std::size_t embed_dim,
                        std::uint64_t seed);

struct Classifier {
    EncoderBackend backend = EncoderBackend::kStatistical;
    EncoderModel encoder;  // meaningful for kConv only
    FineTuneHead head;
};

struct FineTuneStats {
    std::size_t epochs_run = 0;
    std::vector<double> val_loss_history;  // one entry per executed epoch
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;  // 1-based epoch of the restored parameters
    double train_accuracy = 0.0;
    std::vector<std::string> notes;
};

struct FineTuneResult {
    Classifier classifier;
    FineTuneStats stats;
};

// Adam + cross-entropy over the labeled windows, validated once per epoch on
// a stratified split (random when class counts don't permit stratification);
// training stops when the budget is exhausted or the validation loss has not
// improved for `patience` consecutive epochs, and the best-validation-loss
// parameters are restored. Deterministic given config.seed. Throws
// std::invalid_argument on bad config, fewer than 2 labeled samples, or a
// missing encoder for the conv backend; throws PipelineError when the split
// would leave a class with no training samples (names the class).
FineTuneResult fine_tune(const std::vector<LabeledWindow>& labeled, EncoderBackend backend,
                         const EncoderModel* encoder, const FineTuneConfig& config);

// Softmax probabilities in label-table order. Deterministic.
std::vector<double> predict_proba(const Classifier& classifier, const SensorWindow& window);

// Argmax label (ties -> smallest class index) and its probability.
std::pair<std::string, double> predict(const Classifier& classifier, const SensorWindow& window);

ParamContainer to_container(const Classifier& classifier);
Classifier classifier_from_container(const ParamContainer& c);

}  // namespace selfact
