#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "selfact/dataset.hpp"
#include "selfact/encoder.hpp"
#include "selfact/finetune.hpp"
#include "selfact/session.hpp"

// Leave-one-subject-out evaluation: each user is replayed through a full
// session (accumulate -> cluster -> active learning -> fine-tune) at every
// accumulation threshold, and the resulting classifier is scored on the
// windows that were never labeled.

namespace selfact {

struct ExperimentConfig {
    // Data: CSV files, or the synthetic generator when no paths are given.
    std::vector<std::string> csv_paths;
    DatasetSpec dataset;
    SynthSpec synth;  // synth.seed is overridden from the root seed

    EncoderBackend backend = EncoderBackend::kStatistical;
    SessionConfig session;    // acc_th is derived per fold from the threshold
    PretrainConfig pretrain;  // conv backend only
    FineTuneConfig finetune;

    // Accumulation thresholds as fractions of the test user's window count.
    std::vector<double> thresholds = {0.50, 0.75, 0.90, 0.95};
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
};

struct FoldResult {
    std::string user;
    double threshold = 0.0;
    bool skipped = false;   // no session ran; excluded from averages
    std::string note;       // skip reason or scoring annotation
    std::size_t cluster_count = 0;
    std::size_t queries = 0;
    std::size_t al_stream_len = 0;
    double al_rate = 0.0;
    double weighted_f1 = 0.0;
    std::vector<std::pair<std::string, double>> per_class_f1;  // sorted by label
    double runtime_sec = 0.0;
};

struct ThresholdSummary {
    double threshold = 0.0;
    std::size_t folds = 0;  // non-skipped folds averaged
    double f1 = 0.0;
    double al_rate = 0.0;
    double clusters = 0.0;
    double queries = 0.0;
};

struct Report {
    std::vector<FoldResult> folds;          // user-major, threshold-minor
    std::vector<ThresholdSummary> means;    // ascending threshold
    std::string backend_name;
    std::uint64_t seed = 0;
    std::string config_hash;   // 16 hex digits
    std::string timestamp;     // ISO-8601 UTC, excluded from determinism checks
    double runtime_sec = 0.0;  // ditto
};

// ============================================================================
// Metrics
// ============================================================================

// Per-class F1 weighted by class support in `truths`. Classes appearing only
// in predictions carry zero weight; a class's F1 is 0 when precision and
// recall are both undefined. Throws std::invalid_argument on empty or
// mismatched inputs.
double weighted_f1(const std::vector<std::string>& predictions,
                   const std::vector<std::string>& truths);

// (label, F1) for every class present in truths or predictions, sorted by
// label. Same preconditions as weighted_f1.
std::vector<std::pair<std::string, double>> per_class_f1(
    const std::vector<std::string>& predictions, const std::vector<std::string>& truths);

// queries / al_stream_len; 0 when the stream is empty. Throws
// std::invalid_argument when queries > al_stream_len.
double al_rate(std::size_t queries, std::size_t al_stream_len);

// ============================================================================
// Evaluation
// ============================================================================

// Materializes the configured data source: synthetic generation when no CSV
// paths are set (geometry and seed taken from the experiment config),
// otherwise per-user concatenation of all CSV files restored to time order.
std::vector<Recording> gather_recordings(const ExperimentConfig& cfg);

// Runs the LOSO sweep. Deterministic given config.seed (folds may execute in
// parallel under config.jobs; results are position-stable). Throws
// std::invalid_argument on fewer than 2 users or thresholds outside (0,1);
// DataError on unreadable/unlabeled data. Degenerate folds (threshold split
// infeasible, clustering found no clusters) are marked skipped with a note;
// folds whose queries cannot train a classifier score weighted_f1 = 0 with a
// note.
Report run_loso(const ExperimentConfig& config);

// Writes summary.txt (key=value), folds.csv, and — when the sweep is
// non-empty — three plot files (f1_vs_threshold.svg, clusters_vs_threshold.svg,
// al_rate_vs_threshold.svg) under out_dir, creating it if needed. Re-emitting
// the same Report is byte-identical. Throws DataError when out_dir is not
// writable.
void emit_report(const Report& report, const std::string& out_dir);

}  // namespace selfact
