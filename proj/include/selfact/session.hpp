#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "selfact/clusterstore.hpp"
#include "selfact/dataset.hpp"
#include "selfact/encoder.hpp"
#include "selfact/reduction.hpp"

// Per-user client state machine: accumulate embeddings up to ACC_TH, fit the
// personal reducer, cluster once, then for every further sample match the
// nearest cluster, decide whether to ask the user for a label, and insert the
// point regardless of the decision. Fine-tuning is triggered at end of
// stream via finish().

namespace selfact {

enum class EncoderBackend { kStatistical, kConv };

struct SessionConfig {
    std::size_t acc_th = 100;  // absolute accumulation threshold
    // Segmentation geometry of the stream feeding this session (owned by the
    // harness; recorded here so a session is self-describing).
    std::size_t window_len = 100;
    double overlap = 0.5;
    std::size_t reducer_out_dim = 2;
    double dbscan_eps = 0.0;  // <= 0 selects auto_eps (median 4-NN distance)
    std::size_t dbscan_min_pts = 10;
    EncoderBackend backend = EncoderBackend::kStatistical;
    const EncoderModel* conv_model = nullptr;  // required for kConv, else unused
};

enum class Phase { kAccumulating, kActiveLearning, kFinished };

struct StepEvent {
    enum class Kind { kAccumulated, kClustersBuilt, kQuery, kSilent };
    Kind kind = Kind::kAccumulated;
    std::size_t cluster_count = 0;  // kClustersBuilt only
    int cluster_id = -1;            // matched cluster for kQuery / kSilent
    bool queried = false;
    std::string label;              // oracle label captured on kQuery
};

// Algorithm 2's density test: would inserting the point lower the cluster's
// average pairwise distance? avg is the current T_c, avg' the hypothetical
// average after insertion; returns avg' < avg (strict). A singleton cluster
// has avg = 0, so it can never trigger a query. Read-only.
bool active_learning_needed(const ClusterStore& store, int cluster_id,
                            const ReducedEmbedding& point);

class Session {
public:
    explicit Session(const SessionConfig& config);

    // Advances the state machine by one window. Throws PipelineError when the
    // session is finished or when clustering at the threshold yields no
    // clusters (accumulation insufficient).
    StepEvent process_sample(const SensorWindow& window);

    struct FinishResult {
        std::vector<std::pair<SensorWindow, std::string>> labeled;  // queried windows
        std::size_t queries_issued = 0;
        std::size_t al_stream_len = 0;  // post-threshold samples processed
    };

    // Ends the stream: phase must be ActiveLearning (the accumulation
    // threshold was reached). Returns the labeled set and query statistics.
    FinishResult finish();

    Phase phase() const { return phase_; }
    std::size_t samples_seen() const { return samples_seen_; }
    const ClusterStore& store() const { return store_; }
    const ReducerModel& reducer() const { return reducer_; }

    // Append-only audit trace, one line per processed sample:
    //   seq,phase,event,cluster_id,queried,label
    // cluster_id carries the cluster count on the clusters_built line and -1
    // while accumulating; label is the verbatim oracle label on query lines.
    const std::vector<std::string>& trace() const { return trace_; }

private:
    Embedding embed(const SensorWindow& window) const;

    SessionConfig cfg_;
    Phase phase_ = Phase::kAccumulating;
    std::size_t samples_seen_ = 0;
    std::vector<Embedding> storage_;
    ReducerModel reducer_;
    ClusterStore store_;
    std::vector<std::pair<SensorWindow, std::string>> labeled_;
    std::size_t queries_issued_ = 0;
    std::size_t al_stream_len_ = 0;
    std::vector<std::string> trace_;
};

}  // namespace selfact
