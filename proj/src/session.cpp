#include "selfact/session.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selfact/errors.hpp"
#include "selfact/kernels.hpp"

namespace selfact {

bool active_learning_needed(const ClusterStore& store, int cluster_id,
                            const ReducedEmbedding& point) {
    auto it = std::find_if(store.clusters.begin(), store.clusters.end(),
                           [&](const Cluster& c) { return c.id == cluster_id; });
    if (it == store.clusters.end()) {
        throw std::invalid_argument("active_learning_needed: unknown cluster id");
    }
    const Cluster& c = *it;
    const double avg = c.t_c();
    double new_sum = c.pair_dist_sum;
    for (const auto& m : c.members) {
        new_sum += std::sqrt(kern::dist2(m.data(), point.data(), point.size()));
    }
    const double n1 = static_cast<double>(c.members.size() + 1);
    const double avg_new = new_sum / (n1 * (n1 - 1.0) / 2.0);
    return avg_new < avg;
}

Session::Session(const SessionConfig& config) : cfg_(config) {
    if (cfg_.acc_th < 1) throw std::invalid_argument("Session: acc_th must be >= 1");
    if (cfg_.reducer_out_dim < 1) throw std::invalid_argument("Session: out_dim must be >= 1");
    if (cfg_.acc_th < cfg_.reducer_out_dim + 1) {
        throw std::invalid_argument("Session: acc_th below the reducer's minimum sample count");
    }
    if (cfg_.dbscan_min_pts < 1) throw std::invalid_argument("Session: min_pts must be >= 1");
    if (cfg_.backend == EncoderBackend::kConv && cfg_.conv_model == nullptr) {
        throw std::invalid_argument("Session: conv backend needs a model");
    }
}

Embedding Session::embed(const SensorWindow& window) const {
    if (cfg_.backend == EncoderBackend::kConv) return encode(*cfg_.conv_model, window);
    return extract_stat_features(window);
}

StepEvent Session::process_sample(const SensorWindow& window) {
    if (phase_ == Phase::kFinished) throw PipelineError("process_sample: session finished");
    ++samples_seen_;

    StepEvent ev;
    Embedding e = embed(window);

    if (phase_ == Phase::kAccumulating) {
        storage_.push_back(std::move(e));
        if (samples_seen_ < cfg_.acc_th) {
            ev.kind = StepEvent::Kind::kAccumulated;
            trace_.push_back(std::to_string(samples_seen_) + ",accumulating,accumulated,-1,0,");
            return ev;
        }

        // Threshold reached: fit the personal reducer, reduce the storage,
        // cluster it once, and switch phases.
        reducer_ = fit_reducer(storage_, cfg_.reducer_out_dim);
        std::vector<ReducedEmbedding> reduced;
        reduced.reserve(storage_.size());
        for (const auto& s : storage_) reduced.push_back(transform(reducer_, s));
        double eps = cfg_.dbscan_eps > 0.0 ? cfg_.dbscan_eps : auto_eps(reduced);
        auto labels = dbscan(reduced, eps, cfg_.dbscan_min_pts);
        store_ = build_store(reduced, labels);
        if (store_.clusters.empty()) {
            throw PipelineError(
                "accumulation insufficient: clustering labeled every point noise "
                "(acc_th=" + std::to_string(cfg_.acc_th) +
                ", min_pts=" + std::to_string(cfg_.dbscan_min_pts) + ")");
        }
        phase_ = Phase::kActiveLearning;
        ev.kind = StepEvent::Kind::kClustersBuilt;
        ev.cluster_count = store_.clusters.size();
        trace_.push_back(std::to_string(samples_seen_) + ",accumulating,clusters_built," +
                         std::to_string(store_.clusters.size()) + ",0,");
        return ev;
    }

    // Active-learning phase: match, decide, insert unconditionally.
    ++al_stream_len_;
    ReducedEmbedding r = transform(reducer_, e);
    int cid = nearest_cluster(store_, r);
    bool query = active_learning_needed(store_, cid, r);
    insert(store_, cid, r);

    ev.cluster_id = cid;
    if (query) {
        ev.kind = StepEvent::Kind::kQuery;
        ev.queried = true;
        ev.label = window.oracle_label;
        labeled_.emplace_back(window, window.oracle_label);
        ++queries_issued_;
        trace_.push_back(std::to_string(samples_seen_) + ",active_learning,query," +
                         std::to_string(cid) + ",1," + window.oracle_label);
    } else {
        ev.kind = StepEvent::Kind::kSilent;
        trace_.push_back(std::to_string(samples_seen_) + ",active_learning,silent," +
                         std::to_string(cid) + ",0,");
    }
    return ev;
}

Session::FinishResult Session::finish() {
    if (phase_ == Phase::kAccumulating) {
        throw PipelineError("finish: stream ended before the accumulation threshold (" +
                            std::to_string(samples_seen_) + "/" + std::to_string(cfg_.acc_th) +
                            " samples)");
    }
    if (phase_ == Phase::kFinished) throw PipelineError("finish: session already finished");
    phase_ = Phase::kFinished;
    FinishResult res;
    res.labeled = labeled_;
    res.queries_issued = queries_issued_;
    res.al_stream_len = al_stream_len_;
    return res;
}

}  // namespace selfact
