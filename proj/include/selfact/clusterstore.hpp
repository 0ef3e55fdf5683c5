#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "selfact/reduction.hpp"

// DBSCAN over the reduced accumulation set, then per-cluster incremental
// pairwise-distance statistics: inserting a point costs O(n) distance
// evaluations and keeps pair_dist_sum / centroid exact, so the density
// threshold T_c is always available in constant time.

namespace selfact {

// dbscan() label for points that belong to no cluster.
constexpr int kNoiseLabel = -1;

struct Cluster {
    int id = 0;
    std::vector<ReducedEmbedding> members;
    std::vector<double> centroid;   // arithmetic mean of members
    double pair_dist_sum = 0.0;     // sum of Euclidean distances over all pairs

    std::size_t size() const { return members.size(); }
    // Average pairwise distance; 0 for clusters with fewer than 2 members.
    double t_c() const {
        std::size_t n = members.size();
        if (n < 2) return 0.0;
        return pair_dist_sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
    }
};

struct ClusterStore {
    std::vector<Cluster> clusters;  // ascending unique ids
    std::size_t noise_count = 0;    // accumulation points labeled noise
};

// Standard DBSCAN, Euclidean metric, min_pts counting the point itself.
// Deterministic: clusters are numbered in creation (scan) order and border
// points join the first cluster whose expansion reaches them. Labels are
// 0-based ids or kNoiseLabel. Throws std::invalid_argument on empty input,
// eps <= 0 or min_pts < 1.
std::vector<int> dbscan(const std::vector<ReducedEmbedding>& points, double eps,
                        std::size_t min_pts);

// Median distance to the k-th nearest neighbor (self excluded), the default
// eps heuristic (k = 4). Clamped to a tiny positive floor so coincident
// points still yield a usable radius. k is capped at n - 1; a single point
// yields the floor.
double auto_eps(const std::vector<ReducedEmbedding>& points, std::size_t k = 4);

// Groups non-noise points into Clusters with exact incremental statistics.
// labels must come from dbscan over the same points.
ClusterStore build_store(const std::vector<ReducedEmbedding>& points,
                         const std::vector<int>& labels);

// Argmin of centroid distance; ties go to the smallest cluster id. Throws
// std::invalid_argument when the store is empty.
int nearest_cluster(const ClusterStore& store, const ReducedEmbedding& point);

// Adds the point to the cluster: pair_dist_sum grows by the summed distance
// to existing members, centroid and member list update. O(n) in cluster size.
// Throws std::invalid_argument on an unknown id.
void insert(ClusterStore& store, int cluster_id, const ReducedEmbedding& point);

// Line-oriented text dump consumed by the report emitter:
//   cluster <id> <size> <t_c> <centroid...>   (one per cluster)
//   noise <count>
std::string dump(const ClusterStore& store);

}  // namespace selfact
