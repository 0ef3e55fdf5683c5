#include "selfact/clusterstore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>

#include "selfact/kernels.hpp"

namespace selfact {

namespace {

double dist(const ReducedEmbedding& a, const ReducedEmbedding& b) {
    return std::sqrt(kern::dist2(a.data(), b.data(), a.size()));
}

void check_same_dim(const std::vector<ReducedEmbedding>& points) {
    for (const auto& p : points) {
        if (p.size() != points[0].size()) {
            throw std::invalid_argument("clusterstore: ragged points");
        }
    }
}

}  // namespace

std::vector<int> dbscan(const std::vector<ReducedEmbedding>& points, double eps,
                        std::size_t min_pts) {
    if (points.empty()) throw std::invalid_argument("dbscan: no points");
    if (eps <= 0.0) throw std::invalid_argument("dbscan: eps must be > 0");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
    check_same_dim(points);

    const std::size_t n = points.size();
    const double eps2 = eps * eps;
    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n; ++j) {
            if (kern::dist2(points[i].data(), points[j].data(), points[i].size()) <= eps2) {
                out.push_back(j);  // includes i itself
            }
        }
        return out;
    };

    constexpr int kUnvisited = -2;
    std::vector<int> label(n, kUnvisited);
    int next_id = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) continue;
        auto seed = neighbors(i);
        if (seed.size() < min_pts) {
            label[i] = kNoiseLabel;  // may later be claimed as a border point
            continue;
        }
        const int cid = next_id++;
        label[i] = cid;
        std::deque<std::size_t> queue(seed.begin(), seed.end());
        while (!queue.empty()) {
            std::size_t j = queue.front();
            queue.pop_front();
            if (label[j] == kNoiseLabel) label[j] = cid;  // border point
            if (label[j] != kUnvisited) continue;
            label[j] = cid;
            auto nj = neighbors(j);
            if (nj.size() >= min_pts) queue.insert(queue.end(), nj.begin(), nj.end());
        }
    }
    return label;
}

double auto_eps(const std::vector<ReducedEmbedding>& points, std::size_t k) {
    if (points.empty()) throw std::invalid_argument("auto_eps: no points");
    check_same_dim(points);
    constexpr double kFloor = 1e-12;
    const std::size_t n = points.size();
    if (n == 1 || k == 0) return kFloor;
    const std::size_t kk = std::min(k, n - 1);

    std::vector<double> knn(n);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        d2.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                d2.push_back(kern::dist2(points[i].data(), points[j].data(), points[i].size()));
            }
        }
        std::nth_element(d2.begin(), d2.begin() + (kk - 1), d2.end());
        knn[i] = std::sqrt(d2[kk - 1]);
    }
    std::sort(knn.begin(), knn.end());
    double median = n % 2 == 1 ? knn[n / 2] : 0.5 * (knn[n / 2 - 1] + knn[n / 2]);
    return std::max(median, kFloor);
}

ClusterStore build_store(const std::vector<ReducedEmbedding>& points,
                         const std::vector<int>& labels) {
    if (points.size() != labels.size()) {
        throw std::invalid_argument("build_store: label/point length mismatch");
    }
    check_same_dim(points);

    ClusterStore store;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (labels[i] == kNoiseLabel) {
            ++store.noise_count;
            continue;
        }
        if (labels[i] < 0) throw std::invalid_argument("build_store: negative cluster id");
        auto it = std::find_if(store.clusters.begin(), store.clusters.end(),
                               [&](const Cluster& c) { return c.id == labels[i]; });
        if (it == store.clusters.end()) {
            Cluster c;
            c.id = labels[i];
            c.centroid.assign(points[i].size(), 0.0);
            store.clusters.push_back(std::move(c));
            it = store.clusters.end() - 1;
        }
        Cluster& c = *it;
        for (const auto& m : c.members) c.pair_dist_sum += dist(m, points[i]);
        c.members.push_back(points[i]);
        for (std::size_t a = 0; a < c.centroid.size(); ++a) {
            c.centroid[a] += (points[i][a] - c.centroid[a]) / static_cast<double>(c.members.size());
        }
    }
    std::sort(store.clusters.begin(), store.clusters.end(),
              [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
    return store;
}

int nearest_cluster(const ClusterStore& store, const ReducedEmbedding& point) {
    if (store.clusters.empty()) throw std::invalid_argument("nearest_cluster: empty store");
    int best_id = 0;
    double best = 0.0;
    bool first = true;
    for (const Cluster& c : store.clusters) {
        if (c.centroid.size() != point.size()) {
            throw std::invalid_argument("nearest_cluster: dimension mismatch");
        }
        double d = kern::dist2(c.centroid.data(), point.data(), point.size());
        if (first || d < best || (d == best && c.id < best_id)) {
            best = d;
            best_id = c.id;
            first = false;
        }
    }
    return best_id;
}

void insert(ClusterStore& store, int cluster_id, const ReducedEmbedding& point) {
    auto it = std::find_if(store.clusters.begin(), store.clusters.end(),
                           [&](const Cluster& c) { return c.id == cluster_id; });
    if (it == store.clusters.end()) throw std::invalid_argument("insert: unknown cluster id");
    Cluster& c = *it;
    if (!c.members.empty() && c.members[0].size() != point.size()) {
        throw std::invalid_argument("insert: dimension mismatch");
    }
    for (const auto& m : c.members) c.pair_dist_sum += dist(m, point);
    c.members.push_back(point);
    if (c.centroid.empty()) c.centroid.assign(point.size(), 0.0);
    for (std::size_t a = 0; a < c.centroid.size(); ++a) {
        c.centroid[a] += (point[a] - c.centroid[a]) / static_cast<double>(c.members.size());
    }
}

std::string dump(const ClusterStore& store) {
    std::string out;
    char buf[64];
    for (const Cluster& c : store.clusters) {
        out += "cluster " + std::to_string(c.id) + " " + std::to_string(c.members.size());
        std::snprintf(buf, sizeof buf, " %.17g", c.t_c());
        out += buf;
        for (double v : c.centroid) {
            std::snprintf(buf, sizeof buf, " %.17g", v);
            out += buf;
        }
        out += "\n";
    }
    out += "noise " + std::to_string(store.noise_count) + "\n";
    return out;
}

}  // namespace selfact
