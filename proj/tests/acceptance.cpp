// Acceptance gate: exercises every hard requirement end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails. Each
// check measures its own oracle independently of the library internals.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "selfact/clusterstore.hpp"
#include "selfact/config.hpp"
#include "selfact/dataset.hpp"
#include "selfact/encoder.hpp"
#include "selfact/finetune.hpp"
#include "selfact/harness.hpp"
#include "selfact/nn.hpp"
#include "selfact/rng.hpp"
#include "selfact/session.hpp"

using namespace selfact;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

struct CriterionResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double euclid(const ReducedEmbedding& a, const ReducedEmbedding& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

// Four activity classes whose windows form compact, widely separated blobs in
// feature space: frequencies high enough that every 2 s window covers several
// periods (phase-stable statistics) and mean offsets at least 6 m/s^2 apart.
std::vector<ActivityPattern> separated_activities() {
    return {
        {"type", 1.6, {0.5, 0.4, 0.45}, {0.2, 0.1, 9.81}},
        {"sweep", 1.4, {0.6, 0.5, 0.5}, {6.2, 0.8, 7.4}},
        {"walk", 1.8, {0.7, 0.5, 0.8}, {0.3, 6.0, 7.6}},
        {"jog", 2.6, {0.9, 0.7, 1.0}, {-5.4, 2.8, 7.9}},
    };
}

// The end-to-end evaluation scenario: 3 users, 4 well-separated activities,
// 400 windows per user. min_pts follows the 2*dim rule of thumb for the 2-D
// reduced space; eps stays on the automatic median-4NN estimate.
ExperimentConfig loso_scenario(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.synth.activities = separated_activities();
    cfg.synth.windows_per_activity = 100;
    cfg.session.dbscan_min_pts = 5;
    cfg.thresholds = {0.75};
    cfg.seed = seed;
    cfg.jobs = 3;
    return cfg;
}

// ---------------------------------------------------------------------------
// (a) oracle suites
// ---------------------------------------------------------------------------

std::vector<int> naive_dbscan(const std::vector<ReducedEmbedding>& pts, double eps,
                              std::size_t min_pts) {
    const std::size_t n = pts.size();
    std::vector<std::vector<std::size_t>> nb(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (euclid(pts[i], pts[j]) <= eps) nb[i].push_back(j);
        }
    }
    constexpr int kUnvisited = -2;
    std::vector<int> label(n, kUnvisited);
    int cid = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) continue;
        if (nb[i].size() < min_pts) {
            label[i] = kNoiseLabel;
            continue;
        }
        label[i] = cid;
        std::vector<std::size_t> queue{i};
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            for (std::size_t j : nb[queue[qi]]) {
                if (label[j] == kNoiseLabel) label[j] = cid;  // noise becomes border
                if (label[j] != kUnvisited) continue;
                label[j] = cid;
                if (nb[j].size() >= min_pts) queue.push_back(j);
            }
        }
        ++cid;
    }
    return label;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::map<int, int> fwd, rev;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == kNoiseLabel) != (b[i] == kNoiseLabel)) return false;
        if (a[i] == kNoiseLabel) continue;
        auto f = fwd.emplace(a[i], b[i]);
        if (!f.second && f.first->second != b[i]) return false;
        auto r = rev.emplace(b[i], a[i]);
        if (!r.second && r.first->second != a[i]) return false;
    }
    return true;
}

double naive_weighted_f1(const std::vector<std::string>& preds,
                         const std::vector<std::string>& truths) {
    std::set<std::string> classes(truths.begin(), truths.end());
    double total = 0.0;
    for (const auto& cls : classes) {
        std::size_t tp = 0, pred_pos = 0, truth_pos = 0;
        for (std::size_t i = 0; i < truths.size(); ++i) {
            if (preds[i] == cls) ++pred_pos;
            if (truths[i] == cls) ++truth_pos;
            if (preds[i] == cls && truths[i] == cls) ++tp;
        }
        const double precision =
            pred_pos ? static_cast<double>(tp) / static_cast<double>(pred_pos) : 0.0;
        const double recall =
            truth_pos ? static_cast<double>(tp) / static_cast<double>(truth_pos) : 0.0;
        const double f1 =
            (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        total += static_cast<double>(truth_pos) * f1;
    }
    return total / static_cast<double>(truths.size());
}

CriterionResult criterion_oracles() {
    CriterionResult r{"(a) oracle suites (cluster stats, DBSCAN, weighted F1)", true, ""};
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream why;

    // Incremental cluster statistics vs brute force, 100 seeds, up to 200 pts.
    std::size_t stat_checks = 0;
    for (std::uint64_t seed = 0; seed < 100 && r.pass; ++seed) {
        Rng rng(derive_seed(7000, "stats/" + std::to_string(seed)));
        const std::size_t n = 2 + rng.index(199);
        ClusterStore store;
        Cluster c;
        c.id = 0;
        c.members.push_back({rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)});
        c.centroid = c.members[0];
        store.clusters.push_back(c);
        for (std::size_t i = 1; i < n; ++i) {
            insert(store, 0, {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)});
            const Cluster& cl = store.clusters[0];
            double pds = 0.0;
            std::vector<double> cen(2, 0.0);
            for (std::size_t p = 0; p < cl.members.size(); ++p) {
                for (std::size_t q = p + 1; q < cl.members.size(); ++q) {
                    pds += euclid(cl.members[p], cl.members[q]);
                }
                cen[0] += cl.members[p][0];
                cen[1] += cl.members[p][1];
            }
            cen[0] /= static_cast<double>(cl.size());
            cen[1] /= static_cast<double>(cl.size());
            const double m = static_cast<double>(cl.size());
            const double tc = cl.size() < 2 ? 0.0 : pds / (m * (m - 1.0) / 2.0);
            if (std::fabs(pds - cl.pair_dist_sum) > 1e-6 ||
                std::fabs(cen[0] - cl.centroid[0]) > 1e-6 ||
                std::fabs(cen[1] - cl.centroid[1]) > 1e-6 || std::fabs(tc - cl.t_c()) > 1e-6) {
                r.pass = false;
                why << "incremental stats diverged at seed " << seed << " step " << i << "; ";
            }
            ++stat_checks;
        }
    }

    // DBSCAN vs an independent O(n^2) reference, random blob+noise instances.
    std::size_t dbscan_checks = 0;
    for (std::uint64_t seed = 0; seed < 60 && r.pass; ++seed) {
        Rng rng(derive_seed(7100, "dbscan/" + std::to_string(seed)));
        const std::size_t n = 20 + rng.index(181);  // up to 200
        const std::size_t blobs = 1 + rng.index(4);
        std::vector<ReducedEmbedding> pts;
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform01() < 0.15) {
                pts.push_back({rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)});
            } else {
                const std::size_t b = rng.index(blobs);
                const double cx = -6.0 + 4.5 * static_cast<double>(b);
                pts.push_back({cx + rng.normal(0.0, 0.5), rng.normal(0.0, 0.5)});
            }
        }
        const double eps = rng.uniform(0.3, 1.2);
        const std::size_t min_pts = 2 + rng.index(7);
        if (!same_partition(dbscan(pts, eps, min_pts), naive_dbscan(pts, eps, min_pts))) {
            r.pass = false;
            why << "dbscan partition mismatch at seed " << seed << "; ";
        }
        ++dbscan_checks;
    }

    // weighted F1 vs the confusion-matrix oracle.
    std::size_t f1_checks = 0;
    const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "f"};
    for (std::uint64_t seed = 0; seed < 60 && r.pass; ++seed) {
        Rng rng(derive_seed(7200, "f1/" + std::to_string(seed)));
        const std::size_t n = 1 + rng.index(1000);
        std::vector<std::string> truths(n), preds(n);
        for (std::size_t i = 0; i < n; ++i) {
            truths[i] = alphabet[rng.index(alphabet.size())];
            preds[i] = alphabet[rng.index(alphabet.size())];
        }
        if (std::fabs(weighted_f1(preds, truths) - naive_weighted_f1(preds, truths)) > 1e-9) {
            r.pass = false;
            why << "weighted_f1 mismatch at seed " << seed << "; ";
        }
        ++f1_checks;
    }

    const double secs = seconds_since(t0);
    if (secs >= 30.0) {
        r.pass = false;
        why << "runtime " << secs << " s over the 30 s budget; ";
    }
    std::ostringstream d;
    d << stat_checks << " stat checks, " << dbscan_checks << " dbscan instances, " << f1_checks
      << " f1 instances in " << std::fixed << secs << " s";
    r.detail = why.str() + d.str();
    return r;
}

// ---------------------------------------------------------------------------
// (b) Algorithm 2 exactness
// ---------------------------------------------------------------------------

// Brute-force mirror of a cluster for the replay oracle.
struct NaiveCluster {
    std::vector<ReducedEmbedding> members;

    std::vector<double> centroid() const {
        std::vector<double> c(members[0].size(), 0.0);
        for (const auto& m : members) {
            for (std::size_t k = 0; k < c.size(); ++k) c[k] += m[k];
        }
        for (auto& v : c) v /= static_cast<double>(members.size());
        return c;
    }
    double avg() const {
        if (members.size() < 2) return 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                s += euclid(members[i], members[j]);
            }
        }
        const double n = static_cast<double>(members.size());
        return s / (n * (n - 1.0) / 2.0);
    }
};

CriterionResult criterion_algorithm2() {
    CriterionResult r{"(b) Algorithm 2 exactness (worked instances + trace replay)", true, ""};
    std::ostringstream why;

    // Worked instances on a hand-built store.
    auto make_pair_store = [] {
        ClusterStore store;
        Cluster c;
        c.id = 0;
        c.members = {{0.0, 0.0}, {2.0, 0.0}};
        c.centroid = {1.0, 0.0};
        c.pair_dist_sum = 2.0;
        store.clusters.push_back(c);
        return store;
    };
    auto store = make_pair_store();
    if (!active_learning_needed(store, 0, {1.0, 0.0})) {
        r.pass = false;
        why << "{(0,0),(2,0)}+(1,0) should query; ";
    }
    if (active_learning_needed(store, 0, {10.0, 0.0})) {
        r.pass = false;
        why << "{(0,0),(2,0)}+(10,0) should stay silent; ";
    }
    ClusterStore single;
    Cluster s;
    s.id = 0;
    s.members = {{0.0, 0.0}};
    s.centroid = {0.0, 0.0};
    single.clusters.push_back(s);
    if (active_learning_needed(single, 0, {1.0, 0.0})) {
        r.pass = false;
        why << "singleton must never query; ";
    }

    // Replay every decision of a real session against the brute-force oracle.
    auto cfg = loso_scenario(1);
    SynthSpec ss = cfg.synth;
    ss.seed = derive_seed(cfg.seed, "synth");
    auto recs = synth_generate(ss);
    auto windows = segment(recs[0], cfg.dataset.window_len, cfg.dataset.overlap);

    SessionConfig sc = cfg.session;
    sc.acc_th = static_cast<std::size_t>(
        std::llround(0.75 * static_cast<double>(windows.size())));
    Session session(sc);
    std::vector<StepEvent> events;
    for (const auto& w : windows) events.push_back(session.process_sample(w));

    // Rebuild the initial clusters exactly as the session did.
    std::vector<Embedding> feats;
    for (std::size_t i = 0; i < sc.acc_th; ++i) feats.push_back(extract_stat_features(windows[i]));
    std::vector<ReducedEmbedding> pts;
    for (const auto& f : feats) pts.push_back(transform(session.reducer(), f));
    auto labels = dbscan(pts, auto_eps(pts), sc.dbscan_min_pts);
    std::map<int, NaiveCluster> mirror;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (labels[i] != kNoiseLabel) mirror[labels[i]].members.push_back(pts[i]);
    }

    std::size_t checked = 0;
    for (std::size_t i = sc.acc_th; i < windows.size() && r.pass; ++i) {
        const auto& ev = events[i];
        const auto p = transform(session.reducer(), extract_stat_features(windows[i]));
        int best = -1;
        double best_d = 0.0;
        for (const auto& [cid, cl] : mirror) {
            const double d = euclid(p, cl.centroid());
            if (best == -1 || d < best_d) {
                best = cid;
                best_d = d;
            }
        }
        if (best != ev.cluster_id) {
            r.pass = false;
            why << "nearest-cluster mismatch at step " << i + 1 << "; ";
            break;
        }
        const double before = mirror[best].avg();
        NaiveCluster after = mirror[best];
        after.members.push_back(p);
        const bool should_query = after.avg() < before;
        if (should_query != ev.queried) {
            r.pass = false;
            why << "query decision mismatch at step " << i + 1 << "; ";
            break;
        }
        mirror[best].members.push_back(p);
        ++checked;
    }

    std::ostringstream d;
    d << "3 worked instances, " << checked << " replayed decisions";
    r.detail = why.str() + d.str();
    return r;
}

// ---------------------------------------------------------------------------
// (c) gradient checks
// ---------------------------------------------------------------------------

// Central finite difference over a parameter vector against analytic grads.
bool fd_matches(const std::function<double()>& loss, double* x, const double* grad,
                std::size_t count, double* worst) {
    const double h = 1e-5;
    for (std::size_t i = 0; i < count; ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = loss();
        x[i] = keep - h;
        const double dn = loss();
        x[i] = keep;
        const double num = (up - dn) / (2.0 * h);
        const double rel =
            std::fabs(num - grad[i]) / std::max({1.0, std::fabs(num), std::fabs(grad[i])});
        *worst = std::max(*worst, rel);
        if (rel >= 1e-4) return false;
    }
    return true;
}

CriterionResult criterion_gradients() {
    CriterionResult r{"(c) gradient checks (conv1d, dense, NT-Xent, cross-entropy)", true, ""};
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream why;
    double worst = 0.0;
    std::size_t probes = 0;

    for (std::uint64_t seed = 0; seed < 20 && r.pass; ++seed) {
        Rng rng(derive_seed(7300, "grad/" + std::to_string(seed)));

        {  // conv1d: scalar loss = random projection of the output
            nn::Conv1d conv(2, 3, 5);
            conv.init(rng);
            nn::Mat x(12, 2), proj(8, 3);  // valid conv: (12-5+1) x 3
            for (auto& v : x.v) v = rng.normal(0.0, 1.0);
            for (auto& v : proj.v) v = rng.normal(0.0, 1.0);
            auto loss_fn = [&] {
                auto y = conv.apply(x);
                double s = 0.0;
                for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * proj.v[i];
                return s;
            };
            conv.zero_grad();
            conv.forward(x);
            nn::Mat dx = conv.backward(proj);
            if (!fd_matches(loss_fn, conv.w.v.data(), conv.gw.v.data(), conv.w.v.size(),
                            &worst) ||
                !fd_matches(loss_fn, conv.b.data(), conv.gb.data(), conv.b.size(), &worst) ||
                !fd_matches(loss_fn, x.v.data(), dx.v.data(), x.v.size(), &worst)) {
                r.pass = false;
                why << "conv1d gradient mismatch at seed " << seed << "; ";
            }
            probes += conv.w.v.size() + conv.b.size() + x.v.size();
        }

        if (r.pass) {  // dense
            nn::Dense fc(4, 3);
            fc.init(rng);
            nn::Mat x(2, 4), proj(2, 3);
            for (auto& v : x.v) v = rng.normal(0.0, 1.0);
            for (auto& v : proj.v) v = rng.normal(0.0, 1.0);
            auto loss_fn = [&] {
                auto y = fc.apply(x);
                double s = 0.0;
                for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * proj.v[i];
                return s;
            };
            fc.zero_grad();
            fc.forward(x);
            nn::Mat dx = fc.backward(proj);
            if (!fd_matches(loss_fn, fc.w.v.data(), fc.gw.v.data(), fc.w.v.size(), &worst) ||
                !fd_matches(loss_fn, fc.b.data(), fc.gb.data(), fc.b.size(), &worst) ||
                !fd_matches(loss_fn, x.v.data(), dx.v.data(), x.v.size(), &worst)) {
                r.pass = false;
                why << "dense gradient mismatch at seed " << seed << "; ";
            }
            probes += fc.w.v.size() + fc.b.size() + x.v.size();
        }

        if (r.pass) {  // NT-Xent over two view matrices
            const std::size_t n = 3, dim = 5;
            nn::Mat a(n, dim), b(n, dim);
            for (auto& v : a.v) v = rng.normal(0.0, 1.0);
            for (auto& v : b.v) v = rng.normal(0.0, 1.0);
            nn::Mat da(n, dim), db(n, dim);
            nt_xent_loss_grad(a, b, 0.5, da, db);
            auto loss_fn = [&] { return nt_xent_loss(a, b, 0.5); };
            if (!fd_matches(loss_fn, a.v.data(), da.v.data(), a.v.size(), &worst) ||
                !fd_matches(loss_fn, b.v.data(), db.v.data(), b.v.size(), &worst)) {
                r.pass = false;
                why << "nt-xent gradient mismatch at seed " << seed << "; ";
            }
            probes += a.v.size() + b.v.size();
        }

        if (r.pass) {  // softmax cross-entropy
            const std::size_t n = 4, k = 5;
            nn::Mat logits(n, k);
            for (auto& v : logits.v) v = rng.normal(0.0, 1.0);
            std::vector<std::size_t> targets(n);
            for (auto& t : targets) t = rng.index(k);
            nn::SoftmaxCrossEntropy ce;
            auto loss_fn = [&] {
                nn::SoftmaxCrossEntropy probe;
                return probe.forward(logits, targets);
            };
            ce.forward(logits, targets);
            nn::Mat dl = ce.backward();
            if (!fd_matches(loss_fn, logits.v.data(), dl.v.data(), logits.v.size(), &worst)) {
                r.pass = false;
                why << "cross-entropy gradient mismatch at seed " << seed << "; ";
            }
            probes += logits.v.size();
        }
    }

    const double secs = seconds_since(t0);
    if (secs >= 60.0) {
        r.pass = false;
        why << "runtime " << secs << " s over the 60 s budget; ";
    }
    std::ostringstream d;
    d << probes << " coordinates probed, worst rel err " << std::scientific << worst << ", "
      << std::fixed << secs << " s";
    r.detail = why.str() + d.str();
    return r;
}

// ---------------------------------------------------------------------------
// (d) end-to-end synthetic LOSO
// ---------------------------------------------------------------------------

CriterionResult criterion_loso() {
    CriterionResult r{"(d) end-to-end LOSO: F1 >= 0.90, al_rate < 0.5 at threshold 0.75", true,
                      ""};
    const auto t0 = std::chrono::steady_clock::now();
    auto report = run_loso(loso_scenario(1));
    const double secs = seconds_since(t0);

    std::ostringstream why, d;
    if (report.means.size() != 1) {
        r.pass = false;
        why << "expected one threshold mean; ";
    } else {
        const auto& m = report.means[0];
        if (m.folds != 3) {
            r.pass = false;
            why << "expected 3 scored folds, got " << m.folds << "; ";
        }
        if (m.f1 < 0.90) {
            r.pass = false;
            why << "mean F1 " << m.f1 << " below 0.90; ";
        }
        if (m.al_rate >= 0.5) {
            r.pass = false;
            why << "al_rate " << m.al_rate << " not below 0.5; ";
        }
        d << "mean F1 " << std::fixed << m.f1 << ", al_rate " << m.al_rate << ", " << secs
          << " s";
    }
    if (secs >= 60.0) {
        r.pass = false;
        why << "runtime " << secs << " s over the 60 s budget; ";
    }
    r.detail = why.str() + d.str();
    return r;
}

// ---------------------------------------------------------------------------
// (e) threshold trend over seeds
// ---------------------------------------------------------------------------

CriterionResult criterion_trend() {
    CriterionResult r{"(e) threshold trend over 5 seeds (al_rate down, F1 worst at 0.95)", true,
                      ""};
    std::map<double, double> f1_sum, al_sum;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto cfg = loso_scenario(seed);
        cfg.thresholds = {0.50, 0.75, 0.95};
        auto report = run_loso(cfg);
        for (const auto& m : report.means) {
            f1_sum[m.threshold] += m.f1;
            al_sum[m.threshold] += m.al_rate;
        }
    }
    for (auto& [k, v] : f1_sum) v /= 5.0;
    for (auto& [k, v] : al_sum) v /= 5.0;

    std::ostringstream why, d;
    if (al_sum[0.95] >= al_sum[0.50]) {
        r.pass = false;
        why << "al_rate(0.95)=" << al_sum[0.95] << " not below al_rate(0.50)=" << al_sum[0.50]
            << "; ";
    }
    if (f1_sum[0.95] >= std::max(f1_sum[0.50], f1_sum[0.75])) {
        r.pass = false;
        why << "F1(0.95)=" << f1_sum[0.95] << " not below best of lower thresholds; ";
    }
    d << std::fixed << "mean al_rate " << al_sum[0.50] << " / " << al_sum[0.75] << " / "
      << al_sum[0.95] << ", mean F1 " << f1_sum[0.50] << " / " << f1_sum[0.75] << " / "
      << f1_sum[0.95] << " at thresholds 0.50 / 0.75 / 0.95";
    r.detail = why.str() + d.str();
    return r;
}

// ---------------------------------------------------------------------------
// (f) contrastive backend sanity
// ---------------------------------------------------------------------------

double silhouette(const std::vector<Embedding>& embs, const std::vector<std::string>& labels) {
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < embs[i].size(); ++k) {
            const double d = embs[i][k] - embs[j][k];
            s += d * d;
        }
        return std::sqrt(s);
    };
    double total = 0.0;
    for (std::size_t i = 0; i < embs.size(); ++i) {
        double a = 0.0, b = 0.0;
        std::size_t na = 0, nb = 0;
        for (std::size_t j = 0; j < embs.size(); ++j) {
            if (j == i) continue;
            if (labels[j] == labels[i]) {
                a += dist(i, j);
                ++na;
            } else {
                b += dist(i, j);
                ++nb;
            }
        }
        a /= static_cast<double>(na);
        b /= static_cast<double>(nb);
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(embs.size());
}

CriterionResult criterion_contrastive() {
    CriterionResult r{"(f) contrastive sanity (loss down, silhouette up, conv F1 competitive)",
                      true, ""};
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream why, d;

    // Two classes identical in amplitude and orientation; only the frequency
    // differs, so rotation-invariant pre-training has real structure to find.
    SynthSpec ss;
    ss.activities = {
        {"slow", 1.0, {0.8, 0.6, 0.7}, {0.2, 0.1, 9.81}},
        {"fast", 3.2, {0.8, 0.6, 0.7}, {0.2, 0.1, 9.81}},
    };
    ss.n_users = 3;
    ss.windows_per_activity = 40;
    ss.seed = derive_seed(1, "synth");
    auto recs = synth_generate(ss);

    std::vector<SensorWindow> pretrain_set;
    for (int u = 1; u <= 2; ++u) {
        auto w = segment(recs[u], ss.window_len, ss.overlap);
        pretrain_set.insert(pretrain_set.end(), w.begin(), w.end());
    }
    auto target = segment(recs[0], ss.window_len, ss.overlap);

    PretrainConfig pc;
    pc.epochs = 100;
    pc.batch_size = 32;
    pc.base_lr = 0.3;
    pc.seed = derive_seed(1, "pretrain");
    auto res = pretrain(pretrain_set, pc);
    if (!(res.epoch_mean_loss.back() < res.epoch_mean_loss.front())) {
        r.pass = false;
        why << "mean epoch loss did not decrease (" << res.epoch_mean_loss.front() << " -> "
            << res.epoch_mean_loss.back() << "); ";
    }

    EncoderModel random_init;
    Rng init_rng(derive_seed(1, "randinit"));
    random_init.init(init_rng);
    std::vector<Embedding> emb_pre, emb_rand;
    std::vector<std::string> labels;
    for (const auto& w : target) {
        emb_pre.push_back(encode(res.model, w));
        emb_rand.push_back(encode(random_init, w));
        labels.push_back(w.oracle_label);
    }
    const double sil_pre = silhouette(emb_pre, labels);
    const double sil_rand = silhouette(emb_rand, labels);
    if (sil_pre < sil_rand) {
        r.pass = false;
        why << "silhouette decreased (" << sil_rand << " -> " << sil_pre << "); ";
    }

    // Same train/eval split for both backends.
    std::vector<LabeledWindow> train;
    std::vector<const SensorWindow*> eval_set;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (i < target.size() / 2) {
            train.push_back({target[i], target[i].oracle_label});
        } else {
            eval_set.push_back(&target[i]);
        }
    }
    auto score = [&](EncoderBackend be, const EncoderModel* m) {
        FineTuneConfig fc;
        fc.seed = derive_seed(1, "finetune");
        auto clf = fine_tune(train, be, m, fc).classifier;
        std::vector<std::string> preds, truths;
        for (const auto* w : eval_set) {
            preds.push_back(predict(clf, *w).first);
            truths.push_back(w->oracle_label);
        }
        return weighted_f1(preds, truths);
    };
    const double f1_conv = score(EncoderBackend::kConv, &res.model);
    const double f1_stat = score(EncoderBackend::kStatistical, nullptr);
    if (f1_conv < f1_stat - 0.05) {
        r.pass = false;
        why << "conv F1 " << f1_conv << " below stat F1 " << f1_stat << " - 0.05; ";
    }

    const double secs = seconds_since(t0);
    if (secs >= 300.0) {
        r.pass = false;
        why << "runtime " << secs << " s over the 5 min budget; ";
    }
    d << std::fixed << "loss " << res.epoch_mean_loss.front() << " -> "
      << res.epoch_mean_loss.back() << ", silhouette " << sil_rand << " -> " << sil_pre
      << ", F1 conv " << f1_conv << " vs stat " << f1_stat << ", " << secs << " s";
    r.detail = why.str() + d.str();
    return r;
}

// ---------------------------------------------------------------------------
// (g) determinism
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string without_volatile_lines(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.rfind("meta.timestamp=", 0) == 0) continue;
        if (line.find("runtime_sec=") != std::string::npos) continue;
        out += line + "\n";
    }
    return out;
}

CriterionResult criterion_determinism() {
    CriterionResult r{"(g) determinism: traces and reports byte-identical across runs", true, ""};
    std::ostringstream why;

    // Event traces of two sessions over the same stream.
    auto cfg = loso_scenario(9);
    SynthSpec ss = cfg.synth;
    ss.seed = derive_seed(cfg.seed, "synth");
    auto recs = synth_generate(ss);
    auto windows = segment(recs[0], cfg.dataset.window_len, cfg.dataset.overlap);
    SessionConfig sc = cfg.session;
    sc.acc_th = 300;
    Session s1(sc), s2(sc);
    for (const auto& w : windows) {
        s1.process_sample(w);
        s2.process_sample(w);
    }
    if (s1.trace() != s2.trace()) {
        r.pass = false;
        why << "session traces differ; ";
    }

    // Full reports from two identical sweeps.
    auto dir_a = fs::temp_directory_path() / "selfact_acceptance_a";
    auto dir_b = fs::temp_directory_path() / "selfact_acceptance_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    emit_report(run_loso(cfg), dir_a.string());
    emit_report(run_loso(cfg), dir_b.string());
    for (const char* name : {"folds.csv", "f1_vs_threshold.svg", "clusters_vs_threshold.svg",
                             "al_rate_vs_threshold.svg"}) {
        if (slurp(dir_a / name) != slurp(dir_b / name)) {
            r.pass = false;
            why << name << " differs between runs; ";
        }
    }
    if (without_volatile_lines(slurp(dir_a / "summary.txt")) !=
        without_volatile_lines(slurp(dir_b / "summary.txt"))) {
        r.pass = false;
        why << "summary.txt differs beyond timestamps; ";
    }
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    r.detail = why.str() + std::to_string(windows.size()) + "-step trace + full report compared";
    return r;
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<CriterionResult> results;
    results.push_back(criterion_oracles());
    results.push_back(criterion_algorithm2());
    results.push_back(criterion_gradients());
    results.push_back(criterion_loso());
    results.push_back(criterion_trend());
    results.push_back(criterion_contrastive());
    results.push_back(criterion_determinism());

    bool all = true;
    for (const auto& r : results) {
        std::printf("%s  %s\n      %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        all = all && r.pass;
    }
    std::printf("%zu/%zu criteria passed in %.1f s\n",
                static_cast<std::size_t>(std::count_if(results.begin(), results.end(),
                                                       [](const auto& r) { return r.pass; })),
                results.size(), seconds_since(t0));
    return all ? 0 : 1;
}
