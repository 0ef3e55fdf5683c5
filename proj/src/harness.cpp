#include "selfact/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "selfact/config.hpp"
#include "selfact/errors.hpp"
#include "selfact/rng.hpp"

namespace selfact {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct ClassCounts {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0;

    double f1() const {
        const std::size_t denom = 2 * tp + fp + fn;
        return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
};

std::map<std::string, ClassCounts> confusion(const std::vector<std::string>& predictions,
                                             const std::vector<std::string>& truths) {
    if (truths.empty()) throw std::invalid_argument("f1: empty label sequences");
    if (predictions.size() != truths.size()) {
        throw std::invalid_argument("f1: " + std::to_string(predictions.size()) +
                                    " predictions vs " + std::to_string(truths.size()) + " truths");
    }
    std::map<std::string, ClassCounts> by_class;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        ++by_class[truths[i]].support;
        if (predictions[i] == truths[i]) {
            ++by_class[truths[i]].tp;
        } else {
            ++by_class[predictions[i]].fp;
            ++by_class[truths[i]].fn;
        }
    }
    return by_class;
}

// Runs fn(0..n_tasks-1) across up to `jobs` threads; rethrows the first
// uncaught task exception after all workers stop.
void parallel_for(std::size_t n_tasks, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::min(std::max<std::size_t>(jobs, 1), n_tasks);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) workers.emplace_back(worker);
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::vector<Recording> gather_recordings(const ExperimentConfig& cfg) {
    if (cfg.csv_paths.empty()) {
        SynthSpec ss = cfg.synth;
        // Segmentation geometry has a single source of truth.
        ss.window_len = cfg.dataset.window_len;
        ss.overlap = cfg.dataset.overlap;
        ss.seed = derive_seed(cfg.seed, "synth");
        return synth_generate(ss);
    }
    // Concatenate per-user across files, then restore time order.
    std::map<std::string, Recording> by_user;
    for (const auto& path : cfg.csv_paths) {
        for (auto& rec : load_csv(path, cfg.dataset)) {
            auto [it, fresh] = by_user.try_emplace(rec.user_id, rec);
            if (fresh) continue;
            Recording& dst = it->second;
            if (dst.has_labels() != rec.has_labels()) {
                throw DataError("user '" + rec.user_id + "' is labeled in some files but not others");
            }
            dst.samples.insert(dst.samples.end(), rec.samples.begin(), rec.samples.end());
            dst.labels.insert(dst.labels.end(), rec.labels.begin(), rec.labels.end());
        }
    }
    std::vector<Recording> recs;
    for (auto& [id, rec] : by_user) {
        std::vector<std::size_t> order(rec.samples.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return rec.samples[a].t < rec.samples[b].t; });
        Recording sorted;
        sorted.user_id = rec.user_id;
        sorted.samples.reserve(order.size());
        for (std::size_t i : order) sorted.samples.push_back(rec.samples[i]);
        if (rec.has_labels()) {
            sorted.labels.reserve(order.size());
            for (std::size_t i : order) sorted.labels.push_back(rec.labels[i]);
        }
        recs.push_back(std::move(sorted));
    }
    return recs;
}

namespace {

FoldResult run_fold(const ExperimentConfig& cfg, const std::string& user,
                    const std::vector<SensorWindow>& windows, const EncoderModel* encoder,
                    double threshold) {
    const auto t0 = std::chrono::steady_clock::now();
    FoldResult r;
    r.user = user;
    r.threshold = threshold;

    const std::size_t n = windows.size();
    const auto acc = static_cast<std::size_t>(std::llround(threshold * static_cast<double>(n)));
    auto done = [&] {
        r.runtime_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    };

    if (acc < cfg.session.reducer_out_dim + 1) {
        r.skipped = true;
        r.note = "accumulation prefix too short (" + std::to_string(acc) + " of " +
                 std::to_string(n) + " windows)";
        return done();
    }
    if (acc >= n) {
        r.skipped = true;
        r.note = "no active-learning stream (threshold takes " + std::to_string(acc) + " of " +
                 std::to_string(n) + " windows)";
        return done();
    }

    SessionConfig sc = cfg.session;
    sc.acc_th = acc;
    sc.window_len = cfg.dataset.window_len;
    sc.overlap = cfg.dataset.overlap;
    sc.backend = cfg.backend;
    sc.conv_model = cfg.backend == EncoderBackend::kConv ? encoder : nullptr;

    Session session(sc);
    std::vector<std::size_t> eval_idx;  // never-labeled windows
    try {
        for (std::size_t i = 0; i < n; ++i) {
            auto ev = session.process_sample(windows[i]);
            if (ev.kind != StepEvent::Kind::kQuery) eval_idx.push_back(i);
        }
    } catch (const PipelineError& e) {
        r.skipped = true;
        r.note = e.what();
        return done();
    }
    auto fin = session.finish();
    r.cluster_count = session.store().clusters.size();
    r.queries = fin.queries_issued;
    r.al_stream_len = fin.al_stream_len;
    r.al_rate = al_rate(r.queries, r.al_stream_len);

    Classifier classifier;
    bool trained = false;
    if (fin.labeled.size() < 2) {
        r.note = "insufficient labeled samples (" + std::to_string(fin.labeled.size()) +
                 "); scored weighted_f1 = 0";
    } else {
        FineTuneConfig fc = cfg.finetune;
        fc.seed = derive_seed(cfg.seed, "finetune/" + user + "/" + fmt("%.6g", threshold));
        try {
            classifier = fine_tune(fin.labeled, cfg.backend, encoder, fc).classifier;
            trained = true;
        } catch (const PipelineError& e) {
            r.note = std::string(e.what()) + "; scored weighted_f1 = 0";
        }
    }
    if (trained) {
        std::vector<std::string> preds, truths;
        preds.reserve(eval_idx.size());
        truths.reserve(eval_idx.size());
        for (std::size_t i : eval_idx) {
            preds.push_back(predict(classifier, windows[i]).first);
            truths.push_back(windows[i].oracle_label);
        }
        r.weighted_f1 = weighted_f1(preds, truths);
        r.per_class_f1 = per_class_f1(preds, truths);
    }
    return done();
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Minimal deterministic line plot: axes, per-point ticks, polyline, markers.
std::string svg_plot(const std::string& title, const std::string& ylabel,
                     const std::vector<std::pair<double, double>>& points, double y_max) {
    const double width = 640, height = 420;
    const double l = 70, rgt = 20, top = 40, bot = 50;
    double x_min = points.front().first, x_max = points.back().first;
    if (x_max == x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    auto px = [&](double x) {
        return l + (x - x_min) / (x_max - x_min) * (width - l - rgt);
    };
    auto py = [&](double y) { return height - bot - y / y_max * (height - top - bot); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\">\n";
    s << "<rect width=\"640\" height=\"420\" fill=\"#ffffff\"/>\n";
    s << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" << title << "</text>\n";
    // Axes
    s << "<line x1=\"" << fmt("%.2f", l) << "\" y1=\"" << fmt("%.2f", top) << "\" x2=\""
      << fmt("%.2f", l) << "\" y2=\"" << fmt("%.2f", height - bot)
      << "\" stroke=\"#000\" stroke-width=\"1\"/>\n";
    s << "<line x1=\"" << fmt("%.2f", l) << "\" y1=\"" << fmt("%.2f", height - bot) << "\" x2=\""
      << fmt("%.2f", width - rgt) << "\" y2=\"" << fmt("%.2f", height - bot)
      << "\" stroke=\"#000\" stroke-width=\"1\"/>\n";
    // Y ticks at quarters
    for (int i = 0; i <= 4; ++i) {
        const double y = y_max * i / 4.0;
        s << "<line x1=\"" << fmt("%.2f", l - 4) << "\" y1=\"" << fmt("%.2f", py(y)) << "\" x2=\""
          << fmt("%.2f", l) << "\" y2=\"" << fmt("%.2f", py(y)) << "\" stroke=\"#000\"/>\n";
        s << "<text x=\"" << fmt("%.2f", l - 8) << "\" y=\"" << fmt("%.2f", py(y) + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
          << fmt("%.3g", y) << "</text>\n";
    }
    // X ticks at the data points
    for (const auto& [x, y] : points) {
        s << "<line x1=\"" << fmt("%.2f", px(x)) << "\" y1=\"" << fmt("%.2f", height - bot)
          << "\" x2=\"" << fmt("%.2f", px(x)) << "\" y2=\"" << fmt("%.2f", height - bot + 4)
          << "\" stroke=\"#000\"/>\n";
        s << "<text x=\"" << fmt("%.2f", px(x)) << "\" y=\"" << fmt("%.2f", height - bot + 18)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
          << fmt("%.6g", x) << "</text>\n";
    }
    s << "<text x=\"320\" y=\"" << fmt("%.2f", height - 12)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">accumulation "
         "threshold</text>\n";
    s << "<text x=\"18\" y=\"230\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 18 230)\">" << ylabel << "</text>\n";
    if (points.size() > 1) {
        s << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (i) s << ' ';
            s << fmt("%.2f", px(points[i].first)) << ',' << fmt("%.2f", py(points[i].second));
        }
        s << "\"/>\n";
    }
    for (const auto& [x, y] : points) {
        s << "<circle cx=\"" << fmt("%.2f", px(x)) << "\" cy=\"" << fmt("%.2f", py(y))
          << "\" r=\"4\" fill=\"#1f6fb2\"/>\n";
        s << "<text x=\"" << fmt("%.2f", px(x)) << "\" y=\"" << fmt("%.2f", py(y) - 8)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
          << fmt("%.4g", y) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::string csv_quote(const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += "\"\"";
        else q += c;
    }
    return q + "\"";
}

}  // namespace

double al_rate(std::size_t queries, std::size_t al_stream_len) {
    if (queries > al_stream_len) {
        throw std::invalid_argument("al_rate: " + std::to_string(queries) + " queries exceed " +
                                    std::to_string(al_stream_len) + " stream samples");
    }
    if (al_stream_len == 0) return 0.0;
    return static_cast<double>(queries) / static_cast<double>(al_stream_len);
}

double weighted_f1(const std::vector<std::string>& predictions,
                   const std::vector<std::string>& truths) {
    auto by_class = confusion(predictions, truths);
    double sum = 0.0;
    for (const auto& [label, c] : by_class) sum += static_cast<double>(c.support) * c.f1();
    return sum / static_cast<double>(truths.size());
}

std::vector<std::pair<std::string, double>> per_class_f1(
    const std::vector<std::string>& predictions, const std::vector<std::string>& truths) {
    auto by_class = confusion(predictions, truths);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(by_class.size());
    for (const auto& [label, c] : by_class) out.emplace_back(label, c.f1());
    return out;
}

Report run_loso(const ExperimentConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    for (double t : config.thresholds) {
        if (!(t > 0.0 && t < 1.0)) {
            throw std::invalid_argument("run_loso: threshold " + fmt("%.6g", t) +
                                        " outside (0, 1)");
        }
    }

    auto recordings = gather_recordings(config);
    if (recordings.size() < 2) {
        throw std::invalid_argument("run_loso: leave-one-subject-out needs at least 2 users, got " +
                                    std::to_string(recordings.size()));
    }
    for (const auto& rec : recordings) {
        if (!rec.has_labels()) {
            throw DataError("run_loso: user '" + rec.user_id + "' has no labels; the oracle needs them");
        }
    }

    const std::size_t n_users = recordings.size();
    std::vector<std::vector<SensorWindow>> windows(n_users);
    for (std::size_t u = 0; u < n_users; ++u) {
        windows[u] = segment(recordings[u], config.dataset.window_len, config.dataset.overlap);
    }

    // One pre-trained encoder per held-out user, trained on everyone else.
    std::vector<EncoderModel> encoders(n_users);
    if (config.backend == EncoderBackend::kConv) {
        parallel_for(n_users, config.jobs, [&](std::size_t u) {
            std::vector<SensorWindow> train;
            for (std::size_t v = 0; v < n_users; ++v) {
                if (v == u) continue;
                train.insert(train.end(), windows[v].begin(), windows[v].end());
            }
            PretrainConfig pc = config.pretrain;
            pc.seed = derive_seed(config.seed, "pretrain/" + recordings[u].user_id);
            encoders[u] = pretrain(train, pc).model;
        });
    }

    Report report;
    report.backend_name = config.backend == EncoderBackend::kConv ? "conv" : "statistical";
    report.seed = config.seed;
    report.config_hash = config_fingerprint(config);
    report.timestamp = utc_timestamp();

    const std::size_t n_folds = n_users * config.thresholds.size();
    report.folds.resize(n_folds);
    parallel_for(n_folds, config.jobs, [&](std::size_t i) {
        const std::size_t u = i / config.thresholds.size();
        const double threshold = config.thresholds[i % config.thresholds.size()];
        report.folds[i] = run_fold(config, recordings[u].user_id, windows[u],
                                   config.backend == EncoderBackend::kConv ? &encoders[u] : nullptr,
                                   threshold);
    });

    std::vector<double> uniq = config.thresholds;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (double t : uniq) {
        ThresholdSummary s;
        s.threshold = t;
        for (const auto& f : report.folds) {
            if (f.skipped || f.threshold != t) continue;
            ++s.folds;
            s.f1 += f.weighted_f1;
            s.al_rate += f.al_rate;
            s.clusters += static_cast<double>(f.cluster_count);
            s.queries += static_cast<double>(f.queries);
        }
        if (s.folds == 0) continue;
        const auto k = static_cast<double>(s.folds);
        s.f1 /= k;
        s.al_rate /= k;
        s.clusters /= k;
        s.queries /= k;
        report.means.push_back(s);
    }

    report.runtime_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void emit_report(const Report& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create '" + out_dir + "': " + ec.message());

    std::ostringstream sum;
    sum << "meta.backend=" << report.backend_name << '\n';
    sum << "meta.config_hash=" << report.config_hash << '\n';
    sum << "meta.seed=" << report.seed << '\n';
    sum << "meta.timestamp=" << report.timestamp << '\n';
    sum << "meta.runtime_sec=" << fmt("%.3f", report.runtime_sec) << '\n';
    sum << "meta.fold_count=" << report.folds.size() << '\n';
    for (std::size_t i = 0; i < report.folds.size(); ++i) {
        const auto& f = report.folds[i];
        const std::string p = "fold." + std::to_string(i) + ".";
        sum << p << "user=" << f.user << '\n';
        sum << p << "threshold=" << fmt("%.6g", f.threshold) << '\n';
        sum << p << "skipped=" << (f.skipped ? 1 : 0) << '\n';
        if (!f.skipped) {
            sum << p << "clusters=" << f.cluster_count << '\n';
            sum << p << "queries=" << f.queries << '\n';
            sum << p << "al_stream_len=" << f.al_stream_len << '\n';
            sum << p << "al_rate=" << fmt("%.10g", f.al_rate) << '\n';
            sum << p << "f1=" << fmt("%.10g", f.weighted_f1) << '\n';
            for (const auto& [label, v] : f.per_class_f1) {
                sum << p << "f1." << label << '=' << fmt("%.10g", v) << '\n';
            }
        }
        if (!f.note.empty()) sum << p << "note=" << f.note << '\n';
        sum << p << "runtime_sec=" << fmt("%.3f", f.runtime_sec) << '\n';
    }
    for (const auto& m : report.means) {
        const std::string p = "mean." + fmt("%.6g", m.threshold) + ".";
        sum << p << "folds=" << m.folds << '\n';
        sum << p << "f1=" << fmt("%.10g", m.f1) << '\n';
        sum << p << "al_rate=" << fmt("%.10g", m.al_rate) << '\n';
        sum << p << "clusters=" << fmt("%.10g", m.clusters) << '\n';
        sum << p << "queries=" << fmt("%.10g", m.queries) << '\n';
    }
    write_file(fs::path(out_dir) / "summary.txt", sum.str());

    std::ostringstream csv;
    csv << "user,threshold,skipped,clusters,queries,al_stream_len,al_rate,weighted_f1,note\n";
    for (const auto& f : report.folds) {
        csv << csv_quote(f.user) << ',' << fmt("%.6g", f.threshold) << ',' << (f.skipped ? 1 : 0)
            << ',' << f.cluster_count << ',' << f.queries << ',' << f.al_stream_len << ','
            << fmt("%.10g", f.al_rate) << ',' << fmt("%.10g", f.weighted_f1) << ','
            << csv_quote(f.note) << '\n';
    }
    write_file(fs::path(out_dir) / "folds.csv", csv.str());

    if (report.means.empty()) return;
    std::vector<std::pair<double, double>> f1_pts, cl_pts, al_pts;
    double max_clusters = 1.0;
    for (const auto& m : report.means) {
        f1_pts.emplace_back(m.threshold, m.f1);
        cl_pts.emplace_back(m.threshold, m.clusters);
        al_pts.emplace_back(m.threshold, m.al_rate);
        max_clusters = std::max(max_clusters, m.clusters);
    }
    write_file(fs::path(out_dir) / "f1_vs_threshold.svg",
               svg_plot("Weighted F1 vs accumulation threshold", "weighted F1", f1_pts, 1.0));
    write_file(fs::path(out_dir) / "clusters_vs_threshold.svg",
               svg_plot("Clusters vs accumulation threshold", "clusters",
                        cl_pts, std::ceil(max_clusters) + 1.0));
    write_file(fs::path(out_dir) / "al_rate_vs_threshold.svg",
               svg_plot("Active-learning rate vs accumulation threshold", "AL rate", al_pts, 1.0));
}

}  // namespace selfact
