// selfact — command-line front end for the personalization pipeline.
//
// Three subcommands map onto the pipeline phases:
//   pretrain  self-supervised contrastive pre-training; writes an encoder model
//   run       replay one user's stream through a session; writes trace + classifier
//   eval      leave-one-subject-out sweep over accumulation thresholds; writes a report
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 pipeline error.

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "selfact/config.hpp"
#include "selfact/dataset.hpp"
#include "selfact/encoder.hpp"
#include "selfact/errors.hpp"
#include "selfact/finetune.hpp"
#include "selfact/harness.hpp"
#include "selfact/rng.hpp"
#include "selfact/serialize.hpp"
#include "selfact/session.hpp"

namespace {

using namespace selfact;
namespace fs = std::filesystem;

std::string env_out_base() {
    const char* env = std::getenv("SELFACT_OUT");
    return (env && *env) ? std::string(env) : std::string(".");
}

std::string config_key_help() {
    std::string out = "Configuration keys (key = default):\n";
    for (const auto& k : config_keys()) {
        out += "  " + k.key + " = " + (k.default_value.empty() ? "(empty)" : k.default_value) +
               "\n        " + k.help + "\n";
    }
    return out;
}

// Shared flags; CLI11's count() tells us which were actually given so that
// command-line values override the config file.
struct CommonFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    std::size_t jobs = 0;
    std::string thresholds;
    std::string backend;
};

void add_common(CLI::App* cmd, CommonFlags* f) {
    cmd->add_option("--config", f->config_path, "key=value config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", f->overrides, "override a config key (key=value, repeatable)");
    cmd->add_option("--seed", f->seed, "root RNG seed (overrides config)");
    cmd->add_option("--jobs", f->jobs, "worker threads for fold evaluation");
    cmd->add_option("--thresholds", f->thresholds,
                    "comma-separated accumulation-threshold fractions in (0,1)");
    cmd->add_option("--backend", f->backend, "embedding backend: statistical | conv");
}

ExperimentConfig make_config(const CLI::App& cmd, const CommonFlags& f) {
    ExperimentConfig cfg =
        f.config_path.empty() ? default_experiment_config() : load_config_file(f.config_path);
    for (const auto& kv : f.overrides) apply_override(cfg, kv);
    if (cmd.count("--seed")) apply_override(cfg, "seed=" + std::to_string(f.seed));
    if (cmd.count("--jobs")) apply_override(cfg, "jobs=" + std::to_string(f.jobs));
    if (cmd.count("--thresholds")) apply_override(cfg, "eval.thresholds=" + f.thresholds);
    if (cmd.count("--backend")) apply_override(cfg, "backend=" + f.backend);
    return cfg;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

int cmd_pretrain(const ExperimentConfig& cfg, const std::string& out_path) {
    auto recordings = gather_recordings(cfg);
    std::vector<SensorWindow> windows;
    for (const auto& rec : recordings) {
        auto w = segment(rec, cfg.dataset.window_len, cfg.dataset.overlap);
        windows.insert(windows.end(), w.begin(), w.end());
    }
    if (windows.empty()) throw DataError("no windows to pre-train on");

    PretrainConfig pc = cfg.pretrain;
    pc.seed = derive_seed(cfg.seed, "pretrain");
    const auto t0 = std::chrono::steady_clock::now();
    auto result = pretrain(windows, pc);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto container = to_container(result.model);
    save_container(container, out_path);

    std::printf("pretrained on %zu windows from %zu users (%zu steps)\n", windows.size(),
                recordings.size(), result.steps);
    std::printf("epoch mean loss: first %.6f, final %.6f\n", result.epoch_mean_loss.front(),
                result.epoch_mean_loss.back());
    std::printf("wall time: %.2f s\n", secs);
    std::printf("model: %s (param hash %016" PRIx64 ")\n", out_path.c_str(),
                container_hash(container));
    return 0;
}

int cmd_run(const ExperimentConfig& cfg, const std::string& out_dir,
            const std::string& stream_path, const std::string& model_path, double acc_th_flag,
            bool acc_th_given) {
    // Stream: an explicit single-user CSV, else the first configured user.
    std::vector<SensorWindow> windows;
    std::string user;
    if (!stream_path.empty()) {
        auto recs = load_csv(stream_path, cfg.dataset);
        if (recs.size() != 1) {
            throw DataError("stream csv must contain exactly one user, got " +
                            std::to_string(recs.size()));
        }
        user = recs[0].user_id;
        windows = segment(recs[0], cfg.dataset.window_len, cfg.dataset.overlap);
    } else {
        auto recs = gather_recordings(cfg);
        if (recs.empty()) throw DataError("no stream data configured");
        user = recs.front().user_id;
        windows = segment(recs.front(), cfg.dataset.window_len, cfg.dataset.overlap);
    }

    SessionConfig sc = cfg.session;
    sc.window_len = cfg.dataset.window_len;
    sc.overlap = cfg.dataset.overlap;
    sc.backend = cfg.backend;
    if (acc_th_given) {
        sc.acc_th = acc_th_flag < 1.0 ? static_cast<std::size_t>(std::llround(
                                            acc_th_flag * static_cast<double>(windows.size())))
                                      : static_cast<std::size_t>(std::llround(acc_th_flag));
    }
    EncoderModel encoder;
    if (cfg.backend == EncoderBackend::kConv) {
        if (model_path.empty()) {
            throw std::invalid_argument("conv backend requires --model <pretrained encoder>");
        }
        encoder_from_container(load_container(model_path), encoder);
        sc.conv_model = &encoder;
    }
    if (sc.acc_th >= windows.size()) {
        throw PipelineError("accumulation never completed: threshold " +
                            std::to_string(sc.acc_th) + " needs more than the stream's " +
                            std::to_string(windows.size()) + " windows");
    }

    Session session(sc);
    for (const auto& w : windows) session.process_sample(w);
    auto fin = session.finish();

    ensure_dir(out_dir);
    const fs::path out(out_dir);

    std::string trace_text;
    for (const auto& line : session.trace()) trace_text += line + "\n";
    write_text(out / "trace.txt", trace_text);

    std::string labeled_text = "start_index,label\n";
    for (const auto& [w, label] : fin.labeled) {
        labeled_text += std::to_string(w.start_index) + "," + label + "\n";
    }
    write_text(out / "labeled.csv", labeled_text);

    char buf[160];
    std::string summary;
    summary += "user=" + user + "\n";
    summary += "backend=" + std::string(cfg.backend == EncoderBackend::kConv ? "conv"
                                                                             : "statistical") + "\n";
    summary += "config_hash=" + config_fingerprint(cfg) + "\n";
    summary += "windows=" + std::to_string(windows.size()) + "\n";
    summary += "acc_th=" + std::to_string(sc.acc_th) + "\n";
    summary += "clusters=" + std::to_string(session.store().clusters.size()) + "\n";
    summary += "queries=" + std::to_string(fin.queries_issued) + "\n";
    summary += "al_stream_len=" + std::to_string(fin.al_stream_len) + "\n";
    std::snprintf(buf, sizeof buf, "al_rate=%.10g\n",
                  al_rate(fin.queries_issued, fin.al_stream_len));
    summary += buf;

    if (fin.labeled.size() >= 2) {
        FineTuneConfig fc = cfg.finetune;
        fc.seed = derive_seed(cfg.seed, "finetune");
        auto ft = fine_tune(fin.labeled, cfg.backend, sc.conv_model, fc);
        save_container(to_container(ft.classifier), (out / "classifier.txt").string());
        std::snprintf(buf, sizeof buf, "train_accuracy=%.10g\n", ft.stats.train_accuracy);
        summary += buf;
        summary += "finetune_epochs=" + std::to_string(ft.stats.epochs_run) + "\n";
        std::set<std::string> classes;
        for (const auto& [w, label] : fin.labeled) classes.insert(label);
        summary += "classes=" + std::to_string(classes.size()) + "\n";
    } else {
        summary += "note=too few labeled samples (" + std::to_string(fin.labeled.size()) +
                   ") to fine-tune a classifier\n";
    }
    write_text(out / "session_summary.txt", summary);

    std::printf("session over %zu windows: %zu clusters, %zu queries on %zu AL samples "
                "(al_rate %.4f)\n",
                windows.size(), session.store().clusters.size(), fin.queries_issued,
                fin.al_stream_len, al_rate(fin.queries_issued, fin.al_stream_len));
    std::printf("artifacts: %s\n", out_dir.c_str());
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& out_dir) {
    auto report = run_loso(cfg);
    emit_report(report, out_dir);

    std::size_t skipped = 0;
    for (const auto& f : report.folds) skipped += f.skipped ? 1u : 0u;
    for (const auto& m : report.means) {
        std::printf("threshold %.6g: mean weighted F1 %.4f, al_rate %.4f (%zu folds)\n",
                    m.threshold, m.f1, m.al_rate, m.folds);
    }
    if (report.means.empty()) std::printf("no scorable folds\n");
    if (skipped) std::printf("skipped folds: %zu of %zu\n", skipped, report.folds.size());
    std::printf("report: %s\n", out_dir.c_str());
    return 0;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const PipelineError& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"selfact: self-supervised personalization for activity recognition"};
    app.require_subcommand(1);
    app.footer(config_key_help());

    CommonFlags pf, rf, ef;
    std::string pretrain_out, run_out, eval_out;
    std::string run_stream, run_model;
    double run_acc_th = 0.0;

    auto* pre = app.add_subcommand("pretrain", "train the contrastive encoder, write the model");
    add_common(pre, &pf);
    pre->add_option("--out", pretrain_out,
                    "output model file (default $SELFACT_OUT/encoder.txt or ./encoder.txt)");

    auto* run = app.add_subcommand("run", "replay one user's stream through a session");
    add_common(run, &rf);
    run->add_option("--out", run_out,
                    "output directory (default $SELFACT_OUT/session or ./session)");
    run->add_option("--stream", run_stream, "single-user stream CSV (default: first config user)")
        ->check(CLI::ExistingFile);
    run->add_option("--model", run_model, "pretrained encoder (required for --backend conv)")
        ->check(CLI::ExistingFile);
    run->add_option("--acc-th", run_acc_th,
                    "accumulation threshold: < 1 is a fraction of the stream, >= 1 absolute");

    auto* ev = app.add_subcommand("eval", "leave-one-subject-out threshold sweep + report");
    add_common(ev, &ef);
    ev->add_option("--out", eval_out, "report directory (default $SELFACT_OUT/eval or ./eval)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (pre->parsed()) {
        return guarded([&] {
            auto cfg = make_config(*pre, pf);
            if (pretrain_out.empty()) pretrain_out = env_out_base() + "/encoder.txt";
            return cmd_pretrain(cfg, pretrain_out);
        });
    }
    if (run->parsed()) {
        return guarded([&] {
            auto cfg = make_config(*run, rf);
            if (run_out.empty()) run_out = env_out_base() + "/session";
            return cmd_run(cfg, run_out, run_stream, run_model, run_acc_th,
                           run->count("--acc-th") > 0);
        });
    }
    return guarded([&] {
        auto cfg = make_config(*ev, ef);
        if (eval_out.empty()) eval_out = env_out_base() + "/eval";
        return cmd_eval(cfg, eval_out);
    });
}
