#include "selfact/config.hpp"

#include <cstdio>
#include <map>
#include <fstream>
#include <functional>
#include <sstream>

#include "selfact/errors.hpp"
#include "selfact/rng.hpp"

namespace selfact {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& v) {
    std::size_t pos = 0;
    double d;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw DataError("not a number: '" + v + "'");
    }
    if (pos != v.size()) throw DataError("trailing junk after number: '" + v + "'");
    return d;
}

std::size_t parse_size(const std::string& v) {
    std::size_t pos = 0;
    unsigned long long u;
    try {
        u = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw DataError("not a count: '" + v + "'");
    }
    if (pos != v.size() || v.front() == '-') throw DataError("not a count: '" + v + "'");
    return static_cast<std::size_t>(u);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw DataError("not a boolean (true/false): '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::map<std::string, std::string> parse_map(const std::string& v) {
    std::map<std::string, std::string> out;
    for (const auto& item : split_list(v)) {
        std::size_t colon = item.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == item.size()) {
            throw DataError("expected 'from:to' pairs, got '" + item + "'");
        }
        out[trim(item.substr(0, colon))] = trim(item.substr(colon + 1));
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += items[i];
    }
    return out;
}

std::string join_map(const std::map<std::string, std::string>& m) {
    std::string out;
    for (const auto& [k, v] : m) {
        if (!out.empty()) out += ',';
        out += k + ':' + v;
    }
    return out;
}

struct KeySpec {
    const char* key;
    const char* help;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

const std::vector<KeySpec>& specs() {
    static const std::vector<KeySpec> table = {
        {"seed", "root seed; every random component derives from it by name",
         [](const ExperimentConfig& c) { return std::to_string(c.seed); },
         [](ExperimentConfig& c, const std::string& v) { c.seed = parse_size(v); }},
        {"jobs", "worker threads for fold-level parallelism",
         [](const ExperimentConfig& c) { return std::to_string(c.jobs); },
         [](ExperimentConfig& c, const std::string& v) { c.jobs = parse_size(v); }},
        {"backend", "embedding backend: statistical | conv",
         [](const ExperimentConfig& c) {
             return std::string(c.backend == EncoderBackend::kConv ? "conv" : "statistical");
         },
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "conv") c.backend = EncoderBackend::kConv;
             else if (v == "statistical") c.backend = EncoderBackend::kStatistical;
             else throw DataError("backend must be 'statistical' or 'conv', got '" + v + "'");
         }},
        {"data.csv_paths", "comma-separated CSV files; empty selects the synthetic generator",
         [](const ExperimentConfig& c) { return join(c.csv_paths); },
         [](ExperimentConfig& c, const std::string& v) { c.csv_paths = split_list(v); }},
        {"data.window_len", "window length in samples",
         [](const ExperimentConfig& c) { return std::to_string(c.dataset.window_len); },
         [](ExperimentConfig& c, const std::string& v) { c.dataset.window_len = parse_size(v); }},
        {"data.overlap", "fraction of window shared with its successor, in [0,1)",
         [](const ExperimentConfig& c) { return fmt_double(c.dataset.overlap); },
         [](ExperimentConfig& c, const std::string& v) { c.dataset.overlap = parse_double(v); }},
        {"data.label_merge", "label rewrites as from:to pairs, comma-separated",
         [](const ExperimentConfig& c) { return join_map(c.dataset.label_merge_map); },
         [](ExperimentConfig& c, const std::string& v) { c.dataset.label_merge_map = parse_map(v); }},
        {"data.user_groups", "user:pseudo-user grouping as from:to pairs",
         [](const ExperimentConfig& c) { return join_map(c.dataset.user_groups); },
         [](ExperimentConfig& c, const std::string& v) { c.dataset.user_groups = parse_map(v); }},
        {"synth.users", "synthetic users",
         [](const ExperimentConfig& c) { return std::to_string(c.synth.n_users); },
         [](ExperimentConfig& c, const std::string& v) { c.synth.n_users = parse_size(v); }},
        {"synth.activities", "synthetic activity count (built-in pattern set)",
         [](const ExperimentConfig& c) { return std::to_string(c.synth.activities.size()); },
         [](ExperimentConfig& c, const std::string& v) {
             c.synth.activities = default_activity_set(parse_size(v));
         }},
        {"synth.windows_per_activity", "windows per activity per user",
         [](const ExperimentConfig& c) { return std::to_string(c.synth.windows_per_activity); },
         [](ExperimentConfig& c, const std::string& v) {
             c.synth.windows_per_activity = parse_size(v);
         }},
        {"synth.noise_std", "additive sensor noise sigma, m/s^2",
         [](const ExperimentConfig& c) { return fmt_double(c.synth.noise_std); },
         [](ExperimentConfig& c, const std::string& v) { c.synth.noise_std = parse_double(v); }},
        {"synth.rounds", "bout interleaving rounds per activity",
         [](const ExperimentConfig& c) { return std::to_string(c.synth.rounds); },
         [](ExperimentConfig& c, const std::string& v) { c.synth.rounds = parse_size(v); }},
        {"synth.sample_rate_hz", "synthetic sampling rate",
         [](const ExperimentConfig& c) { return fmt_double(c.synth.sample_rate_hz); },
         [](ExperimentConfig& c, const std::string& v) { c.synth.sample_rate_hz = parse_double(v); }},
        {"session.acc_th", "absolute accumulation threshold (single-session runs)",
         [](const ExperimentConfig& c) { return std::to_string(c.session.acc_th); },
         [](ExperimentConfig& c, const std::string& v) { c.session.acc_th = parse_size(v); }},
        {"session.reducer_out_dim", "reduced embedding dimension",
         [](const ExperimentConfig& c) { return std::to_string(c.session.reducer_out_dim); },
         [](ExperimentConfig& c, const std::string& v) {
             c.session.reducer_out_dim = parse_size(v);
         }},
        {"session.dbscan_eps", "DBSCAN radius; 0 selects the median-4NN heuristic",
         [](const ExperimentConfig& c) { return fmt_double(c.session.dbscan_eps); },
         [](ExperimentConfig& c, const std::string& v) { c.session.dbscan_eps = parse_double(v); }},
        {"session.dbscan_min_pts", "DBSCAN core threshold (neighbourhood size incl. self)",
         [](const ExperimentConfig& c) { return std::to_string(c.session.dbscan_min_pts); },
         [](ExperimentConfig& c, const std::string& v) {
             c.session.dbscan_min_pts = parse_size(v);
         }},
        {"pretrain.epochs", "contrastive pre-training epochs (desk-scale default)",
         [](const ExperimentConfig& c) { return std::to_string(c.pretrain.epochs); },
         [](ExperimentConfig& c, const std::string& v) { c.pretrain.epochs = parse_size(v); }},
        {"pretrain.batch_size", "contrastive batch size (desk-scale default)",
         [](const ExperimentConfig& c) { return std::to_string(c.pretrain.batch_size); },
         [](ExperimentConfig& c, const std::string& v) { c.pretrain.batch_size = parse_size(v); }},
        {"pretrain.base_lr", "SGD base learning rate under per-step cosine decay",
         [](const ExperimentConfig& c) { return fmt_double(c.pretrain.base_lr); },
         [](ExperimentConfig& c, const std::string& v) { c.pretrain.base_lr = parse_double(v); }},
        {"pretrain.temperature", "NT-Xent temperature",
         [](const ExperimentConfig& c) { return fmt_double(c.pretrain.temperature); },
         [](ExperimentConfig& c, const std::string& v) {
             c.pretrain.temperature = parse_double(v);
         }},
        {"finetune.epochs", "fine-tuning epoch budget",
         [](const ExperimentConfig& c) { return std::to_string(c.finetune.epochs); },
         [](ExperimentConfig& c, const std::string& v) { c.finetune.epochs = parse_size(v); }},
        {"finetune.batch_size", "fine-tuning batch size",
         [](const ExperimentConfig& c) { return std::to_string(c.finetune.batch_size); },
         [](ExperimentConfig& c, const std::string& v) { c.finetune.batch_size = parse_size(v); }},
        {"finetune.lr", "Adam learning rate",
         [](const ExperimentConfig& c) { return fmt_double(c.finetune.lr); },
         [](ExperimentConfig& c, const std::string& v) { c.finetune.lr = parse_double(v); }},
        {"finetune.patience", "epochs without validation improvement before stopping",
         [](const ExperimentConfig& c) { return std::to_string(c.finetune.patience); },
         [](ExperimentConfig& c, const std::string& v) { c.finetune.patience = parse_size(v); }},
        {"finetune.validation_fraction", "held-out fraction of the labeled set, in (0,1)",
         [](const ExperimentConfig& c) { return fmt_double(c.finetune.validation_fraction); },
         [](ExperimentConfig& c, const std::string& v) {
             c.finetune.validation_fraction = parse_double(v);
         }},
        {"finetune.unfreeze_encoder", "train the conv encoder during fine-tuning",
         [](const ExperimentConfig& c) {
             return std::string(c.finetune.unfreeze_encoder ? "true" : "false");
         },
         [](ExperimentConfig& c, const std::string& v) {
             c.finetune.unfreeze_encoder = parse_bool(v);
         }},
        {"eval.thresholds", "accumulation-threshold sweep, fractions in (0,1)",
         [](const ExperimentConfig& c) {
             std::string out;
             for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
                 if (i) out += ',';
                 out += fmt_double(c.thresholds[i]);
             }
             return out;
         },
         [](ExperimentConfig& c, const std::string& v) {
             c.thresholds.clear();
             for (const auto& item : split_list(v)) c.thresholds.push_back(parse_double(item));
         }},
    };
    return table;
}

const KeySpec& find_spec(const std::string& key) {
    for (const auto& s : specs()) {
        if (key == s.key) return s;
    }
    throw DataError("unknown config key '" + key + "'");
}

void assign(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    find_spec(key).set(cfg, value);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        const auto defaults = default_experiment_config();
        for (const auto& s : specs()) out.push_back({s.key, s.get(defaults), s.help});
        return out;
    }();
    return keys;
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    // Desk-scale defaults: enough to exercise the full pipeline in seconds.
    cfg.pretrain.epochs = 10;
    cfg.pretrain.batch_size = 64;
    cfg.synth.activities = default_activity_set(4);
    return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg = default_experiment_config();
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        try {
            assign(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const DataError& e) {
            throw DataError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw DataError("override '" + assignment + "' is not key=value");
    }
    assign(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string canonical_config_string(const ExperimentConfig& config) {
    std::ostringstream out;
    for (const auto& s : specs()) out << s.key << '=' << s.get(config) << '\n';
    return out.str();
}

std::string config_fingerprint(const ExperimentConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config_string(config))));
    return buf;
}

}  // namespace selfact
