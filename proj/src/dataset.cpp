#include "selfact/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "selfact/errors.hpp"
#include "selfact/rng.hpp"

namespace selfact {

std::string merged_label(const DatasetSpec& spec, const std::string& raw) {
    auto it = spec.label_merge_map.find(raw);
    return it == spec.label_merge_map.end() ? raw : it->second;
}

// ============================================================================
// CSV ingestion
// ============================================================================

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_number(const std::string& s, const char* what, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
        return v;
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": bad " + std::string(what) +
                        " value '" + s + "'");
    }
}

}  // namespace

std::vector<Recording> load_csv(const std::string& path, const DatasetSpec& spec) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    auto header = split_csv_line(line);
    bool with_label = false;
    if (header.size() == 6 && header[5] == "label") {
        with_label = true;
    } else if (header.size() != 5) {
        throw DataError(path + ": line 1: expected header user,timestamp,x,y,z[,label]");
    }
    const char* expect[] = {"user", "timestamp", "x", "y", "z"};
    for (std::size_t i = 0; i < 5; ++i) {
        if (header[i] != expect[i]) {
            throw DataError(path + ": line 1: expected header user,timestamp,x,y,z[,label]");
        }
    }

    // Accumulate per pseudo-user, tracking per source user the last timestamp
    // so monotonicity is checked on the original streams.
    std::map<std::string, Recording> recs;
    std::map<std::string, double> last_t;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != (with_label ? 6u : 5u)) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(with_label ? 6 : 5) + " fields, got " +
                            std::to_string(f.size()));
        }
        const std::string& user = f[0];
        if (user.empty()) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": empty user id");
        }
        Sample s;
        s.t = parse_number(f[1], "timestamp", line_no);
        s.x = parse_number(f[2], "x", line_no);
        s.y = parse_number(f[3], "y", line_no);
        s.z = parse_number(f[4], "z", line_no);

        auto lt = last_t.find(user);
        if (lt != last_t.end() && s.t < lt->second) {
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": non-monotone timestamp for user '" + user + "'");
        }
        last_t[user] = s.t;

        auto gi = spec.user_groups.find(user);
        const std::string& key = gi == spec.user_groups.end() ? user : gi->second;
        Recording& rec = recs[key];
        rec.user_id = key;
        rec.samples.push_back(s);
        if (with_label) rec.labels.push_back(merged_label(spec, f[5]));
    }

    std::vector<Recording> out;
    out.reserve(recs.size());
    for (auto& [key, rec] : recs) {
        // Grouped users' streams interleave; order the merged recording by
        // timestamp (stable, so equal stamps keep file order).
        std::vector<std::size_t> idx(rec.samples.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return rec.samples[a].t < rec.samples[b].t;
        });
        Recording sorted;
        sorted.user_id = rec.user_id;
        sorted.samples.reserve(idx.size());
        if (rec.has_labels()) sorted.labels.reserve(idx.size());
        for (std::size_t i : idx) {
            sorted.samples.push_back(rec.samples[i]);
            if (rec.has_labels()) sorted.labels.push_back(rec.labels[i]);
        }
        out.push_back(std::move(sorted));
    }
    return out;
}

// ============================================================================
// Segmentation
// ============================================================================

namespace {

std::size_t window_stride(std::size_t window_len, double overlap) {
    if (window_len == 0) throw std::invalid_argument("window_len must be positive");
    if (!(overlap >= 0.0 && overlap < 1.0)) {
        throw std::invalid_argument("overlap must be in [0, 1)");
    }
    auto stride = static_cast<std::size_t>(
        std::floor(static_cast<double>(window_len) * (1.0 - overlap)));
    if (stride == 0) throw std::invalid_argument("overlap too large for window length");
    return stride;
}

std::string majority_label(const Recording& rec, std::size_t start, std::size_t len) {
    // Majority vote; ties broken by the label seen earliest inside the window.
    std::map<std::string, std::pair<std::size_t, std::size_t>> stat;  // label -> (count, first)
    for (std::size_t i = 0; i < len; ++i) {
        const std::string& l = rec.labels[start + i];
        auto [it, inserted] = stat.try_emplace(l, 0, i);
        ++it->second.first;
        (void)inserted;
    }
    std::string best;
    std::size_t best_count = 0, best_first = 0;
    for (const auto& [label, cf] : stat) {
        auto [count, first] = cf;
        if (count > best_count || (count == best_count && first < best_first)) {
            best = label;
            best_count = count;
            best_first = first;
        }
    }
    return best;
}

}  // namespace

std::vector<SensorWindow> segment(const Recording& rec, std::size_t window_len, double overlap) {
    std::size_t stride = window_stride(window_len, overlap);
    std::vector<SensorWindow> out;
    if (rec.samples.size() < window_len) return out;
    if (rec.has_labels() && rec.labels.size() != rec.samples.size()) {
        throw std::invalid_argument("labels/samples length mismatch");
    }
    for (std::size_t s = 0; s + window_len <= rec.samples.size(); s += stride) {
        SensorWindow w;
        w.window_len = window_len;
        w.user_id = rec.user_id;
        w.start_index = s;
        w.values.resize(window_len * 3);
        for (std::size_t i = 0; i < window_len; ++i) {
            const Sample& smp = rec.samples[s + i];
            w.values[i * 3 + 0] = smp.x;
            w.values[i * 3 + 1] = smp.y;
            w.values[i * 3 + 2] = smp.z;
        }
        if (rec.has_labels()) w.oracle_label = majority_label(rec, s, window_len);
        out.push_back(std::move(w));
    }
    return out;
}

// ============================================================================
// Synthetic generator
// ============================================================================

std::vector<ActivityPattern> default_activity_set(std::size_t n) {
    static const std::vector<ActivityPattern> base = {
        {"walk", 1.8, {1.4, 1.0, 1.8}, {0.3, -0.2, 9.6}},
        {"jog", 2.6, {3.4, 2.6, 4.2}, {0.6, 0.2, 9.3}},
        {"sit", 0.4, {0.12, 0.10, 0.16}, {6.2, 0.8, 7.4}},
        {"stand", 0.3, {0.10, 0.07, 0.12}, {0.2, 0.1, 9.81}},
        {"stairs", 1.5, {2.2, 1.7, 2.7}, {1.2, 0.5, 9.2}},
        {"bike", 1.1, {0.9, 2.3, 1.1}, {3.4, 2.2, 8.6}},
    };
    std::vector<ActivityPattern> out;
    for (std::size_t i = 0; i < n; ++i) {
        ActivityPattern p = base[i % base.size()];
        std::size_t cycle = i / base.size();
        if (cycle > 0) {
            p.name += "_" + std::to_string(cycle);
            p.freq_hz += 0.35 * static_cast<double>(cycle);
            for (auto& a : p.amplitude) a *= 1.0 + 0.3 * static_cast<double>(cycle);
            for (auto& o : p.offset) o += 1.1 * static_cast<double>(cycle);
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Recording> synth_generate(const SynthSpec& spec) {
    if (spec.activities.size() < 2) {
        throw std::invalid_argument("synth_generate requires at least 2 activities");
    }
    if (spec.noise_std < 0.0) throw std::invalid_argument("noise_std must be non-negative");
    if (spec.n_users == 0) throw std::invalid_argument("n_users must be positive");
    if (spec.windows_per_activity == 0) {
        throw std::invalid_argument("windows_per_activity must be positive");
    }
    if (spec.sample_rate_hz <= 0.0) throw std::invalid_argument("sample_rate_hz must be positive");

    const std::size_t wl = spec.window_len;
    const std::size_t stride = window_stride(wl, spec.overlap);
    const std::size_t rounds = std::max<std::size_t>(
        1, std::min(spec.rounds, spec.windows_per_activity));

    // Straddling windows at bout boundaries get the majority label; with the
    // earliest-label tie break, `left` of them land on the earlier bout and
    // `right` on the later one. Bout lengths are shrunk so each activity's
    // window count comes out exactly at windows_per_activity (exact when the
    // stride divides the window length).
    const std::size_t straddle = (wl + stride - 1) / stride - 1;
    const std::size_t left = wl / (2 * stride);
    const std::size_t right = straddle - left;

    struct Bout {
        std::size_t activity;
        std::size_t target_windows;
    };
    std::vector<Bout> bouts;
    for (std::size_t round = 0; round < rounds; ++round) {
        for (std::size_t a = 0; a < spec.activities.size(); ++a) {
            std::size_t cnt = spec.windows_per_activity / rounds +
                              (round < spec.windows_per_activity % rounds ? 1 : 0);
            if (cnt > 0) bouts.push_back({a, cnt});
        }
    }

    std::vector<Recording> out;
    out.reserve(spec.n_users);
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        Rng rng(derive_seed(spec.seed, "synth/user/" + std::to_string(u)));

        // Inter-user variability: per-activity amplitude scale and per-axis phase.
        std::vector<double> amp_scale(spec.activities.size());
        std::vector<std::array<double, 3>> phase(spec.activities.size());
        for (std::size_t a = 0; a < spec.activities.size(); ++a) {
            amp_scale[a] = rng.uniform(0.85, 1.15);
            for (std::size_t ax = 0; ax < 3; ++ax) {
                phase[a][ax] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            }
        }

        Recording rec;
        rec.user_id = "u" + std::to_string(u);
        std::size_t g = 0;  // global sample index
        for (std::size_t k = 0; k < bouts.size(); ++k) {
            std::size_t fulls = bouts[k].target_windows;
            if (k + 1 < bouts.size()) {
                if (fulls <= left) {
                    throw std::invalid_argument(
                        "windows_per_activity too small for rounds/overlap");
                }
                fulls -= left;
            }
            if (k > 0) {
                if (fulls <= right) {
                    throw std::invalid_argument(
                        "windows_per_activity too small for rounds/overlap");
                }
                fulls -= right;
            }
            const std::size_t bout_samples = wl + (fulls - 1) * stride;
            const ActivityPattern& act = spec.activities[bouts[k].activity];
            const double wobble = rng.uniform(0.9, 1.1);  // within-class spread
            for (std::size_t i = 0; i < bout_samples; ++i, ++g) {
                Sample s;
                s.t = static_cast<double>(g) / spec.sample_rate_hz;
                double w = 2.0 * 3.14159265358979323846 * act.freq_hz * s.t;
                double* axes[3] = {&s.x, &s.y, &s.z};
                for (std::size_t ax = 0; ax < 3; ++ax) {
                    double v = act.offset[ax] +
                               act.amplitude[ax] * amp_scale[bouts[k].activity] * wobble *
                                   std::sin(w + phase[bouts[k].activity][ax]);
                    if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
                    *axes[ax] = v;
                }
                rec.samples.push_back(s);
                rec.labels.push_back(act.name);
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace selfact
