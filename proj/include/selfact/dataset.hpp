#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace selfact {

// One raw accelerometer sample.
struct Sample {
    double t = 0.0;  // seconds
    double x = 0.0, y = 0.0, z = 0.0;  // m/s^2
};

// A single user's (or pseudo-user's) recorded stream. Labels, when present,
// are per-sample and only exist in oracle/evaluation context.
struct Recording {
    std::string user_id;
    std::vector<Sample> samples;
    std::vector<std::string> labels;  // empty, or same length as samples

    bool has_labels() const { return !labels.empty(); }
};

// Fixed-length tri-axial segment; the unit of all downstream processing.
// values is row-major (window_len x 3).
struct SensorWindow {
    std::vector<double> values;
    std::size_t window_len = 0;
    std::string oracle_label;  // majority per-sample label; empty when unlabeled
    std::string user_id;
    std::size_t start_index = 0;

    double at(std::size_t i, std::size_t axis) const { return values[i * 3 + axis]; }
    bool has_label() const { return !oracle_label.empty(); }
};

struct DatasetSpec {
    std::size_t window_len = 100;
    double overlap = 0.5;  // fraction in [0, 1)
    std::map<std::string, std::string> label_merge_map;  // identity by default
    std::map<std::string, std::string> user_groups;      // user_id -> pseudo-user id
};

// Applies the merge map; labels without an entry pass through unchanged.
std::string merged_label(const DatasetSpec& spec, const std::string& raw);

// Reads `user,timestamp,x,y,z[,label]` CSV into one Recording per distinct
// user (or pseudo-user when user_groups is given). Recordings are sorted by
// user id; grouped users' samples are ordered by timestamp.
std::vector<Recording> load_csv(const std::string& path, const DatasetSpec& spec);

// Segments a recording into fixed-length windows starting every
// floor(window_len * (1 - overlap)) samples; the trailing partial window is
// discarded. A recording shorter than window_len yields an empty sequence.
// Window labels are the majority per-sample label, ties broken by the label
// appearing earliest in the window.
std::vector<SensorWindow> segment(const Recording& rec, std::size_t window_len, double overlap);

// ============================================================================
// Synthetic data
// ============================================================================

// A periodic motion template: per-axis sinusoid amplitude and DC offset at a
// base frequency. Activities are distinguishable through amplitude/offset
// structure as well as frequency.
struct ActivityPattern {
    std::string name;
    double freq_hz = 1.0;
    std::array<double, 3> amplitude{1.0, 1.0, 1.0};
    std::array<double, 3> offset{0.0, 0.0, 0.0};
};

struct SynthSpec {
    std::size_t n_users = 3;
    std::vector<ActivityPattern> activities;
    std::size_t windows_per_activity = 40;
    double noise_std = 0.3;   // m/s^2
    std::uint64_t seed = 1;
    // Segmentation geometry the generator aligns bouts to, so that
    // segment(window_len, overlap) yields exactly windows_per_activity
    // windows per label (requires the stride to divide window_len).
    std::size_t window_len = 100;
    double overlap = 0.5;
    // Activity bouts are interleaved over this many rounds so every phase of
    // the stream contains every activity.
    std::size_t rounds = 4;
    double sample_rate_hz = 50.0;
};

// Deterministic given seed. Each user's stream is a sequence of contiguous
// single-activity bouts, cycling through all activities `rounds` times, with
// per-user phase/amplitude jitter and per-bout amplitude wobble.
std::vector<Recording> synth_generate(const SynthSpec& spec);

// Built-in well-separated patterns (walk, jog, sit, stand, ...), cycled with
// parameter shifts when n exceeds the base set.
std::vector<ActivityPattern> default_activity_set(std::size_t n);

}  // namespace selfact
