#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfkd/errors.hpp"
#include "pfkd/rng.hpp"

namespace pfkd {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class InstanceKind : std::uint8_t { adl = 0, fall = 1 };
enum class WindowLabel : std::uint8_t { adl = 0, fall = 1 };

// One recorded trial: F frames of 9-axis samples at 100 Hz, with fall onset
// and impact frame annotations on fall instances.
struct SensorInstance {
  std::string subject_id;
  std::string instance_id;
  InstanceKind kind = InstanceKind::adl;
  std::int64_t axes = 9;
  std::vector<float> samples;  // F x axes, row-major
  std::optional<std::int64_t> onset_frame;
  std::optional<std::int64_t> impact_frame;

  std::int64_t frames() const { return static_cast<std::int64_t>(samples.size()) / axes; }
};

struct LabeledWindow {
  std::vector<float> data;  // length x axes, row-major
  WindowLabel label = WindowLabel::adl;
  std::string instance_id;
  std::string subject_id;
  std::int64_t start_frame = 0;
};

// Instance metadata kept alongside cached windows; evaluation needs the
// impact frame to compute lead times.
struct InstanceMeta {
  std::string instance_id;
  std::string subject_id;
  InstanceKind kind = InstanceKind::adl;
  std::int64_t frames = 0;
  std::int64_t onset_frame = -1;   // -1 when absent
  std::int64_t impact_frame = -1;
};

struct PreparedData {
  std::int64_t window_len = 50;
  std::int64_t axes = 9;
  std::vector<InstanceMeta> instances;
  std::vector<LabeledWindow> windows;

  const InstanceMeta& meta(const std::string& instance_id) const;
};

// Windowing rules: 50-frame windows, ADL instances split into 10 parts with
// one random window each, fall instances slid by 10 frames up to the impact,
// fall label at >= 5 post-onset frames, first 3 pre-impact windows at test
// time, pre-impact oversampling factor 6.
struct WindowConfig {
  std::int64_t length = 50;
  std::int64_t axes = 9;
  std::int64_t adl_parts = 10;
  std::int64_t slide_step = 10;
  std::int64_t min_post_onset = 5;
  std::int64_t test_pre_impact = 3;
  std::int64_t oversample_factor = 6;

  void validate() const {
    if (length <= 0 || axes <= 0 || adl_parts <= 0 || slide_step <= 0 || min_post_onset <= 0 ||
        test_pre_impact <= 0 || oversample_factor <= 0)
      throw ConfigError("window config values must be positive");
    if (min_post_onset > length)
      throw ConfigError("min_post_onset cannot exceed the window length");
  }
};

struct AugmentConfig {
  double strength = -0.5;  // s in the sigmoid gate
  double noise_coefficient = 0.25;
  double scale_low = 0.75;
  double scale_high = 1.25;
  // "literal" applies U(lo,hi)*sigmoid(s) as a plain product, which shrinks
  // amplitude by roughly 2.6x at s=-0.5; "interpolated" blends toward 1 with
  // 1 + (U-1)*sigmoid(s) instead.
  enum class ScaleMode : std::uint8_t { literal = 0, interpolated = 1 } scale_mode =
      ScaleMode::literal;

  void validate() const {
    if (scale_low >= scale_high) throw ConfigError("augment scale_low must be < scale_high");
    if (noise_coefficient < 0.0) throw ConfigError("augment noise_coefficient must be >= 0");
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Five disjoint subject groups; each fold tests one group, pre-trains the
// teacher on two and trains the student on the remaining two.
struct SplitPlan {
  struct FoldRoles {
    int test = 0;
    std::array<int, 2> teacher{};
    std::array<int, 2> student{};
  };
  std::vector<std::vector<std::string>> groups;
  std::vector<FoldRoles> folds;

  enum class Role { test, teacher_train, student_train };
  std::vector<std::string> subjects_for(int fold, Role role) const;
  int num_folds() const { return static_cast<int>(folds.size()); }
};

// ---------------------------------------------------------------------------
// Parsing (canonical delimited-text formats; see README for the layout)
// ---------------------------------------------------------------------------

// Column positions inside a sensor file row. The defaults match the canonical
// format (frame counter first, then the 9 axis columns); other layouts are
// mapped by configuring the indices.
struct ColumnMap {
  std::int64_t frame_col = 0;
  std::vector<std::int64_t> value_cols{1, 2, 3, 4, 5, 6, 7, 8, 9};
};

// Parses one sensor file: returns F x axes samples. Validates column counts,
// numeric fields and strictly increasing frame counters; errors carry
// file:line context.
std::vector<float> parse_sensor_file(const std::string& path, const ColumnMap& columns);

struct LabelRecord {
  std::string instance_id;
  std::int64_t onset_frame = 0;
  std::int64_t impact_frame = 0;
};

std::vector<LabelRecord> parse_label_file(const std::string& path);

// Loads a dataset directory: instances.csv manifest (subject_id, instance_id,
// kind, path), labels.csv annotations, and the referenced sensor files.
std::vector<SensorInstance> load_dataset(const std::string& data_dir, const ColumnMap& columns);

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

// Splits an ADL instance into adl_parts equal parts (remainder appended to
// the last) and samples one window uniformly inside each part, clipped to the
// instance bounds.
std::vector<LabeledWindow> sample_adl_windows(const SensorInstance& instance,
                                              const WindowConfig& cfg, RngStream& rng);

// Slides a window over a fall instance up to the impact frame; a window is a
// pre-impact fall iff it contains at least min_post_onset frames at or after
// the onset.
std::vector<LabeledWindow> slide_fall_windows(const SensorInstance& instance,
                                              const WindowConfig& cfg);

std::vector<LabeledWindow> make_windows(const SensorInstance& instance, const WindowConfig& cfg,
                                        RngStream& rng);

// Oversamples pre-impact windows to oversample_factor total copies, then runs
// every window (both classes) through augment_noise and augment_scale.
// Originals are not retained.
std::vector<LabeledWindow> build_train_set(const std::vector<LabeledWindow>& windows,
                                           const WindowConfig& cfg, const AugmentConfig& aug,
                                           RngStream& rng);

// Keeps the earliest test_pre_impact fall windows per fall instance and every
// ADL-labeled window (including pre-onset windows of fall instances).
std::vector<LabeledWindow> build_test_set(const std::vector<LabeledWindow>& windows,
                                          const WindowConfig& cfg);

// ---------------------------------------------------------------------------
// Augmentations
// ---------------------------------------------------------------------------

// Additive Gaussian noise gated by sigmoid(strength); sigma is the per-axis
// standard deviation of this window.
void augment_noise(std::span<float> window, std::int64_t length, std::int64_t axes,
                   const AugmentConfig& cfg, RngStream& rng);

// One magnitude-scale draw per window.
void augment_scale(std::span<float> window, const AugmentConfig& cfg, RngStream& rng);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

SplitPlan make_logo_splits(std::vector<std::string> subject_ids, RngStream rng);

// Windows of subjects holding `role` in `fold`.
std::vector<LabeledWindow> windows_for_role(const PreparedData& data, const SplitPlan& plan,
                                            int fold, SplitPlan::Role role);

// ---------------------------------------------------------------------------
// Window cache
// ---------------------------------------------------------------------------

PreparedData prepare_windows(const std::vector<SensorInstance>& instances,
                             const WindowConfig& cfg, std::uint64_t seed);

void save_window_cache(const PreparedData& data, const std::string& path);
PreparedData load_window_cache(const std::string& path);

}  // namespace pfkd
