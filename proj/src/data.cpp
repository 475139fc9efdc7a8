#include "pfkd/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pfkd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Delimited-text helpers
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  const bool comma = line.find(',') != std::string::npos;
  std::string tok;
  auto flush = [&] {
    // trim surrounding whitespace
    std::size_t b = 0, e = tok.size();
    while (b < e && std::isspace(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(tok[e - 1]))) --e;
    out.push_back(tok.substr(b, e - b));
    tok.clear();
  };
  if (comma) {
    for (char c : line) {
      if (c == ',')
        flush();
      else
        tok.push_back(c);
    }
    flush();
  } else {
    std::istringstream is(line);
    std::string t;
    while (is >> t) out.push_back(t);
  }
  return out;
}

bool parse_double(const std::string& tok, double& value) {
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end;
}

bool parse_int(const std::string& tok, std::int64_t& value) {
  double d;
  if (!parse_double(tok, d)) return false;
  value = static_cast<std::int64_t>(d);
  return static_cast<double>(value) == d;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

std::vector<float> parse_sensor_file(const std::string& path, const ColumnMap& columns) {
  const auto lines = read_lines(path);
  std::int64_t max_col = columns.frame_col;
  for (auto c : columns.value_cols) max_col = std::max(max_col, c);

  std::vector<float> samples;
  bool saw_data = false;
  bool have_prev_frame = false;
  std::int64_t prev_frame = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (blank(lines[ln])) continue;
    const auto toks = tokenize(lines[ln]);
    double probe;
    if (!saw_data && !parse_double(toks[static_cast<std::size_t>(0)], probe)) continue;  // header
    saw_data = true;
    if (static_cast<std::int64_t>(toks.size()) <= max_col)
      throw DataError(path + ":" + std::to_string(ln + 1) + ": expected at least " +
                      std::to_string(max_col + 1) + " columns, got " +
                      std::to_string(toks.size()));
    std::int64_t frame;
    if (!parse_int(toks[static_cast<std::size_t>(columns.frame_col)], frame))
      throw DataError(path + ":" + std::to_string(ln + 1) + ": bad frame counter '" +
                      toks[static_cast<std::size_t>(columns.frame_col)] + "'");
    if (have_prev_frame && frame <= prev_frame)
      throw DataError(path + ":" + std::to_string(ln + 1) +
                      ": frame counters must be strictly increasing (" +
                      std::to_string(prev_frame) + " then " + std::to_string(frame) + ")");
    prev_frame = frame;
    have_prev_frame = true;
    for (auto c : columns.value_cols) {
      double v;
      if (!parse_double(toks[static_cast<std::size_t>(c)], v))
        throw DataError(path + ":" + std::to_string(ln + 1) + ": bad numeric field '" +
                        toks[static_cast<std::size_t>(c)] + "'");
      samples.push_back(static_cast<float>(v));
    }
  }
  if (samples.empty()) throw DataError(path + ": no data rows");
  return samples;
}

std::vector<LabelRecord> parse_label_file(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<LabelRecord> out;
  bool saw_data = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (blank(lines[ln])) continue;
    const auto toks = tokenize(lines[ln]);
    if (toks.size() != 3)
      throw DataError(path + ":" + std::to_string(ln + 1) + ": expected 3 columns, got " +
                      std::to_string(toks.size()));
    std::int64_t onset, impact;
    if (!parse_int(toks[1], onset) || !parse_int(toks[2], impact)) {
      if (!saw_data) continue;  // header
      throw DataError(path + ":" + std::to_string(ln + 1) + ": bad frame index");
    }
    saw_data = true;
    out.push_back({toks[0], onset, impact});
  }
  return out;
}

std::vector<SensorInstance> load_dataset(const std::string& data_dir, const ColumnMap& columns) {
  const fs::path root(data_dir);
  const auto manifest_path = (root / "instances.csv").string();
  const auto labels_path = (root / "labels.csv").string();

  std::unordered_map<std::string, LabelRecord> labels;
  if (fs::exists(labels_path))
    for (auto& rec : parse_label_file(labels_path)) labels[rec.instance_id] = rec;

  std::vector<SensorInstance> instances;
  const auto lines = read_lines(manifest_path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (blank(lines[ln])) continue;
    const auto toks = tokenize(lines[ln]);
    if (toks.size() != 4)
      throw DataError(manifest_path + ":" + std::to_string(ln + 1) +
                      ": expected subject_id,instance_id,kind,path");
    if (toks[2] != "adl" && toks[2] != "fall") {
      if (instances.empty() && ln == 0) continue;  // header
      throw DataError(manifest_path + ":" + std::to_string(ln + 1) + ": kind must be adl|fall");
    }
    SensorInstance inst;
    inst.subject_id = toks[0];
    inst.instance_id = toks[1];
    inst.kind = toks[2] == "fall" ? InstanceKind::fall : InstanceKind::adl;
    inst.samples = parse_sensor_file((root / toks[3]).string(), columns);
    inst.axes = static_cast<std::int64_t>(columns.value_cols.size());
    if (inst.frames() < 50)
      throw DataError(manifest_path + ":" + std::to_string(ln + 1) + ": instance " +
                      inst.instance_id + " has fewer than 50 frames");
    if (inst.kind == InstanceKind::fall) {
      auto it = labels.find(inst.instance_id);
      if (it == labels.end())
        throw DataError(manifest_path + ":" + std::to_string(ln + 1) +
                        ": missing onset/impact annotation for fall instance " + inst.instance_id);
      inst.onset_frame = it->second.onset_frame;
      inst.impact_frame = it->second.impact_frame;
      if (!(0 <= *inst.onset_frame && *inst.onset_frame < *inst.impact_frame &&
            *inst.impact_frame < inst.frames()))
        throw DataError("instance " + inst.instance_id +
                        ": annotations must satisfy 0 <= onset < impact < frames");
    }
    instances.push_back(std::move(inst));
  }
  if (instances.empty()) throw DataError(manifest_path + ": no instances");
  return instances;
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

namespace {

LabeledWindow cut_window(const SensorInstance& inst, std::int64_t start, std::int64_t length,
                         WindowLabel label) {
  LabeledWindow w;
  w.data.assign(inst.samples.begin() + start * inst.axes,
                inst.samples.begin() + (start + length) * inst.axes);
  w.label = label;
  w.instance_id = inst.instance_id;
  w.subject_id = inst.subject_id;
  w.start_frame = start;
  return w;
}

}  // namespace

std::vector<LabeledWindow> sample_adl_windows(const SensorInstance& instance,
                                              const WindowConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (instance.kind != InstanceKind::adl)
    throw DataError("sample_adl_windows: instance " + instance.instance_id + " is not ADL");
  const std::int64_t f = instance.frames();
  if (f < cfg.length)
    throw DataError("instance " + instance.instance_id + " shorter than one window");
  const std::int64_t base = f / cfg.adl_parts;
  std::vector<LabeledWindow> out;
  out.reserve(static_cast<std::size_t>(cfg.adl_parts));
  for (std::int64_t p = 0; p < cfg.adl_parts; ++p) {
    const std::int64_t part_start = p * base;
    const std::int64_t part_end = (p == cfg.adl_parts - 1) ? f : (p + 1) * base;  // remainder last
    std::int64_t start;
    if (part_end - part_start >= cfg.length) {
      start = rng.uniform_int(part_start, std::min(part_end - cfg.length, f - cfg.length));
    } else {
      // short part: anchor at the part start, clipped to the instance bounds
      start = std::min(part_start, f - cfg.length);
    }
    out.push_back(cut_window(instance, start, cfg.length, WindowLabel::adl));
  }
  return out;
}

std::vector<LabeledWindow> slide_fall_windows(const SensorInstance& instance,
                                              const WindowConfig& cfg) {
  cfg.validate();
  if (instance.kind != InstanceKind::fall || !instance.onset_frame || !instance.impact_frame)
    throw DataError("slide_fall_windows: instance " + instance.instance_id +
                    " is not an annotated fall");
  const std::int64_t onset = *instance.onset_frame, impact = *instance.impact_frame;
  if (impact < cfg.length - 1)
    throw DataError("instance " + instance.instance_id +
                    ": impact frame precedes the first full window");
  std::vector<LabeledWindow> out;
  for (std::int64_t start = 0; start + cfg.length - 1 <= impact; start += cfg.slide_step) {
    const std::int64_t last = start + cfg.length - 1;
    const std::int64_t post_onset = last < onset ? 0 : last - std::max(start, onset) + 1;
    const WindowLabel label =
        post_onset >= cfg.min_post_onset ? WindowLabel::fall : WindowLabel::adl;
    out.push_back(cut_window(instance, start, cfg.length, label));
  }
  return out;
}

std::vector<LabeledWindow> make_windows(const SensorInstance& instance, const WindowConfig& cfg,
                                        RngStream& rng) {
  return instance.kind == InstanceKind::adl ? sample_adl_windows(instance, cfg, rng)
                                            : slide_fall_windows(instance, cfg);
}

std::vector<LabeledWindow> build_train_set(const std::vector<LabeledWindow>& windows,
                                           const WindowConfig& cfg, const AugmentConfig& aug,
                                           RngStream& rng) {
  cfg.validate();
  aug.validate();
  if (windows.empty()) throw DataError("build_train_set: no training windows");
  std::int64_t fall_count = 0;
  std::vector<LabeledWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    const std::int64_t copies = w.label == WindowLabel::fall ? cfg.oversample_factor : 1;
    fall_count += w.label == WindowLabel::fall ? 1 : 0;
    for (std::int64_t c = 0; c < copies; ++c) out.push_back(w);
  }
  if (fall_count == 0)
    std::cerr << "warning: training set has no pre-impact fall windows; proceeding ADL-only\n";
  for (auto& w : out) {
    augment_noise({w.data.data(), w.data.size()}, cfg.length, cfg.axes, aug, rng);
    augment_scale({w.data.data(), w.data.size()}, aug, rng);
  }
  return out;
}

std::vector<LabeledWindow> build_test_set(const std::vector<LabeledWindow>& windows,
                                          const WindowConfig& cfg) {
  cfg.validate();
  // earliest pre-impact windows per fall instance, ordered by start frame
  std::unordered_map<std::string, std::vector<const LabeledWindow*>> fall_by_instance;
  for (const auto& w : windows)
    if (w.label == WindowLabel::fall) fall_by_instance[w.instance_id].push_back(&w);
  std::unordered_set<const LabeledWindow*> keep;
  for (auto& [id, ws] : fall_by_instance) {
    std::sort(ws.begin(), ws.end(),
              [](const LabeledWindow* a, const LabeledWindow* b) {
                return a->start_frame < b->start_frame;
              });
    for (std::size_t i = 0; i < ws.size() && i < static_cast<std::size_t>(cfg.test_pre_impact);
         ++i)
      keep.insert(ws[i]);
  }
  std::vector<LabeledWindow> out;
  for (const auto& w : windows)
    if (w.label == WindowLabel::adl || keep.count(&w)) out.push_back(w);
  return out;
}

// ---------------------------------------------------------------------------
// Augmentations
// ---------------------------------------------------------------------------

void augment_noise(std::span<float> window, std::int64_t length, std::int64_t axes,
                   const AugmentConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (static_cast<std::int64_t>(window.size()) != length * axes)
    throw DataError("augment_noise: window size mismatch");
  const double gate = sigmoid(cfg.strength);
  std::vector<double> sigma(static_cast<std::size_t>(axes));
  for (std::int64_t a = 0; a < axes; ++a) {
    double mean = 0.0;
    for (std::int64_t t = 0; t < length; ++t) mean += window[static_cast<std::size_t>(t * axes + a)];
    mean /= static_cast<double>(length);
    double var = 0.0;
    for (std::int64_t t = 0; t < length; ++t) {
      const double d = window[static_cast<std::size_t>(t * axes + a)] - mean;
      var += d * d;
    }
    sigma[static_cast<std::size_t>(a)] = std::sqrt(var / static_cast<double>(length));
  }
  for (std::int64_t t = 0; t < length; ++t)
    for (std::int64_t a = 0; a < axes; ++a) {
      const double noise =
          cfg.noise_coefficient * sigma[static_cast<std::size_t>(a)] * rng.normal() * gate;
      window[static_cast<std::size_t>(t * axes + a)] += static_cast<float>(noise);
    }
}

void augment_scale(std::span<float> window, const AugmentConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double u = rng.uniform(cfg.scale_low, cfg.scale_high);
  const double gate = sigmoid(cfg.strength);
  const double factor =
      cfg.scale_mode == AugmentConfig::ScaleMode::literal ? u * gate : 1.0 + (u - 1.0) * gate;
  for (auto& v : window) v = static_cast<float>(v * factor);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

SplitPlan make_logo_splits(std::vector<std::string> subject_ids, RngStream rng) {
  std::sort(subject_ids.begin(), subject_ids.end());
  subject_ids.erase(std::unique(subject_ids.begin(), subject_ids.end()), subject_ids.end());
  constexpr int kGroups = 5;
  if (static_cast<int>(subject_ids.size()) < kGroups)
    throw DataError("leave-one-group-out needs at least 5 subjects, got " +
                    std::to_string(subject_ids.size()));
  rng.shuffle(subject_ids);
  SplitPlan plan;
  const std::size_t n = subject_ids.size();
  const std::size_t base = n / kGroups, rem = n % kGroups;
  std::size_t cursor = 0;
  for (int g = 0; g < kGroups; ++g) {
    const std::size_t sz = base + (static_cast<std::size_t>(g) < rem ? 1 : 0);
    plan.groups.emplace_back(subject_ids.begin() + static_cast<std::ptrdiff_t>(cursor),
                             subject_ids.begin() + static_cast<std::ptrdiff_t>(cursor + sz));
    cursor += sz;
  }
  // fixed rotation: test g, teacher g+1/g+2, student g+3/g+4
  for (int f = 0; f < kGroups; ++f)
    plan.folds.push_back({f,
                          {(f + 1) % kGroups, (f + 2) % kGroups},
                          {(f + 3) % kGroups, (f + 4) % kGroups}});
  return plan;
}

std::vector<std::string> SplitPlan::subjects_for(int fold, Role role) const {
  const auto& fr = folds.at(static_cast<std::size_t>(fold));
  std::vector<std::string> out;
  auto append = [&](int g) {
    const auto& grp = groups.at(static_cast<std::size_t>(g));
    out.insert(out.end(), grp.begin(), grp.end());
  };
  switch (role) {
    case Role::test:
      append(fr.test);
      break;
    case Role::teacher_train:
      append(fr.teacher[0]);
      append(fr.teacher[1]);
      break;
    case Role::student_train:
      append(fr.student[0]);
      append(fr.student[1]);
      break;
  }
  return out;
}

std::vector<LabeledWindow> windows_for_role(const PreparedData& data, const SplitPlan& plan,
                                            int fold, SplitPlan::Role role) {
  const auto subjects = plan.subjects_for(fold, role);
  const std::unordered_set<std::string> members(subjects.begin(), subjects.end());
  std::vector<LabeledWindow> out;
  for (const auto& w : data.windows)
    if (members.count(w.subject_id)) out.push_back(w);
  return out;
}

// ---------------------------------------------------------------------------
// Prepared windows and the binary cache
// ---------------------------------------------------------------------------

const InstanceMeta& PreparedData::meta(const std::string& instance_id) const {
  for (const auto& m : instances)
    if (m.instance_id == instance_id) return m;
  throw DataError("unknown instance id " + instance_id);
}

PreparedData prepare_windows(const std::vector<SensorInstance>& instances,
                             const WindowConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  PreparedData data;
  data.window_len = cfg.length;
  data.axes = cfg.axes;
  for (const auto& inst : instances) {
    InstanceMeta meta;
    meta.instance_id = inst.instance_id;
    meta.subject_id = inst.subject_id;
    meta.kind = inst.kind;
    meta.frames = inst.frames();
    meta.onset_frame = inst.onset_frame.value_or(-1);
    meta.impact_frame = inst.impact_frame.value_or(-1);
    data.instances.push_back(std::move(meta));
    RngStream rng(seed, "adl_windows/" + inst.instance_id);
    auto ws = make_windows(inst, cfg, rng);
    data.windows.insert(data.windows.end(), std::make_move_iterator(ws.begin()),
                        std::make_move_iterator(ws.end()));
  }
  return data;
}

namespace {

constexpr char kCacheMagic[4] = {'P', 'F', 'K', 'W'};

struct CrcWriter {
  std::ofstream out;
  uLong crc = crc32(0L, Z_NULL, 0);

  explicit CrcWriter(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw DataError(path + ": cannot open for writing");
  }
  void raw(const void* p, std::size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void bytes(const void* p, std::size_t n) {
    raw(p, n);
    crc = crc32(crc, static_cast<const Bytef*>(p), static_cast<uInt>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct CrcReader {
  std::ifstream in;
  std::string path;
  uLong crc = crc32(0L, Z_NULL, 0);

  explicit CrcReader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw DataError(p + ": cannot open");
  }
  void raw(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw DataError(path + ": truncated file");
  }
  void bytes(void* p, std::size_t n) {
    raw(p, n);
    crc = crc32(crc, static_cast<const Bytef*>(p), static_cast<uInt>(n));
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const auto n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

}  // namespace

void save_window_cache(const PreparedData& data, const std::string& path) {
  CrcWriter w(path);
  w.raw(kCacheMagic, 4);
  w.u32(1);  // version
  w.i64(data.window_len);
  w.i64(data.axes);
  w.u32(static_cast<std::uint32_t>(data.instances.size()));
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < data.instances.size(); ++i) {
    const auto& m = data.instances[i];
    index.emplace(m.instance_id, static_cast<std::uint32_t>(i));
    w.str(m.instance_id);
    w.str(m.subject_id);
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.i64(m.frames);
    w.i64(m.onset_frame);
    w.i64(m.impact_frame);
  }
  w.u64(data.windows.size());
  for (const auto& win : data.windows) {
    w.u32(index.at(win.instance_id));
    w.i64(win.start_frame);
    w.u8(static_cast<std::uint8_t>(win.label));
    for (float v : win.data) w.f32(v);
  }
  // trailing digest covers everything after the magic and is not part of
  // the checksummed payload itself
  const auto digest = static_cast<std::uint32_t>(w.crc);
  const std::uint8_t b[4] = {static_cast<std::uint8_t>(digest),
                             static_cast<std::uint8_t>(digest >> 8),
                             static_cast<std::uint8_t>(digest >> 16),
                             static_cast<std::uint8_t>(digest >> 24)};
  w.raw(b, 4);
  if (!w.out) throw DataError(path + ": write failed");
}

PreparedData load_window_cache(const std::string& path) {
  CrcReader r(path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kCacheMagic, 4) != 0) throw DataError(path + ": not a window cache");
  if (r.u32() != 1) throw DataError(path + ": unsupported cache version");
  PreparedData data;
  data.window_len = r.i64();
  data.axes = r.i64();
  const auto n_inst = r.u32();
  for (std::uint32_t i = 0; i < n_inst; ++i) {
    InstanceMeta m;
    m.instance_id = r.str();
    m.subject_id = r.str();
    m.kind = static_cast<InstanceKind>(r.u8());
    m.frames = r.i64();
    m.onset_frame = r.i64();
    m.impact_frame = r.i64();
    data.instances.push_back(std::move(m));
  }
  const auto n_win = r.u64();
  const std::size_t wsz = static_cast<std::size_t>(data.window_len * data.axes);
  data.windows.reserve(n_win);
  for (std::uint64_t i = 0; i < n_win; ++i) {
    LabeledWindow win;
    const auto idx = r.u32();
    if (idx >= data.instances.size()) throw DataError(path + ": bad instance index");
    win.instance_id = data.instances[idx].instance_id;
    win.subject_id = data.instances[idx].subject_id;
    win.start_frame = r.i64();
    win.label = static_cast<WindowLabel>(r.u8());
    win.data.resize(wsz);
    for (auto& v : win.data) v = r.f32();
    data.windows.push_back(std::move(win));
  }
  const auto expected = static_cast<std::uint32_t>(r.crc);
  std::uint8_t b[4];
  r.raw(b, 4);
  const std::uint32_t stored = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
  if (stored != expected) throw DataError(path + ": checksum mismatch");
  return data;
}

}  // namespace pfkd
