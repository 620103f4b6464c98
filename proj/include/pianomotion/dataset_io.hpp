#pragma once

// On-disk dataset layout: clip annotation JSON, manifests with per-video
// split assignment, and per-subject statistics.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pianomotion/error.hpp"
#include "pianomotion/hand_model.hpp"
#include "pianomotion/motion.hpp"

namespace pianomotion::dataset {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct ClipAnnotation {
  std::string clip_id;
  std::string video_id;
  std::string subject;
  ShapeVector rho = ShapeVector::Zero();
  TwoHandTrack track;

  double fps() const noexcept { return track.fps(); }
  double seconds() const noexcept { return static_cast<double>(track.size()) / track.fps(); }
  bool operator==(const ClipAnnotation& o) const {
    return clip_id == o.clip_id && video_id == o.video_id && subject == o.subject && rho == o.rho && track == o.track;
  }
};

inline std::string make_clip_id(const std::string& video_id, long start_second) {
  return video_id + "_" + std::to_string(start_second);
}

struct LoadOptions {
  // Expected clip length; the frame count must equal round(seconds * fps).
  std::optional<double> clip_seconds = 30.0;
  // Raw tracks may omit the id fields.
  bool require_ids = true;
};

// ---------------------------------------------------------------------------
// JSON <-> annotation

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(Errc::SchemaViolation, where + ": missing field \"" + key + "\"");
  return j[key];
}

inline double number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) fail(Errc::SchemaViolation, where + ": expected a number");
  return j.get<double>();
}

inline std::optional<HandFrame> parse_hand(const nlohmann::json& j, bool axis_angle, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  const auto& theta = field(j, "theta", where);
  const auto& trans = field(j, "trans", where);
  if (!theta.is_array() || theta.size() != kNumJoints)
    fail(Errc::SchemaViolation, where + ": theta must have " + std::to_string(kNumJoints) + " rows");
  if (!trans.is_array() || trans.size() != 3) fail(Errc::SchemaViolation, where + ": trans must have 3 values");
  HandFrame f;
  for (int r = 0; r < kNumJoints; ++r) {
    const auto& row = theta[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 3)
      fail(Errc::SchemaViolation, where + ": theta row " + std::to_string(r) + " must have 3 values");
    Eigen::Vector3d v;
    for (int c = 0; c < 3; ++c) v(c) = number(row[static_cast<std::size_t>(c)], where);
    f.theta.row(r) = (axis_angle ? hand::axis_angle_to_euler(v) : v).transpose();
  }
  for (int c = 0; c < 3; ++c) f.trans(c) = number(trans[static_cast<std::size_t>(c)], where);
  return f;
}

inline ojson hand_json(const std::optional<HandFrame>& f) {
  if (!f) return nullptr;
  ojson theta = ojson::array();
  for (int r = 0; r < kNumJoints; ++r) theta.push_back({f->theta(r, 0), f->theta(r, 1), f->theta(r, 2)});
  ojson out;
  out["theta"] = std::move(theta);
  out["trans"] = {f->trans.x(), f->trans.y(), f->trans.z()};
  return out;
}

inline std::string string_field(const nlohmann::json& j, const char* key, bool required, const std::string& where) {
  if (!j.contains(key)) {
    if (required) fail(Errc::SchemaViolation, where + ": missing field \"" + key + "\"");
    return {};
  }
  const auto& v = j[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail(Errc::SchemaViolation, where + ": field \"" + key + "\" must be a string");
}

}  // namespace detail

inline ClipAnnotation clip_from_json(const nlohmann::json& j, const LoadOptions& opts = {},
                                     const std::string& where = "clip") {
  if (!j.is_object()) fail(Errc::SchemaViolation, where + ": expected a JSON object");
  ClipAnnotation clip;
  clip.clip_id = detail::string_field(j, "clip_id", opts.require_ids, where);
  clip.video_id = detail::string_field(j, "video_id", opts.require_ids, where);
  clip.subject = detail::string_field(j, "subject", opts.require_ids, where);
  const double fps = detail::number(detail::field(j, "fps", where), where);
  if (!(fps > 0.0)) fail(Errc::SchemaViolation, where + ": fps must be positive");
  if (j.contains("rho")) {
    const auto& rho = j["rho"];
    if (!rho.is_array() || rho.size() != kShapeDim)
      fail(Errc::SchemaViolation, where + ": rho must have " + std::to_string(kShapeDim) + " values");
    for (int i = 0; i < kShapeDim; ++i) clip.rho(i) = detail::number(rho[static_cast<std::size_t>(i)], where);
  } else if (opts.require_ids) {
    fail(Errc::SchemaViolation, where + ": missing field \"rho\"");
  }
  bool axis_angle = false;
  if (j.contains("rotation")) {
    const auto rot = detail::string_field(j, "rotation", true, where);
    if (rot == "axis_angle") axis_angle = true;
    else if (rot != "euler") fail(Errc::SchemaViolation, where + ": rotation must be \"euler\" or \"axis_angle\"");
  }
  const auto& frames = detail::field(j, "frames", where);
  if (!frames.is_array()) fail(Errc::SchemaViolation, where + ": frames must be an array");
  clip.track.left.fps = clip.track.right.fps = fps;
  clip.track.left.frames.reserve(frames.size());
  clip.track.right.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string fw = where + ": frame " + std::to_string(i);
    const auto& fr = frames[i];
    clip.track.left.frames.push_back(detail::parse_hand(detail::field(fr, "left", fw), axis_angle, fw + " left"));
    clip.track.right.frames.push_back(detail::parse_hand(detail::field(fr, "right", fw), axis_angle, fw + " right"));
  }
  if (opts.clip_seconds) {
    const auto expected = static_cast<std::size_t>(std::llround(*opts.clip_seconds * fps));
    if (frames.size() != expected)
      fail(Errc::BadFrameCount, where + ": expected " + std::to_string(expected) + " frames, found " +
                                    std::to_string(frames.size()));
  }
  return clip;
}

/// Normative key order; theta always written as Euler radians.
inline ojson to_json(const ClipAnnotation& clip) {
  ojson j;
  j["clip_id"] = clip.clip_id;
  j["video_id"] = clip.video_id;
  j["subject"] = clip.subject;
  j["fps"] = clip.fps();
  j["rho"] = std::vector<double>(clip.rho.data(), clip.rho.data() + kShapeDim);
  ojson frames = ojson::array();
  for (std::size_t i = 0; i < clip.track.size(); ++i) {
    ojson f;
    f["left"] = detail::hand_json(clip.track.left.frames[i]);
    f["right"] = detail::hand_json(clip.track.right.frames[i]);
    frames.push_back(std::move(f));
  }
  j["frames"] = std::move(frames);
  return j;
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaViolation, path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::Io, "short write to " + path.string());
}

inline ClipAnnotation load_clip(const fs::path& path, const LoadOptions& opts = {}) {
  return clip_from_json(read_json_file(path), opts, path.string());
}

inline void save_clip(const ClipAnnotation& clip, const fs::path& path) {
  write_text_file(path, to_json(clip).dump() + "\n");
}

// ---------------------------------------------------------------------------
// Manifest and splits

enum class Split { Train, Val, Test };

constexpr std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  fail(Errc::SchemaViolation, "unknown split \"" + s + "\"");
}

/// Video-level split policy: listed videos go to their split, all others to
/// the default.
struct SplitSpec {
  std::map<std::string, Split> video_split;
  Split default_split = Split::Train;

  Split split_of(const std::string& video) const {
    auto it = video_split.find(video);
    return it == video_split.end() ? default_split : it->second;
  }

  /// {"train": [video ids], "val": [...], "test": [...], "default": "train"}
  static SplitSpec from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(Errc::SchemaViolation, "split policy must be a JSON object");
    SplitSpec policy;
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
      const std::string key(to_string(s));
      if (!j.contains(key)) continue;
      if (!j[key].is_array()) fail(Errc::SchemaViolation, "split policy: \"" + key + "\" must be an array");
      for (const auto& v : j[key]) {
        if (!v.is_string()) fail(Errc::SchemaViolation, "split policy: video ids must be strings");
        const auto video = v.get<std::string>();
        auto [it, inserted] = policy.video_split.emplace(video, s);
        if (!inserted && it->second != s)
          fail(Errc::ConflictingSplit, "video " + video + " is assigned to both " + std::string(to_string(it->second)) +
                                           " and " + key);
      }
    }
    if (j.contains("default")) {
      if (!j["default"].is_string()) fail(Errc::SchemaViolation, "split policy: default must be a string");
      policy.default_split = split_from_string(j["default"].get<std::string>());
    }
    return policy;
  }
};

struct ManifestClip {
  std::string clip_id;
  std::string video_id;
  std::string subject;
  fs::path path;
  double seconds = 0.0;
  std::size_t annotated_frames = 0;  // frames with at least one visible hand
  Split split = Split::Train;
};

struct Manifest {
  std::vector<ManifestClip> clips;  // sorted by clip id

  std::vector<std::string> clip_ids(Split s) const {
    std::vector<std::string> ids;
    for (const auto& c : clips)
      if (c.split == s) ids.push_back(c.clip_id);
    return ids;
  }

  /// subject -> video -> clip indices
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> hierarchy() const {
    std::map<std::string, std::map<std::string, std::vector<std::size_t>>> h;
    for (std::size_t i = 0; i < clips.size(); ++i) h[clips[i].subject][clips[i].video_id].push_back(i);
    return h;
  }

  ojson to_json() const {
    ojson j;
    for (Split s : {Split::Train, Split::Val, Split::Test}) j[std::string(to_string(s))] = clip_ids(s);
    return j;
  }
};

namespace detail {
inline std::size_t annotated_frames(const TwoHandTrack& t) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) n += t.left.visible(i) || t.right.visible(i);
  return n;
}
}  // namespace detail

/// Scans `root` recursively for clip files (JSON objects with a "clip_id"
/// key; other JSON files are ignored) in sorted path order.
inline Manifest build_manifest(const fs::path& root, const SplitSpec& policy, const LoadOptions& opts = {}) {
  if (!fs::is_directory(root)) fail(Errc::Io, root.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  Manifest m;
  std::set<std::string> seen;
  for (const auto& path : files) {
    const auto j = read_json_file(path);
    if (!j.is_object() || !j.contains("clip_id")) continue;
    const ClipAnnotation clip = clip_from_json(j, opts, path.string());
    if (!seen.insert(clip.clip_id).second) fail(Errc::SchemaViolation, "duplicate clip id " + clip.clip_id);
    m.clips.push_back({clip.clip_id, clip.video_id, clip.subject, path, clip.seconds(),
                       detail::annotated_frames(clip.track), policy.split_of(clip.video_id)});
  }
  if (m.clips.empty()) fail(Errc::EmptyDataset, "no clip files under " + root.string());
  std::sort(m.clips.begin(), m.clips.end(),
            [](const ManifestClip& a, const ManifestClip& b) { return a.clip_id < b.clip_id; });
  return m;
}

// ---------------------------------------------------------------------------
// Subject statistics

struct SubjectRow {
  std::string subject;
  std::size_t videos = 0;
  std::size_t clips = 0;
  double seconds = 0.0;
  std::size_t frames = 0;
};

struct SubjectStats {
  std::vector<SubjectRow> subjects;  // sorted by subject
  SubjectRow total{"total"};

  ojson to_json() const {
    auto row = [](const SubjectRow& r) {
      return ojson{{"subject", r.subject}, {"videos", r.videos}, {"clips", r.clips}, {"seconds", r.seconds},
                   {"frames", r.frames}};
    };
    ojson j;
    j["subjects"] = ojson::array();
    for (const auto& r : subjects) j["subjects"].push_back(row(r));
    j["total"] = row(total);
    j["total"].erase("subject");
    j["total"]["hours"] = total.seconds / 3600.0;
    return j;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "subject,videos,clips,seconds,frames\n";
    for (const auto& r : subjects)
      out << r.subject << ',' << r.videos << ',' << r.clips << ',' << r.seconds << ',' << r.frames << '\n';
    out << "total," << total.videos << ',' << total.clips << ',' << total.seconds << ',' << total.frames << '\n';
    return out.str();
  }
};

inline SubjectStats subject_stats(const Manifest& m) {
  require(!m.clips.empty(), Errc::EmptyDataset, "manifest has no clips");
  SubjectStats s;
  for (const auto& [subject, videos] : m.hierarchy()) {
    SubjectRow row{subject};
    row.videos = videos.size();
    for (const auto& [video, idx] : videos) {
      row.clips += idx.size();
      for (std::size_t i : idx) {
        row.seconds += m.clips[i].seconds;
        row.frames += m.clips[i].annotated_frames;
      }
    }
    s.subjects.push_back(row);
  }
  for (const auto& r : s.subjects) {
    s.total.videos += r.videos;
    s.total.clips += r.clips;
    s.total.seconds += r.seconds;
    s.total.frames += r.frames;
  }
  return s;
}

}  // namespace pianomotion::dataset
