#pragma once

// Cleaning of raw per-frame hand annotations: outlier detection, gap
// classification and filling, smoothing, frame-rate normalisation and clip
// segmentation. Stages run in that order; see clean_track().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pianomotion/error.hpp"
#include "pianomotion/motion.hpp"

namespace pianomotion::pipeline {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Hampel filter

struct HampelOptions {
  int window = 20;      // samples spanned around the centre; half-width window / 2
  double nsigma = 3.0;
  double mad_scale = 1.4826;
  double mad_floor = 1e-9;
};

namespace detail {

inline double median_inplace(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Flags samples deviating from the local median by more than nsigma scaled
/// MADs. NaN samples are treated as absent: never flagged, never counted.
inline std::vector<bool> hampel_filter(std::span<const double> series, const HampelOptions& opts = {}) {
  require(opts.window >= 3, Errc::BadWindow, "Hampel window must be at least 3");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t half = opts.window / 2;
  std::vector<bool> mask(series.size(), false);
  std::vector<double> win, dev;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double x = series[static_cast<std::size_t>(i)];
    if (std::isnan(x)) continue;
    win.clear();
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, i - half); k <= std::min(n - 1, i + half); ++k) {
      const double v = series[static_cast<std::size_t>(k)];
      if (!std::isnan(v)) win.push_back(v);
    }
    const double med = detail::median_inplace(win);
    dev.clear();
    for (double v : win) dev.push_back(std::abs(v - med));
    const double mad = std::max(detail::median_inplace(dev), opts.mad_floor);
    mask[static_cast<std::size_t>(i)] = std::abs(x - med) > opts.nsigma * opts.mad_scale * mad;
  }
  return mask;
}

inline std::vector<double> channel_series(const HandTrack& track, int channel) {
  std::vector<double> s(track.size(), kMissing);
  for (std::size_t i = 0; i < track.size(); ++i)
    if (track.frames[i]) s[i] = track.frames[i]->channel(channel);
  return s;
}

struct OutlierRule {
  // A frame is an outlier when any translation channel is flagged, or when
  // more than this fraction of the angle channels are.
  double angle_fraction = 0.25;
};

/// Runs the Hampel filter on all 51 channels and aggregates to a per-frame mask.
inline std::vector<bool> frame_outliers(const HandTrack& track, const HampelOptions& opts = {},
                                        const OutlierRule& rule = {}) {
  std::vector<int> angle_flags(track.size(), 0);
  std::vector<bool> out(track.size(), false);
  for (int c = 0; c < kFrameChannels; ++c) {
    const auto series = channel_series(track, c);
    const auto mask = hampel_filter(series, opts);
    for (std::size_t i = 0; i < track.size(); ++i) {
      if (!mask[i]) continue;
      if (c >= kAngleChannels) out[i] = true;
      else ++angle_flags[i];
    }
  }
  for (std::size_t i = 0; i < track.size(); ++i)
    if (angle_flags[i] > rule.angle_fraction * kAngleChannels) out[i] = true;
  return out;
}

// ---------------------------------------------------------------------------
// Gap classification and filling

enum class GapKind { Fill, Invisible };

constexpr std::string_view to_string(GapKind k) noexcept { return k == GapKind::Fill ? "fill" : "invisible"; }

struct GapLabel {
  std::size_t start = 0;
  std::size_t length = 0;
  GapKind kind = GapKind::Invisible;
  bool operator==(const GapLabel&) const = default;
};

struct GapOptions {
  std::size_t max_fill = 30;         // interior gaps shorter than this are interpolated
  std::size_t min_visible_run = 15;  // shorter visible runs are discarded
};

struct FilledTrack {
  HandTrack track;
  std::vector<GapLabel> gaps;  // ordered by start frame
};

namespace detail {

template <typename Pred>
std::vector<std::pair<std::size_t, std::size_t>> runs(std::size_t n, Pred pred) {
  std::vector<std::pair<std::size_t, std::size_t>> out;  // (start, length)
  for (std::size_t i = 0; i < n;) {
    if (!pred(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && pred(j)) ++j;
    out.emplace_back(i, j - i);
    i = j;
  }
  return out;
}

inline HandFrame lerp(const HandFrame& a, const HandFrame& b, double w) {
  HandFrame f;
  f.theta = a.theta + w * (b.theta - a.theta);
  f.trans = a.trans + w * (b.trans - a.trans);
  return f;
}

}  // namespace detail

/// Marks outliers and undetected frames missing, interpolates short interior
/// gaps, and drops the rest along with visible runs that are too short.
inline FilledTrack classify_and_fill(const HandTrack& raw, const std::vector<bool>& outliers,
                                     const GapOptions& opts = {}) {
  require(outliers.size() == raw.size(), Errc::LengthMismatch, "outlier mask length differs from track length");
  const std::size_t n = raw.size();
  FilledTrack out{raw, {}};
  auto& frames = out.track.frames;
  for (std::size_t i = 0; i < n; ++i)
    if (outliers[i]) frames[i].reset();

  std::vector<bool> filled(n, false);
  for (auto [start, len] : detail::runs(n, [&](std::size_t i) { return !frames[i].has_value(); })) {
    const bool interior = start > 0 && start + len < n;
    if (!interior || len >= opts.max_fill) continue;
    const HandFrame a = *frames[start - 1];
    const HandFrame b = *frames[start + len];
    for (std::size_t k = 0; k < len; ++k) {
      frames[start + k] = detail::lerp(a, b, static_cast<double>(k + 1) / static_cast<double>(len + 1));
      filled[start + k] = true;
    }
  }
  for (auto [start, len] : detail::runs(n, [&](std::size_t i) { return frames[i].has_value(); }))
    if (len < opts.min_visible_run)
      for (std::size_t k = start; k < start + len; ++k) frames[k].reset();

  for (auto [start, len] : detail::runs(n, [&](std::size_t i) { return !frames[i].has_value(); }))
    out.gaps.push_back({start, len, GapKind::Invisible});
  for (auto [start, len] : detail::runs(n, [&](std::size_t i) { return filled[i] && frames[i].has_value(); }))
    out.gaps.push_back({start, len, GapKind::Fill});
  std::sort(out.gaps.begin(), out.gaps.end(), [](const GapLabel& a, const GapLabel& b) { return a.start < b.start; });
  return out;
}

// ---------------------------------------------------------------------------
// Savitzky-Golay smoothing

/// Least-squares weights that evaluate the degree-`order` polynomial fitted
/// to samples at positions 0..window-1 at position `eval_at`.
inline Eigen::VectorXd savgol_weights(int window, int order, double eval_at) {
  require(order >= 0 && window > order, Errc::BadWindow, "Savitzky-Golay window must exceed the order");
  const double centre = 0.5 * (window - 1);
  Eigen::MatrixXd vander(window, order + 1);
  for (int k = 0; k < window; ++k) {
    double p = 1.0;
    for (int d = 0; d <= order; ++d, p *= (k - centre)) vander(k, d) = p;
  }
  Eigen::VectorXd basis(order + 1);
  double p = 1.0;
  for (int d = 0; d <= order; ++d, p *= (eval_at - centre)) basis(d) = p;
  const Eigen::MatrixXd normal = vander.transpose() * vander;
  return vander * normal.ldlt().solve(basis);
}

/// Symmetric smoothing kernel: weights of the centred fit.
inline Eigen::VectorXd savgol_kernel(int window = 11, int order = 3) {
  require(window % 2 == 1, Errc::BadWindow, "Savitzky-Golay window must be odd");
  return savgol_weights(window, order, 0.5 * (window - 1));
}

/// Smooths each run of finite samples independently. Within `window / 2` of a
/// run boundary the fit over the first/last full window is evaluated instead
/// of the centred one, so polynomials up to `order` are reproduced exactly
/// everywhere. Runs shorter than the window are returned unchanged.
inline std::vector<double> savgol_smooth(std::span<const double> series, int order = 3, int window = 11) {
  require(window % 2 == 1 && window > order && order >= 0, Errc::BadWindow,
          "Savitzky-Golay window must be odd and exceed the order");
  std::vector<double> out(series.begin(), series.end());
  const int half = window / 2;
  const Eigen::VectorXd centre = savgol_kernel(window, order);
  std::vector<Eigen::VectorXd> edge(static_cast<std::size_t>(half));
  for (int p = 0; p < half; ++p) edge[static_cast<std::size_t>(p)] = savgol_weights(window, order, p);

  const auto spans = detail::runs(series.size(), [&](std::size_t i) { return std::isfinite(series[i]); });
  for (auto [start, len] : spans) {
    if (len < static_cast<std::size_t>(window)) continue;
    auto at = [&](std::size_t k) { return series[start + k]; };
    for (std::size_t i = 0; i < len; ++i) {
      double acc = 0.0;
      if (i < static_cast<std::size_t>(half)) {
        const auto& w = edge[i];
        for (int k = 0; k < window; ++k) acc += w(k) * at(static_cast<std::size_t>(k));
      } else if (i + static_cast<std::size_t>(half) >= len) {
        // Mirror of the leading-edge weights onto the last window.
        const auto& w = edge[len - 1 - i];
        for (int k = 0; k < window; ++k) acc += w(k) * at(len - 1 - static_cast<std::size_t>(k));
      } else {
        for (int k = 0; k < window; ++k) acc += centre(k) * at(i - static_cast<std::size_t>(half) + static_cast<std::size_t>(k));
      }
      out[start + i] = acc;
    }
  }
  return out;
}

inline HandTrack savgol_smooth(const HandTrack& track, int order = 3, int window = 11) {
  HandTrack out = track;
  for (int c = 0; c < kFrameChannels; ++c) {
    const auto smoothed = savgol_smooth(channel_series(track, c), order, window);
    for (std::size_t i = 0; i < track.size(); ++i)
      if (out.frames[i]) out.frames[i]->channel(c) = smoothed[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame-rate normalisation

/// Linear resampling onto target_fps. Output frame k sits at k / target_fps
/// seconds; the last one is the latest such time within the source duration.
/// A frame is visible only if its bracketing source frames both are.
inline HandTrack resample_fps(const HandTrack& track, double target_fps = 30.0) {
  require(track.fps > 0.0 && target_fps > 0.0, Errc::InvalidArgument, "frame rates must be positive");
  HandTrack out;
  out.fps = target_fps;
  if (track.size() == 0) return out;
  constexpr double kSnap = 1e-9;  // source positions this close to an integer hit that frame exactly
  const double ratio = track.fps / target_fps;
  const double last = static_cast<double>(track.size() - 1);
  const auto count = static_cast<std::size_t>(std::floor(last / ratio + kSnap)) + 1;
  out.frames.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double s = static_cast<double>(k) * ratio;
    const double nearest = std::round(s);
    if (std::abs(s - nearest) <= kSnap * std::max(1.0, s)) {
      out.frames[k] = track.frames[static_cast<std::size_t>(nearest)];
      continue;
    }
    const auto i = static_cast<std::size_t>(std::floor(s));
    const auto& a = track.frames[i];
    const auto& b = track.frames[std::min(i + 1, track.size() - 1)];
    if (a && b) out.frames[k] = detail::lerp(*a, *b, s - static_cast<double>(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full cleaning chain

struct CleanOptions {
  HampelOptions hampel;
  OutlierRule outlier_rule;
  GapOptions gaps;
  int savgol_order = 3;
  int savgol_window = 11;
  double target_fps = 30.0;
};

struct CleanResult {
  TwoHandTrack track;
  // Gap labels are in source-frame indices (before resampling).
  std::vector<GapLabel> left_gaps;
  std::vector<GapLabel> right_gaps;
};

inline HandTrack clean_hand(const HandTrack& raw, const CleanOptions& opts, std::vector<GapLabel>& gaps) {
  const auto outliers = frame_outliers(raw, opts.hampel, opts.outlier_rule);
  FilledTrack filled = classify_and_fill(raw, outliers, opts.gaps);
  gaps = std::move(filled.gaps);
  const HandTrack smoothed = savgol_smooth(filled.track, opts.savgol_order, opts.savgol_window);
  return resample_fps(smoothed, opts.target_fps);
}

inline CleanResult clean_track(const TwoHandTrack& raw, const CleanOptions& opts = {}) {
  raw.validate();
  CleanResult r;
  r.track.left = clean_hand(raw.left, opts, r.left_gaps);
  r.track.right = clean_hand(raw.right, opts, r.right_gaps);
  return r;
}

inline nlohmann::ordered_json gaps_to_json(const CleanResult& r) {
  auto list = [](const std::vector<GapLabel>& gaps) {
    auto a = nlohmann::ordered_json::array();
    for (const auto& g : gaps) a.push_back({{"start", g.start}, {"length", g.length}, {"kind", to_string(g.kind)}});
    return a;
  };
  return {{"left", list(r.left_gaps)}, {"right", list(r.right_gaps)}};
}

// ---------------------------------------------------------------------------
// Clip segmentation

struct SegmentOptions {
  double clip_seconds = 30.0;
  double stride_seconds = 24.0;
  double min_visibility = 0.80;
};

struct ClipWindow {
  std::size_t start_frame = 0;
  std::size_t frame_count = 0;
  double offset_seconds = 0.0;
  double visibility = 0.0;  // mean over both hands
  bool operator==(const ClipWindow&) const = default;
};

/// Fixed-stride windows that fit entirely inside the track; windows whose
/// two-hand visibility falls below min_visibility are dropped.
inline std::vector<ClipWindow> segment_clips(const TwoHandTrack& track, const SegmentOptions& opts = {}) {
  track.validate();
  require(opts.clip_seconds > 0.0 && opts.stride_seconds > 0.0 && opts.stride_seconds <= opts.clip_seconds,
          Errc::InvalidArgument, "need 0 < stride <= clip length");
  const double fps = track.fps();
  const auto clip = static_cast<std::size_t>(std::llround(opts.clip_seconds * fps));
  const auto stride = static_cast<std::size_t>(std::llround(opts.stride_seconds * fps));
  require(clip > 0 && stride > 0, Errc::InvalidArgument, "clip shorter than one frame");
  const std::size_t n = track.size();

  std::vector<std::size_t> visible_prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    visible_prefix[i + 1] = visible_prefix[i] + track.left.visible(i) + track.right.visible(i);

  std::vector<ClipWindow> out;
  for (std::size_t start = 0; start + clip <= n; start += stride) {
    const std::size_t visible = visible_prefix[start + clip] - visible_prefix[start];
    const double vis = static_cast<double>(visible) / static_cast<double>(2 * clip);
    if (vis + 1e-12 < opts.min_visibility) continue;
    out.push_back({start, clip, static_cast<double>(start) / fps, vis});
  }
  return out;
}

inline TwoHandTrack extract_clip(const TwoHandTrack& track, const ClipWindow& w) {
  require(w.start_frame + w.frame_count <= track.size(), Errc::InvalidArgument, "window exceeds track");
  TwoHandTrack out;
  out.left.fps = track.left.fps;
  out.right.fps = track.right.fps;
  const auto b = static_cast<std::ptrdiff_t>(w.start_frame);
  const auto e = static_cast<std::ptrdiff_t>(w.start_frame + w.frame_count);
  out.left.frames.assign(track.left.frames.begin() + b, track.left.frames.begin() + e);
  out.right.frames.assign(track.right.frames.begin() + b, track.right.frames.begin() + e);
  return out;
}

}  // namespace pianomotion::pipeline
