#pragma once

// Benchmark evaluation over paired prediction / ground-truth clip sets.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pianomotion/dataset_io.hpp"
#include "pianomotion/embedder.hpp"
#include "pianomotion/error.hpp"
#include "pianomotion/hand_model.hpp"
#include "pianomotion/metrics.hpp"
#include "pianomotion/motion_pipeline.hpp"

namespace pianomotion::eval {

using ojson = nlohmann::ordered_json;

inline const std::vector<std::string>& all_metrics() {
  static const std::vector<std::string> names{"fid", "fgd", "wgd", "pd", "smooth"};
  return names;
}

struct EvalConfig {
  std::set<std::string> metrics{all_metrics().begin(), all_metrics().end()};
  int gmm_components = 8;
  int latent_dim = stats::kDefaultLatentDim;
  std::uint64_t seed = 42;
  double fps = 30.0;
  // Sequence windows for FID / FGD, in frames at `fps`.
  int window_frames = 240;
  int window_stride = 30;
  double regularization = stats::kDefaultRegularization;
  std::optional<stats::Embedder> embedder;  // fitted on ground truth when absent
  hand::HandTemplate hand_template = hand::HandTemplate::neutral();

  bool wants(const std::string& m) const { return metrics.count(m) != 0; }

  void validate() const {
    for (const auto& m : metrics)
      require(std::find(all_metrics().begin(), all_metrics().end(), m) != all_metrics().end(), Errc::InvalidArgument,
              "unknown metric \"" + m + "\"");
    require(gmm_components >= 1, Errc::InvalidArgument, "gmm components must be at least 1");
    require(latent_dim >= 1, Errc::InvalidArgument, "latent dim must be at least 1");
    require(fps > 0.0, Errc::InvalidArgument, "fps must be positive");
    require(window_frames >= 1 && window_stride >= 1, Errc::InvalidArgument, "window and stride must be positive");
    require(regularization >= 0.0, Errc::InvalidArgument, "regularization must be non-negative");
  }
};

struct ClipPair {
  std::string clip_id;
  TwoHandTrack pred;
  TwoHandTrack gt;
};

struct HandScores {
  std::optional<double> fgd, wgd, pd, smoothness;
};

struct MetricReport {
  std::optional<double> fid;
  HandScores left, right;
  std::size_t clip_count = 0;
  std::size_t fgd_windows = 0;
  std::size_t fid_windows = 0;

  ojson to_json(const EvalConfig& cfg) const {
    auto num = [](const std::optional<double>& v) -> ojson {
      if (!v) return nullptr;
      return *v + 0.0;  // no negative zero in reports
    };
    auto hand = [&](const HandScores& h) {
      ojson j;
      j["fgd"] = num(h.fgd);
      j["wgd"] = num(h.wgd);
      j["pd"] = num(h.pd);
      j["smoothness"] = num(h.smoothness);
      return j;
    };
    ojson j;
    j["fid"] = num(fid);
    j["left"] = hand(left);
    j["right"] = hand(right);
    ojson meta;
    std::vector<std::string> ms;
    for (const auto& m : all_metrics())
      if (cfg.wants(m)) ms.push_back(m);
    meta["metrics"] = ms;
    meta["seed"] = cfg.seed;
    meta["gmm_components"] = cfg.gmm_components;
    meta["latent_dim"] = cfg.latent_dim;
    meta["fps"] = cfg.fps;
    meta["window_frames"] = cfg.window_frames;
    meta["window_stride"] = cfg.window_stride;
    meta["regularization"] = cfg.regularization;
    meta["embedder"] = cfg.embedder ? "provided" : "fitted_on_gt";
    meta["clip_count"] = clip_count;
    meta["fgd_windows"] = fgd_windows;
    meta["fid_windows"] = fid_windows;
    j["metadata"] = std::move(meta);
    return j;
  }
};

/// Matches clips by id. Every id must appear on both sides and the paired
/// tracks must have equal length; the result is sorted by clip id.
inline std::vector<ClipPair> pair_clips(const std::map<std::string, TwoHandTrack>& pred,
                                        const std::map<std::string, TwoHandTrack>& gt) {
  for (const auto& [id, _] : gt)
    if (!pred.count(id)) fail(Errc::Unpaired, "ground-truth clip " + id + " has no prediction");
  for (const auto& [id, _] : pred)
    if (!gt.count(id)) fail(Errc::Unpaired, "predicted clip " + id + " has no ground truth");
  std::vector<ClipPair> pairs;
  for (const auto& [id, g] : gt) {
    const auto& p = pred.at(id);
    if (p.size() != g.size())
      fail(Errc::Unpaired, "clip " + id + ": prediction has " + std::to_string(p.size()) +
                               " frames, ground truth " + std::to_string(g.size()));
    pairs.push_back({id, p, g});
  }
  return pairs;
}

namespace detail {

inline bool all_visible(const HandTrack& t, std::size_t start, std::size_t len) {
  for (std::size_t i = start; i < start + len; ++i)
    if (!t.visible(i)) return false;
  return true;
}

template <class Row>
inline void append_theta(Row&& row, const HandTrack& t, std::size_t start, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i)
    for (int c = 0; c < kAngleChannels; ++c)
      row(static_cast<Eigen::Index>(i) * kAngleChannels + c) = t.frames[start + i]->theta(c / 3, c % 3);
}

struct Windows {
  std::vector<std::pair<std::size_t, std::size_t>> at;  // (pair index, start frame)
};

/// Window starts where `keep(pair, start)` holds, in (clip id, start) order.
template <class Keep>
Windows windows(const std::vector<ClipPair>& pairs, std::size_t len, std::size_t stride, Keep keep) {
  Windows w;
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (std::size_t s = 0; s + len <= pairs[p].gt.size(); s += stride)
      if (keep(pairs[p], s)) w.at.emplace_back(p, s);
  return w;
}

inline TwoHandTrack at_fps(const TwoHandTrack& t, double fps) {
  if (t.fps() == fps) return t;
  TwoHandTrack out{pipeline::resample_fps(t.left, fps), pipeline::resample_fps(t.right, fps)};
  return out;
}

inline double checked(double v, const char* name) {
  require(std::isfinite(v) && v >= 0.0, Errc::NonFinite, std::string(name) + " evaluated to " + std::to_string(v));
  return v;
}

}  // namespace detail

inline MetricReport evaluate(std::vector<ClipPair> pairs, const EvalConfig& cfg) {
  cfg.validate();
  require(!pairs.empty(), Errc::EmptyDataset, "no clip pairs to evaluate");
  std::sort(pairs.begin(), pairs.end(), [](const ClipPair& a, const ClipPair& b) { return a.clip_id < b.clip_id; });
  for (auto& p : pairs) {
    p.pred = detail::at_fps(p.pred, cfg.fps);
    p.gt = detail::at_fps(p.gt, cfg.fps);
    require(p.pred.size() == p.gt.size(), Errc::Unpaired, "clip " + p.clip_id + ": frame counts differ");
  }

  MetricReport report;
  report.clip_count = pairs.size();
  const auto len = static_cast<std::size_t>(cfg.window_frames);
  const auto stride = static_cast<std::size_t>(cfg.window_stride);

  for (HandSide side : {HandSide::Left, HandSide::Right}) {
    HandScores& out = side == HandSide::Left ? report.left : report.right;
    const char* hname = side == HandSide::Left ? "left" : "right";

    if (cfg.wants("fgd")) {
      const auto w = detail::windows(pairs, len, stride, [&](const ClipPair& p, std::size_t s) {
        return detail::all_visible(p.pred.hand(side), s, len) && detail::all_visible(p.gt.hand(side), s, len);
      });
      require(w.at.size() >= 2, Errc::TooFewSamples,
              std::string("FGD needs at least two fully visible ") + hname + "-hand windows, found " +
                  std::to_string(w.at.size()));
      const auto n = static_cast<Eigen::Index>(w.at.size());
      Eigen::MatrixXd a(n, static_cast<Eigen::Index>(len) * kAngleChannels), b(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto [pi, s] = w.at[static_cast<std::size_t>(i)];
        detail::append_theta(a.row(i), pairs[pi].pred.hand(side), s, len);
        detail::append_theta(b.row(i), pairs[pi].gt.hand(side), s, len);
      }
      out.fgd = detail::checked(metrics::fgd(a, b, cfg.regularization), "FGD");
      report.fgd_windows = std::max(report.fgd_windows, w.at.size());
    }

    if (cfg.wants("wgd") || cfg.wants("pd")) {
      std::vector<const HandFrame*> pf, gf;
      for (const auto& p : pairs)
        for (std::size_t i = 0; i < p.gt.size(); ++i)
          if (p.pred.hand(side).visible(i) && p.gt.hand(side).visible(i)) {
            pf.push_back(&*p.pred.hand(side).frames[i]);
            gf.push_back(&*p.gt.hand(side).frames[i]);
          }
      const auto n = static_cast<Eigen::Index>(pf.size());
      if (cfg.wants("wgd")) {
        Eigen::MatrixXd a(n, kAngleChannels), b(n, kAngleChannels);
        for (Eigen::Index i = 0; i < n; ++i)
          for (int c = 0; c < kAngleChannels; ++c) {
            a(i, c) = pf[static_cast<std::size_t>(i)]->theta(c / 3, c % 3);
            b(i, c) = gf[static_cast<std::size_t>(i)]->theta(c / 3, c % 3);
          }
        stats::GmmOptions go;
        go.components = cfg.gmm_components;
        go.seed = cfg.seed;
        out.wgd = detail::checked(metrics::wgd(a, b, go), "WGD");
      }
      if (cfg.wants("pd")) {
        Eigen::MatrixX3d a(n, 3), b(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
          a.row(i) = pf[static_cast<std::size_t>(i)]->trans.transpose();
          b.row(i) = gf[static_cast<std::size_t>(i)]->trans.transpose();
        }
        out.pd = detail::checked(metrics::position_distance(a, b), "PD");
      }
    }

    if (cfg.wants("smooth")) {
      const hand::Kinematics kin(cfg.hand_template);
      const int points = cfg.hand_template.point_count();
      hand::AccelerationSummary ps(points), gs(points);
      for (const auto& p : pairs) {
        ps.add(hand::joint_accelerations(p.pred.hand(side), side, kin));
        gs.add(hand::joint_accelerations(p.gt.hand(side), side, kin));
      }
      out.smoothness = detail::checked(metrics::smoothness(ps, gs), "smoothness");
    }
  }

  if (cfg.wants("fid")) {
    const auto w = detail::windows(pairs, len, stride, [&](const ClipPair& p, std::size_t s) {
      return detail::all_visible(p.pred.left, s, len) && detail::all_visible(p.pred.right, s, len) &&
             detail::all_visible(p.gt.left, s, len) && detail::all_visible(p.gt.right, s, len);
    });
    require(w.at.size() >= 2, Errc::TooFewSamples,
            "FID needs at least two windows with both hands visible, found " + std::to_string(w.at.size()));
    const auto n = static_cast<Eigen::Index>(w.at.size());
    const Eigen::Index half = static_cast<Eigen::Index>(len) * kAngleChannels;
    Eigen::MatrixXd a(n, 2 * half), b(n, 2 * half);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [pi, s] = w.at[static_cast<std::size_t>(i)];
      detail::append_theta(a.row(i).head(half), pairs[pi].pred.left, s, len);
      detail::append_theta(a.row(i).tail(half), pairs[pi].pred.right, s, len);
      detail::append_theta(b.row(i).head(half), pairs[pi].gt.left, s, len);
      detail::append_theta(b.row(i).tail(half), pairs[pi].gt.right, s, len);
    }
    const stats::Embedder emb = cfg.embedder ? *cfg.embedder : stats::fit_embedder(b, cfg.latent_dim);
    report.fid = detail::checked(metrics::compute_fid(a, b, emb, cfg.regularization), "FID");
    report.fid_windows = w.at.size();
  }
  return report;
}

}  // namespace pianomotion::eval
