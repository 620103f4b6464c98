// pianomotion: batch front end for the toolkit.
//
// Exit codes: 0 ok, 1 usage, 2 unpaired inputs, 3 schema / file errors,
// 4 numeric failures.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pianomotion/pianomotion.hpp"

namespace fs = std::filesystem;
namespace pm = pianomotion;
using ojson = nlohmann::ordered_json;

namespace {

int exit_code(pm::Errc c) {
  switch (c) {
    case pm::Errc::Unpaired: return 2;
    case pm::Errc::MalformedHeader:
    case pm::Errc::TruncatedChunk:
    case pm::Errc::InvalidVlq:
    case pm::Errc::MalformedEvent:
    case pm::Errc::SchemaViolation:
    case pm::Errc::BadFrameCount:
    case pm::Errc::EmptyDataset:
    case pm::Errc::ConflictingSplit:
    case pm::Errc::Io: return 3;
    case pm::Errc::InvalidArgument: return 1;
    default: return 4;
  }
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    pm::dataset::write_text_file(path, text);
  }
}

void emit(const ojson& j, const std::string& path) { emit(j.dump(2) + "\n", path); }

std::optional<double> clip_seconds_opt(double s) {
  if (s <= 0.0) return std::nullopt;
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Loads every clip file under `dir` with up to `jobs` workers; the result
/// is keyed (and therefore ordered) by clip id.
std::map<std::string, pm::TwoHandTrack> load_clip_dir(const fs::path& dir, const pm::dataset::LoadOptions& opts,
                                                      int jobs) {
  if (!fs::is_directory(dir)) pm::fail(pm::Errc::Io, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<std::optional<pm::dataset::ClipAnnotation>> loaded(files.size());
  std::vector<std::exception_ptr> errors(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < files.size();) {
      try {
        const auto j = pm::dataset::read_json_file(files[i]);
        if (j.is_object() && j.contains("clip_id")) loaded[i] = pm::dataset::clip_from_json(j, opts, files[i].string());
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(files.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<std::string, pm::TwoHandTrack> clips;
  for (auto& c : loaded) {
    if (!c) continue;
    if (!clips.emplace(c->clip_id, std::move(c->track)).second)
      pm::fail(pm::Errc::SchemaViolation, "duplicate clip id " + c->clip_id + " under " + dir.string());
  }
  if (clips.empty()) pm::fail(pm::Errc::EmptyDataset, "no clip files under " + dir.string());
  return clips;
}

pm::diffusion::Parameterization parse_param(const std::string& s) {
  if (s == "x0") return pm::diffusion::Parameterization::X0;
  if (s == "eps") return pm::diffusion::Parameterization::Epsilon;
  if (s == "v") return pm::diffusion::Parameterization::V;
  pm::fail(pm::Errc::InvalidArgument, "unknown parameterization " + s);
}

/// Smooth deterministic stand-in for a clean motion sample.
Eigen::MatrixXd demo_x0(Eigen::Index frames, Eigen::Index width) {
  Eigen::MatrixXd x(frames, width);
  for (Eigen::Index i = 0; i < frames; ++i)
    for (Eigen::Index c = 0; c < width; ++c)
      x(i, c) = 0.5 * std::sin(0.05 * static_cast<double>(i) + 0.3 * static_cast<double>(c));
  return x;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Piano hand-motion toolkit"};
  app.require_subcommand(1);

  // midi-stats
  std::string midi_in, report, csv_path;
  int bin_width = pm::midi::kDefaultVelocityBinWidth;
  auto* midi_stats = app.add_subcommand("midi-stats", "Note statistics and histograms for a MIDI file");
  midi_stats->add_option("--in", midi_in, "MIDI file")->required();
  midi_stats->add_option("--bin-width", bin_width, "Velocity histogram bin width")->capture_default_str();
  midi_stats->add_option("--report", report, "JSON output path (default stdout)");
  midi_stats->add_option("--csv", csv_path, "CSV histogram output path");

  // midi-diff
  std::string candidate, reference;
  pm::midi::DiffOptions diff_opts;
  auto* midi_diff = app.add_subcommand("midi-diff", "Compare a transcription against a reference");
  midi_diff->add_option("--candidate", candidate, "Candidate MIDI file")->required();
  midi_diff->add_option("--reference", reference, "Reference MIDI file")->required();
  midi_diff->add_option("--timing-ms", diff_opts.timing_tol_ms, "Onset tolerance")->capture_default_str();
  midi_diff->add_option("--dynamic", diff_opts.dynamic_tol, "Relative velocity tolerance")->capture_default_str();
  midi_diff->add_option("--match-window-ms", diff_opts.match_window_ms, "Pairing window")->capture_default_str();
  midi_diff->add_option("--report", report, "JSON output path (default stdout)");

  // clean
  std::string in_path, out_path, gaps_path;
  double fps = 30.0;
  auto* clean = app.add_subcommand("clean", "Outlier removal, gap filling, smoothing and resampling");
  clean->add_option("--in", in_path, "Raw track JSON")->required();
  clean->add_option("--out", out_path, "Cleaned track JSON")->required();
  clean->add_option("--gaps", gaps_path, "Gap label sidecar (default <out>.gaps.json)");
  clean->add_option("--fps", fps, "Output frame rate")->capture_default_str();

  // segment
  std::string out_dir, video_id, subject;
  pm::pipeline::SegmentOptions seg_opts;
  auto* segment = app.add_subcommand("segment", "Cut a cleaned track into fixed-length clips");
  segment->add_option("--in", in_path, "Cleaned track JSON")->required();
  segment->add_option("--out-dir", out_dir, "Directory for clip files")->required();
  segment->add_option("--video-id", video_id, "Source video id (default: from input)");
  segment->add_option("--subject", subject, "Subject name (default: from input)");
  segment->add_option("--clip-seconds", seg_opts.clip_seconds, "Clip length")->capture_default_str();
  segment->add_option("--stride-seconds", seg_opts.stride_seconds, "Window stride")->capture_default_str();
  segment->add_option("--min-visibility", seg_opts.min_visibility, "Minimum two-hand visibility")
      ->capture_default_str();
  segment->add_option("--report", report, "JSON window list (default stdout)");

  // manifest / stats
  std::string root, split_path;
  double clip_seconds = 30.0;
  auto* manifest = app.add_subcommand("manifest", "Assign clips to splits by source video");
  manifest->add_option("--root", root, "Dataset directory")->required();
  manifest->add_option("--split", split_path, "Split policy JSON");
  manifest->add_option("--clip-seconds", clip_seconds, "Expected clip length (0 disables the check)")
      ->capture_default_str();
  manifest->add_option("--report", report, "JSON output path (default stdout)");

  auto* stats = app.add_subcommand("stats", "Per-subject dataset statistics");
  stats->add_option("--root", root, "Dataset directory")->required();
  stats->add_option("--clip-seconds", clip_seconds, "Expected clip length (0 disables the check)")
      ->capture_default_str();
  stats->add_option("--report", report, "JSON output path (default stdout)");
  stats->add_option("--csv", csv_path, "CSV output path");

  // eval
  std::string pred_dir, gt_dir, metrics = "fid,fgd,wgd,pd,smooth", embedder_path, template_path;
  pm::eval::EvalConfig cfg;
  int jobs = 1;
  auto* eval = app.add_subcommand("eval", "Score predicted clips against ground truth");
  eval->add_option("--pred", pred_dir, "Prediction directory")->required();
  eval->add_option("--gt", gt_dir, "Ground-truth directory")->required();
  eval->add_option("--metrics", metrics, "Comma-separated metric list")->capture_default_str();
  eval->add_option("--gmm-components", cfg.gmm_components, "Mixture components for WGD")->capture_default_str();
  eval->add_option("--latent-dim", cfg.latent_dim, "Embedding dimension for FID")->capture_default_str();
  eval->add_option("--seed", cfg.seed, "Seed for randomized fits")->capture_default_str();
  eval->add_option("--fps", cfg.fps, "Evaluation frame rate")->capture_default_str();
  eval->add_option("--window-frames", cfg.window_frames, "Sequence window length")->capture_default_str();
  eval->add_option("--window-stride", cfg.window_stride, "Sequence window stride")->capture_default_str();
  eval->add_option("--clip-seconds", clip_seconds, "Expected clip length (0 disables the check)")
      ->capture_default_str();
  eval->add_option("--embedder", embedder_path, "Pre-fitted embedder JSON");
  eval->add_option("--template", template_path, "Hand template JSON");
  eval->add_option("--jobs", jobs, "Parallel clip loaders")->capture_default_str();
  eval->add_option("--report", report, "JSON output path (default stdout)");

  // sample
  std::string denoiser_name = "oracle", param_name = "x0", variance_name = "posterior", x0_path;
  pm::diffusion::SampleOptions sample_opts;
  Eigen::Index frames = 240, width = 96;
  int schedule_steps = 1000;
  auto* sample = app.add_subcommand("sample", "Run the ancestral sampler with a reference denoiser");
  sample->add_option("--denoiser", denoiser_name, "oracle or zero")->capture_default_str();
  sample->add_option("--param", param_name, "x0, eps or v")->capture_default_str();
  sample->add_option("--variance", variance_name, "posterior or beta")->capture_default_str();
  sample->add_option("--x0", x0_path, "Clean sample tensor for the oracle (default: synthetic)");
  sample->add_option("--frames", frames, "Sample frames")->capture_default_str();
  sample->add_option("--width", width, "Sample width")->capture_default_str();
  sample->add_option("--schedule-steps", schedule_steps, "Training schedule length")->capture_default_str();
  sample->add_option("--steps", sample_opts.steps, "Sampling steps")->capture_default_str();
  sample->add_option("--seed", sample_opts.seed, "Noise seed")->capture_default_str();
  sample->add_option("--out", out_path, "Output tensor");
  sample->add_option("--report", report, "JSON summary path (default stdout)");

  // fk
  std::string dump_template;
  auto* fk = app.add_subcommand("fk", "Joint positions for every frame of a clip");
  fk->add_option("--in", in_path, "Clip or track JSON");
  fk->add_option("--out", out_path, "Output tensor (frames x 2 x points x 3; NaN when absent)");
  fk->add_option("--template", template_path, "Hand template JSON");
  fk->add_option("--dump-template", dump_template, "Write the built-in template JSON and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*midi_stats) {
      const auto file = pm::midi::read_smf_file(midi_in);
      const auto ex = pm::midi::to_note_events(file);
      const auto h = pm::midi::histograms(ex.notes, bin_width);
      ojson j;
      j["notes"] = ex.notes.size();
      j["diagnostics"] = ex.diagnostics.size();
      j["histograms"] = pm::midi::to_json(h);
      emit(j, report);
      if (!csv_path.empty()) emit(pm::midi::to_csv(h), csv_path);
    } else if (*midi_diff) {
      const auto cand = pm::midi::to_note_events(pm::midi::read_smf_file(candidate));
      const auto ref = pm::midi::to_note_events(pm::midi::read_smf_file(reference));
      const auto d = pm::midi::diff_transcription(cand.notes, ref.notes, diff_opts);
      emit(pm::midi::to_json(d, diff_opts), report);
    } else if (*clean) {
      pm::dataset::LoadOptions lo{std::nullopt, false};
      auto raw = pm::dataset::load_clip(in_path, lo);
      pm::pipeline::CleanOptions co;
      co.target_fps = fps;
      const auto result = pm::pipeline::clean_track(raw.track, co);
      raw.track = result.track;
      pm::dataset::save_clip(raw, out_path);
      if (gaps_path.empty()) {
        fs::path p(out_path);
        gaps_path = (p.parent_path() / p.stem()).string() + ".gaps.json";
      }
      ojson g;
      g["source"] = fs::path(in_path).filename().string();
      g["gaps"] = pm::pipeline::gaps_to_json(result);
      emit(g, gaps_path);
    } else if (*segment) {
      pm::dataset::LoadOptions lo{std::nullopt, false};
      const auto src = pm::dataset::load_clip(in_path, lo);
      if (video_id.empty()) video_id = src.video_id;
      if (subject.empty()) subject = src.subject;
      pm::require(!video_id.empty(), pm::Errc::SchemaViolation, "no video id in input; pass --video-id");
      fs::create_directories(out_dir);
      ojson list = ojson::array();
      for (const auto& w : pm::pipeline::segment_clips(src.track, seg_opts)) {
        pm::dataset::ClipAnnotation clip;
        clip.clip_id = pm::dataset::make_clip_id(video_id, std::lround(w.offset_seconds));
        clip.video_id = video_id;
        clip.subject = subject;
        clip.rho = src.rho;
        clip.track = pm::pipeline::extract_clip(src.track, w);
        pm::dataset::save_clip(clip, fs::path(out_dir) / (clip.clip_id + ".json"));
        list.push_back({{"clip_id", clip.clip_id}, {"start_frame", w.start_frame}, {"frames", w.frame_count},
                        {"offset_seconds", w.offset_seconds}, {"visibility", w.visibility}});
      }
      emit(list, report);
    } else if (*manifest || *stats) {
      pm::dataset::SplitSpec policy;
      if (!split_path.empty()) policy = pm::dataset::SplitSpec::from_json(pm::dataset::read_json_file(split_path));
      const auto m = pm::dataset::build_manifest(root, policy, {clip_seconds_opt(clip_seconds), true});
      if (*manifest) {
        emit(m.to_json(), report);
      } else {
        const auto s = pm::dataset::subject_stats(m);
        emit(s.to_json(), report);
        if (!csv_path.empty()) emit(s.to_csv(), csv_path);
      }
    } else if (*eval) {
      const auto list = split_list(metrics);
      cfg.metrics = {list.begin(), list.end()};
      if (!embedder_path.empty()) cfg.embedder = pm::stats::load_embedder(embedder_path);
      if (!template_path.empty()) cfg.hand_template = pm::hand::load_template(template_path);
      cfg.validate();
      const pm::dataset::LoadOptions lo{clip_seconds_opt(clip_seconds), true};
      const auto gt = load_clip_dir(gt_dir, lo, jobs);
      const auto pred = load_clip_dir(pred_dir, lo, jobs);
      const auto r = pm::eval::evaluate(pm::eval::pair_clips(pred, gt), cfg);
      emit(r.to_json(cfg), report);
    } else if (*sample) {
      namespace df = pm::diffusion;
      const auto sched = df::build_schedule(schedule_steps);
      if (variance_name == "posterior") sample_opts.variance = df::ReverseVariance::Posterior;
      else if (variance_name == "beta") sample_opts.variance = df::ReverseVariance::Beta;
      else pm::fail(pm::Errc::InvalidArgument, "unknown variance " + variance_name);
      const auto kind = parse_param(param_name);
      Eigen::MatrixXd x0 = x0_path.empty() ? demo_x0(frames, width) : pm::io::read_tensor(x0_path).as_matrix();
      df::Denoiser den;
      if (denoiser_name == "oracle") den = df::oracle_denoiser(x0, sched, kind);
      else if (denoiser_name == "zero") den = df::zero_denoiser(kind);
      else pm::fail(pm::Errc::InvalidArgument, "unknown denoiser " + denoiser_name);
      const Eigen::MatrixXd x = df::ddpm_sample(den, sched, {}, x0.rows(), x0.cols(), sample_opts);
      if (!out_path.empty()) pm::io::write_tensor(pm::io::Tensor::from_matrix(x), out_path);
      ojson j;
      j["denoiser"] = denoiser_name;
      j["parameterization"] = param_name;
      j["variance"] = variance_name;
      j["schedule_steps"] = schedule_steps;
      j["steps"] = sample_opts.steps;
      j["seed"] = sample_opts.seed;
      j["shape"] = {x.rows(), x.cols()};
      j["rmse_to_x0"] = std::sqrt((x - x0).squaredNorm() / static_cast<double>(x.size()));
      emit(j, report);
    } else if (*fk) {
      if (!dump_template.empty()) {
        emit(pm::hand::to_json(pm::hand::HandTemplate::neutral()), dump_template);
        return 0;
      }
      pm::require(!in_path.empty() && !out_path.empty(), pm::Errc::InvalidArgument, "fk needs --in and --out");
      const auto tmpl = template_path.empty() ? pm::hand::HandTemplate::neutral() : pm::hand::load_template(template_path);
      const auto clip = pm::dataset::load_clip(in_path, {std::nullopt, false});
      const pm::hand::Kinematics kin(tmpl, pm::hand::HandShape{clip.rho});
      const auto points = static_cast<std::uint64_t>(tmpl.point_count());
      pm::io::Tensor t;
      t.dims = {clip.track.size(), 2, points, 3};
      t.data.assign(t.element_count(), std::numeric_limits<double>::quiet_NaN());
      for (std::size_t f = 0; f < clip.track.size(); ++f)
        for (int h = 0; h < 2; ++h) {
          const auto side = h == 0 ? pm::HandSide::Left : pm::HandSide::Right;
          const auto& frame = clip.track.hand(side).frames[f];
          if (!frame) continue;
          const auto joints = kin.forward(*frame, side);
          for (std::uint64_t p = 0; p < points; ++p)
            for (int c = 0; c < 3; ++c)
              t.data[((f * 2 + static_cast<std::size_t>(h)) * points + p) * 3 + static_cast<std::size_t>(c)] =
                  joints(static_cast<Eigen::Index>(p), c);
        }
      pm::io::write_tensor(t, out_path);
    }
  } catch (const pm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
