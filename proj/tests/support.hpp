#pragma once

// Synthetic fixtures shared by the test binaries.

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "pianomotion/pianomotion.hpp"

namespace testsupport {

namespace fs = std::filesystem;
namespace pm = pianomotion;

/// Fresh empty directory under the system temp dir.
inline fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pianomotion_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline pm::HandFrame random_frame(std::mt19937_64& rng, double angle_scale = 0.6) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  pm::HandFrame f;
  for (int j = 0; j < pm::kNumJoints; ++j)
    for (int c = 0; c < 3; ++c) f.theta(j, c) = angle_scale * u(rng);
  for (int c = 0; c < 3; ++c) f.trans(c) = 0.3 * u(rng);
  return f;
}

/// Sum-of-sinusoids motion with random phases; `dropouts` short gaps are cut
/// into each hand.
inline pm::HandTrack smooth_hand(std::mt19937_64& rng, std::size_t frames, double fps, int dropouts = 0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  pm::HandTrack t;
  t.fps = fps;
  double phase[pm::kFrameChannels], freq[pm::kFrameChannels], amp[pm::kFrameChannels], base[pm::kFrameChannels];
  for (int c = 0; c < pm::kFrameChannels; ++c) {
    phase[c] = 6.283185307179586 * u(rng);
    freq[c] = 0.2 + 1.5 * u(rng);
    amp[c] = c < pm::kAngleChannels ? 0.1 + 0.4 * u(rng) : 0.02 + 0.05 * u(rng);
    base[c] = c < pm::kAngleChannels ? 0.3 * (u(rng) - 0.5) : 0.2 * (u(rng) - 0.5);
  }
  for (std::size_t i = 0; i < frames; ++i) {
    pm::HandFrame f;
    const double s = static_cast<double>(i) / fps;
    for (int c = 0; c < pm::kFrameChannels; ++c)
      f.channel(c) = base[c] + amp[c] * std::sin(6.283185307179586 * freq[c] * s + phase[c]);
    t.frames.push_back(f);
  }
  for (int d = 0; d < dropouts && frames > 10; ++d) {
    const auto start = static_cast<std::size_t>(u(rng) * static_cast<double>(frames - 10));
    const auto len = 1 + static_cast<std::size_t>(u(rng) * 8.0);
    for (std::size_t i = start; i < std::min(frames, start + len); ++i) t.frames[i].reset();
  }
  return t;
}

inline pm::TwoHandTrack smooth_track(std::mt19937_64& rng, std::size_t frames, double fps = 30.0, int dropouts = 0) {
  pm::TwoHandTrack t;
  t.left = smooth_hand(rng, frames, fps, dropouts);
  t.right = smooth_hand(rng, frames, fps, dropouts);
  return t;
}

inline pm::dataset::ClipAnnotation synthetic_clip(const std::string& video, long start_second, const std::string& subject,
                                                  std::size_t frames, std::mt19937_64& rng, int dropouts = 0) {
  pm::dataset::ClipAnnotation c;
  c.video_id = video;
  c.clip_id = pm::dataset::make_clip_id(video, start_second);
  c.subject = subject;
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < pm::kShapeDim; ++i) c.rho(i) = u(rng);
  c.track = smooth_track(rng, frames, 30.0, dropouts);
  return c;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs a shell command and returns its exit status (-1 if it did not exit).
inline int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

}  // namespace testsupport
