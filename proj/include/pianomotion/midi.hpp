#pragma once

// Standard MIDI File reading/writing, note extraction, corpus histograms and
// transcription comparison.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pianomotion/error.hpp"

namespace pianomotion::midi {

constexpr std::uint32_t kDefaultTempo = 500000;  // microseconds per quarter note (120 bpm)
constexpr std::uint32_t kMaxVlq = 0x0FFFFFFF;

// ---------------------------------------------------------------------------
// Variable-length quantities

/// Decodes a VLQ starting at `pos`, advancing it. At most four bytes are allowed.
inline std::uint32_t read_vlq(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    if (pos >= bytes.size()) fail(Errc::TruncatedChunk, "variable-length quantity runs past end of data");
    const std::uint8_t b = bytes[pos++];
    value = (value << 7) | (b & 0x7F);
    if ((b & 0x80) == 0) return value;
  }
  fail(Errc::InvalidVlq, "variable-length quantity longer than 4 bytes");
}

inline void write_vlq(std::uint32_t value, std::vector<std::uint8_t>& out) {
  require(value <= kMaxVlq, Errc::InvalidArgument, "value does not fit in a 4-byte VLQ");
  std::uint8_t buf[4];
  int n = 0;
  buf[n++] = static_cast<std::uint8_t>(value & 0x7F);
  while ((value >>= 7) != 0) buf[n++] = static_cast<std::uint8_t>((value & 0x7F) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

// ---------------------------------------------------------------------------
// Raw file model

struct MidiEvent {
  std::uint32_t delta = 0;   // ticks since previous event in the track
  std::uint8_t status = 0;   // 0x80..0xEF channel message, 0xF0/0xF7 sysex, 0xFF meta
  std::uint8_t meta_type = 0;
  std::vector<std::uint8_t> data;  // channel data bytes, or meta/sysex payload

  bool is_meta() const noexcept { return status == 0xFF; }
  bool is_sysex() const noexcept { return status == 0xF0 || status == 0xF7; }
  bool is_channel() const noexcept { return status >= 0x80 && status < 0xF0; }
  bool is_end_of_track() const noexcept { return is_meta() && meta_type == 0x2F; }
  bool is_tempo() const noexcept { return is_meta() && meta_type == 0x51 && data.size() == 3; }
  std::uint8_t kind() const noexcept { return static_cast<std::uint8_t>(status & 0xF0); }
  std::uint8_t channel() const noexcept { return static_cast<std::uint8_t>(status & 0x0F); }

  std::uint32_t tempo() const {
    return (std::uint32_t{data[0]} << 16) | (std::uint32_t{data[1]} << 8) | data[2];
  }

  bool operator==(const MidiEvent&) const = default;

  static MidiEvent note_on(std::uint32_t delta, int channel, int pitch, int velocity) {
    return {delta, static_cast<std::uint8_t>(0x90 | (channel & 0x0F)), 0,
            {static_cast<std::uint8_t>(pitch), static_cast<std::uint8_t>(velocity)}};
  }
  static MidiEvent note_off(std::uint32_t delta, int channel, int pitch, int velocity = 0) {
    return {delta, static_cast<std::uint8_t>(0x80 | (channel & 0x0F)), 0,
            {static_cast<std::uint8_t>(pitch), static_cast<std::uint8_t>(velocity)}};
  }
  static MidiEvent set_tempo(std::uint32_t delta, std::uint32_t us_per_quarter) {
    return {delta, 0xFF, 0x51,
            {static_cast<std::uint8_t>(us_per_quarter >> 16), static_cast<std::uint8_t>(us_per_quarter >> 8),
             static_cast<std::uint8_t>(us_per_quarter)}};
  }
  static MidiEvent end_of_track(std::uint32_t delta = 0) { return {delta, 0xFF, 0x2F, {}}; }
};

using Track = std::vector<MidiEvent>;

struct MidiFile {
  int format = 0;
  int division = 480;  // ticks per quarter note
  std::vector<Track> tracks;

  bool operator==(const MidiFile&) const = default;
};

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t pos) {
  return (std::uint32_t{b[pos]} << 24) | (std::uint32_t{b[pos + 1]} << 16) | (std::uint32_t{b[pos + 2]} << 8) |
         b[pos + 3];
}
inline std::uint16_t read_be16(std::span<const std::uint8_t> b, std::size_t pos) {
  return static_cast<std::uint16_t>((b[pos] << 8) | b[pos + 1]);
}
inline void write_be32(std::uint32_t v, std::vector<std::uint8_t>& out) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}
inline void write_be16(std::uint16_t v, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}
inline bool tag_is(std::span<const std::uint8_t> b, std::size_t pos, const char* tag) {
  return std::equal(tag, tag + 4, b.begin() + static_cast<std::ptrdiff_t>(pos),
                    [](char c, std::uint8_t u) { return static_cast<std::uint8_t>(c) == u; });
}

inline int channel_data_length(std::uint8_t status) { return (status & 0xF0) == 0xC0 || (status & 0xF0) == 0xD0 ? 1 : 2; }

inline Track parse_track(std::span<const std::uint8_t> body) {
  Track track;
  std::size_t pos = 0;
  std::uint8_t running = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > body.size()) fail(Errc::TruncatedChunk, "event runs past end of track chunk");
  };
  while (pos < body.size()) {
    MidiEvent ev;
    ev.delta = read_vlq(body, pos);
    need(1);
    std::uint8_t status = body[pos];
    if (status < 0x80) {
      if (running == 0) fail(Errc::MalformedEvent, "data byte without running status");
      status = running;
    } else {
      ++pos;
    }
    ev.status = status;
    if (status == 0xFF) {
      need(1);
      ev.meta_type = body[pos++];
      const std::uint32_t len = read_vlq(body, pos);
      need(len);
      ev.data.assign(body.begin() + static_cast<std::ptrdiff_t>(pos), body.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    } else if (status == 0xF0 || status == 0xF7) {
      const std::uint32_t len = read_vlq(body, pos);
      need(len);
      ev.data.assign(body.begin() + static_cast<std::ptrdiff_t>(pos), body.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    } else if (status >= 0x80 && status < 0xF0) {
      running = status;
      const int n = channel_data_length(status);
      need(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        if (body[pos] & 0x80) fail(Errc::MalformedEvent, "status byte inside channel message data");
        ev.data.push_back(body[pos++]);
      }
    } else {
      fail(Errc::MalformedEvent, "system common/real-time status in track data");
    }
    const bool eot = ev.is_end_of_track();
    track.push_back(std::move(ev));
    if (eot) return track;  // trailing bytes after end-of-track are ignored
  }
  fail(Errc::TruncatedChunk, "track chunk ends without end-of-track event");
}

}  // namespace detail

/// Parses a complete Standard MIDI File. Running status is accepted; unknown
/// meta and sysex events are kept as opaque payloads, unknown chunks skipped.
inline MidiFile parse_smf(std::span<const std::uint8_t> bytes) {
  using namespace detail;
  if (bytes.size() < 14 || !tag_is(bytes, 0, "MThd")) fail(Errc::MalformedHeader, "missing MThd header chunk");
  const std::uint32_t header_len = read_be32(bytes, 4);
  if (header_len < 6 || 8 + static_cast<std::size_t>(header_len) > bytes.size())
    fail(Errc::MalformedHeader, "bad header chunk length");
  MidiFile file;
  file.format = read_be16(bytes, 8);
  const int declared_tracks = read_be16(bytes, 10);
  const std::uint16_t division = read_be16(bytes, 12);
  if (file.format > 2) fail(Errc::MalformedHeader, "unsupported SMF format " + std::to_string(file.format));
  if (division & 0x8000) fail(Errc::MalformedHeader, "SMPTE time division is not supported");
  if (division == 0) fail(Errc::MalformedHeader, "division must be positive");
  if (file.format == 0 && declared_tracks != 1) fail(Errc::MalformedHeader, "format 0 requires exactly one track");
  file.division = division;

  std::size_t pos = 8 + header_len;
  while (pos < bytes.size()) {
    if (pos + 8 > bytes.size()) fail(Errc::TruncatedChunk, "incomplete chunk header");
    const std::uint32_t len = read_be32(bytes, pos + 4);
    if (pos + 8 + static_cast<std::size_t>(len) > bytes.size()) fail(Errc::TruncatedChunk, "chunk length exceeds file size");
    if (tag_is(bytes, pos, "MTrk")) {
      if (static_cast<int>(file.tracks.size()) == declared_tracks)
        fail(Errc::MalformedHeader, "more track chunks than declared in header");
      file.tracks.push_back(parse_track(bytes.subspan(pos + 8, len)));
    }
    pos += 8 + len;
  }
  if (static_cast<int>(file.tracks.size()) != declared_tracks)
    fail(Errc::TruncatedChunk, "expected " + std::to_string(declared_tracks) + " tracks, found " +
                                   std::to_string(file.tracks.size()));
  return file;
}

/// Writes the file without running status; every track must end with end-of-track.
inline std::vector<std::uint8_t> serialize_smf(const MidiFile& file) {
  using namespace detail;
  require(file.division > 0 && file.division < 0x8000, Errc::InvalidArgument, "division out of range");
  require(file.format >= 0 && file.format <= 2, Errc::InvalidArgument, "format out of range");
  std::vector<std::uint8_t> out{'M', 'T', 'h', 'd'};
  write_be32(6, out);
  write_be16(static_cast<std::uint16_t>(file.format), out);
  write_be16(static_cast<std::uint16_t>(file.tracks.size()), out);
  write_be16(static_cast<std::uint16_t>(file.division), out);
  for (const Track& track : file.tracks) {
    require(!track.empty() && track.back().is_end_of_track(), Errc::InvalidArgument,
            "track does not end with end-of-track");
    std::vector<std::uint8_t> body;
    for (const MidiEvent& ev : track) {
      write_vlq(ev.delta, body);
      body.push_back(ev.status);
      if (ev.is_meta()) {
        body.push_back(ev.meta_type);
        write_vlq(static_cast<std::uint32_t>(ev.data.size()), body);
      } else if (ev.is_sysex()) {
        write_vlq(static_cast<std::uint32_t>(ev.data.size()), body);
      } else {
        require(ev.is_channel() && static_cast<int>(ev.data.size()) == channel_data_length(ev.status),
                Errc::InvalidArgument, "malformed channel event");
      }
      body.insert(body.end(), ev.data.begin(), ev.data.end());
    }
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    write_be32(static_cast<std::uint32_t>(body.size()), out);
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

inline MidiFile read_smf_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_smf(bytes);
}

inline void write_smf_file(const MidiFile& file, const std::string& path) {
  const auto bytes = serialize_smf(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Tempo map and note events

class TempoMap {
 public:
  struct Entry {
    std::uint64_t tick;
    std::uint32_t us_per_quarter;
    bool operator==(const Entry&) const = default;
  };

  TempoMap(int division, std::vector<Entry> changes) : division_(division) {
    require(division > 0, Errc::InvalidArgument, "division must be positive");
    std::stable_sort(changes.begin(), changes.end(), [](const Entry& a, const Entry& b) { return a.tick < b.tick; });
    for (const Entry& e : changes) {
      if (!entries_.empty() && entries_.back().tick == e.tick) {
        entries_.back().us_per_quarter = e.us_per_quarter;  // last change at a tick wins
      } else {
        entries_.push_back(e);
      }
    }
    if (entries_.empty() || entries_.front().tick != 0) entries_.insert(entries_.begin(), Entry{0, kDefaultTempo});
    start_seconds_.resize(entries_.size(), 0.0);
    for (std::size_t i = 1; i < entries_.size(); ++i)
      start_seconds_[i] = start_seconds_[i - 1] + segment_seconds(i - 1, entries_[i].tick - entries_[i - 1].tick);
  }

  /// Integrates the piecewise-constant tempo up to `tick`.
  double seconds(std::uint64_t tick) const {
    auto it = std::upper_bound(entries_.begin(), entries_.end(), tick,
                               [](std::uint64_t t, const Entry& e) { return t < e.tick; });
    const std::size_t i = static_cast<std::size_t>(std::distance(entries_.begin(), it)) - 1;
    return start_seconds_[i] + segment_seconds(i, tick - entries_[i].tick);
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  int division() const noexcept { return division_; }

 private:
  double segment_seconds(std::size_t i, std::uint64_t ticks) const {
    return static_cast<double>(ticks) * entries_[i].us_per_quarter / (1e6 * division_);
  }

  int division_;
  std::vector<Entry> entries_;
  std::vector<double> start_seconds_;
};

struct NoteEvent {
  int pitch = 60;
  int velocity = 64;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds
  int channel = 0;

  bool operator==(const NoteEvent&) const = default;
};

enum class NoteWarning { UnmatchedNoteOff, DanglingNoteOn, ZeroLengthNote };

struct NoteDiagnostic {
  NoteWarning kind;
  int track;
  std::uint64_t tick;
  int channel;
  int pitch;
};

struct NoteExtraction {
  std::vector<NoteEvent> notes;
  TempoMap tempo;
  std::vector<NoteDiagnostic> diagnostics;
};

inline bool note_order(const NoteEvent& a, const NoteEvent& b) {
  return std::tie(a.onset, a.pitch, a.channel, a.offset, a.velocity) <
         std::tie(b.onset, b.pitch, b.channel, b.offset, b.velocity);
}

/// Converts the raw events into sorted note events. A repeated note-on for a
/// sounding pitch closes the held note at the new onset; notes still held at
/// end-of-track are closed there and reported.
inline NoteExtraction to_note_events(const MidiFile& file) {
  require(file.division > 0, Errc::InvalidArgument, "division must be positive");
  std::vector<TempoMap::Entry> changes;
  for (const Track& track : file.tracks) {
    std::uint64_t tick = 0;
    for (const MidiEvent& ev : track) {
      tick += ev.delta;
      if (ev.is_tempo() && ev.tempo() > 0) changes.push_back({tick, ev.tempo()});
    }
  }
  NoteExtraction result{{}, TempoMap(file.division, std::move(changes)), {}};
  const TempoMap& tempo = result.tempo;

  struct Held {
    std::uint64_t tick;
    int velocity;
  };
  for (std::size_t ti = 0; ti < file.tracks.size(); ++ti) {
    const int track_index = static_cast<int>(ti);
    std::map<std::pair<int, int>, Held> sounding;  // (channel, pitch)
    std::uint64_t tick = 0;
    auto close = [&](std::pair<int, int> key, const Held& held, std::uint64_t end) {
      if (end <= held.tick) {
        result.diagnostics.push_back({NoteWarning::ZeroLengthNote, track_index, end, key.first, key.second});
        return;
      }
      result.notes.push_back({key.second, held.velocity, tempo.seconds(held.tick), tempo.seconds(end), key.first});
    };
    for (const MidiEvent& ev : file.tracks[ti]) {
      tick += ev.delta;
      if (!ev.is_channel()) continue;
      const int kind = ev.kind();
      if (kind != 0x90 && kind != 0x80) continue;
      const std::pair<int, int> key{ev.channel(), ev.data[0]};
      const int velocity = ev.data[1];
      auto it = sounding.find(key);
      if (kind == 0x90 && velocity > 0) {
        if (it != sounding.end()) {
          close(key, it->second, tick);
          it->second = {tick, velocity};
        } else {
          sounding.emplace(key, Held{tick, velocity});
        }
      } else if (it != sounding.end()) {
        close(key, it->second, tick);
        sounding.erase(it);
      } else {
        result.diagnostics.push_back({NoteWarning::UnmatchedNoteOff, track_index, tick, key.first, key.second});
      }
    }
    for (const auto& [key, held] : sounding) {
      result.diagnostics.push_back({NoteWarning::DanglingNoteOn, track_index, tick, key.first, key.second});
      close(key, held, tick);
    }
  }
  std::stable_sort(result.notes.begin(), result.notes.end(), note_order);
  return result;
}

/// Builds a single-track file from note events at a constant tempo. Times
/// are quantized to the nearest tick.
inline MidiFile notes_to_smf(std::span<const NoteEvent> notes, int division = 480,
                             std::uint32_t us_per_quarter = kDefaultTempo) {
  struct Timed {
    std::uint64_t tick;
    int order;  // note-offs before note-ons at equal ticks
    MidiEvent ev;
  };
  const double ticks_per_second = 1e6 * division / us_per_quarter;
  std::vector<Timed> timed;
  for (const NoteEvent& n : notes) {
    const auto on = static_cast<std::uint64_t>(std::llround(n.onset * ticks_per_second));
    const auto off = static_cast<std::uint64_t>(std::llround(n.offset * ticks_per_second));
    timed.push_back({on, 1, MidiEvent::note_on(0, n.channel, n.pitch, n.velocity)});
    timed.push_back({off, 0, MidiEvent::note_off(0, n.channel, n.pitch)});
  }
  std::stable_sort(timed.begin(), timed.end(),
                   [](const Timed& a, const Timed& b) { return std::tie(a.tick, a.order) < std::tie(b.tick, b.order); });
  MidiFile file{0, division, {Track{MidiEvent::set_tempo(0, us_per_quarter)}}};
  std::uint64_t last = 0;
  for (Timed& t : timed) {
    t.ev.delta = static_cast<std::uint32_t>(t.tick - last);
    last = t.tick;
    file.tracks[0].push_back(std::move(t.ev));
  }
  file.tracks[0].push_back(MidiEvent::end_of_track());
  return file;
}

// ---------------------------------------------------------------------------
// Corpus statistics

constexpr int kDefaultVelocityBinWidth = 8;

struct Histograms {
  std::array<std::uint64_t, 128> pitch_counts{};
  std::vector<std::uint64_t> velocity_bins;
  int bin_width = kDefaultVelocityBinWidth;

  void add(std::span<const NoteEvent> notes) {
    for (const NoteEvent& n : notes) {
      ++pitch_counts.at(static_cast<std::size_t>(n.pitch));
      ++velocity_bins.at(static_cast<std::size_t>(n.velocity / bin_width));
    }
  }
};

inline Histograms histograms(std::span<const NoteEvent> notes, int velocity_bin_width = kDefaultVelocityBinWidth) {
  require(velocity_bin_width > 0 && 128 % velocity_bin_width == 0, Errc::InvalidArgument,
          "velocity bin width must divide 128");
  Histograms h;
  h.bin_width = velocity_bin_width;
  h.velocity_bins.assign(static_cast<std::size_t>(128 / velocity_bin_width), 0);
  h.add(notes);
  return h;
}

inline nlohmann::ordered_json to_json(const Histograms& h) {
  nlohmann::ordered_json j;
  j["pitch_counts"] = h.pitch_counts;
  j["velocity_bins"] = h.velocity_bins;
  j["bin_width"] = h.bin_width;
  return j;
}

inline std::string to_csv(const Histograms& h) {
  std::string csv = "kind,lower,upper,count\n";
  for (int p = 0; p < 128; ++p)
    csv += "pitch," + std::to_string(p) + "," + std::to_string(p + 1) + "," +
           std::to_string(h.pitch_counts[static_cast<std::size_t>(p)]) + "\n";
  for (std::size_t b = 0; b < h.velocity_bins.size(); ++b) {
    const int lo = static_cast<int>(b) * h.bin_width;
    csv += "velocity," + std::to_string(lo) + "," + std::to_string(lo + h.bin_width) + "," +
           std::to_string(h.velocity_bins[b]) + "\n";
  }
  return csv;
}

// ---------------------------------------------------------------------------
// Transcription comparison

struct DiffOptions {
  double timing_tol_ms = 30.0;
  double dynamic_tol = 0.10;
  // Same-pitch notes further apart than this are never paired.
  double match_window_ms = 250.0;
};

struct MatchedPair {
  std::size_t reference;  // index into the reference list
  std::size_t candidate;  // index into the candidate list
  double onset_delta_ms;  // candidate - reference
  double velocity_ratio;  // candidate / reference
  bool timing_violation;
  bool dynamic_violation;
};

struct TranscriptionDiff {
  std::vector<MatchedPair> matched;  // ordered by reference index
  std::vector<std::size_t> unmatched_reference;
  std::vector<std::size_t> unmatched_candidate;
  std::size_t timing_violations = 0;
  std::size_t dynamic_violations = 0;
  // Reference notes whose pitch is not reproduced near their onset.
  std::size_t pitch_mismatches = 0;

  bool within_thresholds() const noexcept {
    return timing_violations == 0 && dynamic_violations == 0 && pitch_mismatches == 0 && unmatched_candidate.empty();
  }
};

/// Greedy nearest-onset matching restricted to equal pitches: all admissible
/// (reference, candidate) pairs are taken in order of increasing onset gap.
inline TranscriptionDiff diff_transcription(std::span<const NoteEvent> candidate, std::span<const NoteEvent> reference,
                                            const DiffOptions& opts = {}) {
  // Decimal inputs such as 1.03 - 1.00 land a few ulps above 30 ms.
  constexpr double kMsSlack = 1e-6;
  constexpr double kRatioSlack = 1e-12;

  struct Candidate {
    double gap;
    std::size_t ref;
    std::size_t cand;
  };
  std::vector<Candidate> pairs;
  for (std::size_t r = 0; r < reference.size(); ++r) {
    for (std::size_t c = 0; c < candidate.size(); ++c) {
      if (candidate[c].pitch != reference[r].pitch) continue;
      const double gap = std::abs(candidate[c].onset - reference[r].onset) * 1000.0;
      if (gap <= opts.match_window_ms + kMsSlack) pairs.push_back({gap, r, c});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.gap, a.ref, a.cand) < std::tie(b.gap, b.ref, b.cand);
  });

  std::vector<bool> ref_used(reference.size(), false), cand_used(candidate.size(), false);
  TranscriptionDiff diff;
  for (const Candidate& p : pairs) {
    if (ref_used[p.ref] || cand_used[p.cand]) continue;
    ref_used[p.ref] = cand_used[p.cand] = true;
    const NoteEvent& r = reference[p.ref];
    const NoteEvent& c = candidate[p.cand];
    MatchedPair m{p.ref, p.cand, (c.onset - r.onset) * 1000.0,
                  static_cast<double>(c.velocity) / static_cast<double>(r.velocity), false, false};
    m.timing_violation = std::abs(m.onset_delta_ms) > opts.timing_tol_ms + kMsSlack;
    m.dynamic_violation = std::abs(m.velocity_ratio - 1.0) > opts.dynamic_tol + kRatioSlack;
    diff.timing_violations += m.timing_violation;
    diff.dynamic_violations += m.dynamic_violation;
    diff.matched.push_back(m);
  }
  std::sort(diff.matched.begin(), diff.matched.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.reference < b.reference; });
  for (std::size_t r = 0; r < reference.size(); ++r)
    if (!ref_used[r]) diff.unmatched_reference.push_back(r);
  for (std::size_t c = 0; c < candidate.size(); ++c)
    if (!cand_used[c]) diff.unmatched_candidate.push_back(c);
  diff.pitch_mismatches = diff.unmatched_reference.size();
  return diff;
}

inline nlohmann::ordered_json to_json(const TranscriptionDiff& d, const DiffOptions& opts) {
  nlohmann::ordered_json j;
  j["timing_tol_ms"] = opts.timing_tol_ms;
  j["dynamic_tol"] = opts.dynamic_tol;
  j["matched"] = d.matched.size();
  j["timing_violations"] = d.timing_violations;
  j["dynamic_violations"] = d.dynamic_violations;
  j["pitch_mismatches"] = d.pitch_mismatches;
  j["unmatched_reference"] = d.unmatched_reference;
  j["unmatched_candidate"] = d.unmatched_candidate;
  j["within_thresholds"] = d.within_thresholds();
  auto& pairs = j["pairs"] = nlohmann::ordered_json::array();
  for (const MatchedPair& m : d.matched) {
    pairs.push_back({{"reference", m.reference},
                     {"candidate", m.candidate},
                     {"onset_delta_ms", m.onset_delta_ms},
                     {"velocity_ratio", m.velocity_ratio},
                     {"timing_violation", m.timing_violation},
                     {"dynamic_violation", m.dynamic_violation}});
  }
  return j;
}

}  // namespace pianomotion::midi
