#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "pianomotion/midi.hpp"
#include "oracles.hpp"

using namespace pianomotion;
using namespace pianomotion::midi;

namespace {

std::vector<std::uint8_t> bytes(std::initializer_list<int> v) {
  std::vector<std::uint8_t> out;
  for (int b : v) out.push_back(static_cast<std::uint8_t>(b));
  return out;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::Io;
}

// Format 0, division 480: tempo, note-on C4 at 0, note-off after 480 ticks, EOT.
const std::vector<std::uint8_t> kHandEncoded = bytes({
    'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,  //
    'M', 'T', 'r', 'k', 0, 0, 0, 20,                          //
    0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,                 // tempo 500000
    0x00, 0x90, 0x3C, 0x40,                                   // note on 60 vel 64
    0x83, 0x60, 0x80, 0x3C, 0x00,                             // delta 480, note off
    0x00, 0xFF, 0x2F, 0x00,                                   // end of track
});

}  // namespace

TEST(Vlq, TwoByteValue) {
  const auto b = bytes({0x81, 0x00});
  std::size_t pos = 0;
  EXPECT_EQ(read_vlq(b, pos), 128u);
  EXPECT_EQ(pos, 2u);
}

TEST(Vlq, RoundTripAcrossRange) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> u(0, (1u << 28) - 1);
  std::vector<std::uint32_t> values{0, 1, 127, 128, 16383, 16384, 2097151, 2097152, (1u << 28) - 1};
  for (int i = 0; i < 5000; ++i) values.push_back(u(rng));
  for (std::uint32_t v : values) {
    std::vector<std::uint8_t> enc;
    write_vlq(v, enc);
    std::size_t pos = 0;
    ASSERT_EQ(read_vlq(enc, pos), v);
    ASSERT_EQ(pos, enc.size());
  }
}

TEST(Vlq, FiveBytesRejected) {
  const auto b = bytes({0x81, 0x81, 0x81, 0x81, 0x01});
  std::size_t pos = 0;
  EXPECT_EQ(code_of([&] { read_vlq(b, pos); }), Errc::InvalidVlq);
}

TEST(Vlq, RunsOffEnd) {
  const auto b = bytes({0x81});
  std::size_t pos = 0;
  EXPECT_EQ(code_of([&] { read_vlq(b, pos); }), Errc::TruncatedChunk);
}

TEST(ParseSmf, HandEncodedFile) {
  const MidiFile f = parse_smf(kHandEncoded);
  EXPECT_EQ(f.format, 0);
  EXPECT_EQ(f.division, 480);
  ASSERT_EQ(f.tracks.size(), 1u);
  const Track expected{MidiEvent::set_tempo(0, 500000), MidiEvent::note_on(0, 0, 60, 64),
                       MidiEvent::note_off(480, 0, 60, 0), MidiEvent::end_of_track()};
  EXPECT_EQ(f.tracks[0], expected);
}

TEST(ParseSmf, SerializeReproducesHandEncodedBytes) {
  EXPECT_EQ(serialize_smf(parse_smf(kHandEncoded)), kHandEncoded);
}

TEST(ParseSmf, TruncatedHeader) {
  const std::vector<std::uint8_t> b(kHandEncoded.begin(), kHandEncoded.begin() + 10);
  EXPECT_EQ(code_of([&] { parse_smf(b); }), Errc::MalformedHeader);
}

TEST(ParseSmf, BadMagic) {
  auto b = kHandEncoded;
  b[0] = 'X';
  EXPECT_EQ(code_of([&] { parse_smf(b); }), Errc::MalformedHeader);
}

TEST(ParseSmf, TruncatedTrack) {
  const std::vector<std::uint8_t> b(kHandEncoded.begin(), kHandEncoded.end() - 3);
  EXPECT_EQ(code_of([&] { parse_smf(b); }), Errc::TruncatedChunk);
}

TEST(ParseSmf, RunningStatus) {
  const auto b = bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x00, 0x60,  //
                  'M', 'T', 'r', 'k', 0, 0, 0, 11,                          //
                  0x00, 0x90, 0x3C, 0x40,                                   //
                  0x60, 0x3C, 0x00,                                         // running status note-on vel 0
                  0x00, 0xFF, 0x2F, 0x00});
  const MidiFile f = parse_smf(b);
  ASSERT_EQ(f.tracks[0].size(), 3u);
  EXPECT_EQ(f.tracks[0][1], MidiEvent::note_on(0x60, 0, 60, 0));
  const auto notes = to_note_events(f).notes;
  ASSERT_EQ(notes.size(), 1u);
  EXPECT_DOUBLE_EQ(notes[0].offset, 0.5);
}

TEST(ParseSmf, UnknownMetaAndSysexPreserved) {
  MidiFile f{1, 96, {Track{{0, 0xFF, 0x7F, {1, 2, 3}}, {5, 0xF0, 0, {0x7E, 0xF7}}, MidiEvent::end_of_track(3)}}};
  EXPECT_EQ(parse_smf(serialize_smf(f)), f);
}

TEST(NoteEvents, VelocityZeroClosesNote) {
  MidiFile f{0, 480, {Track{MidiEvent::note_on(0, 0, 60, 90), MidiEvent::note_on(240, 0, 60, 0),
                            MidiEvent::end_of_track()}}};
  const auto ex = to_note_events(f);
  ASSERT_EQ(ex.notes.size(), 1u);
  EXPECT_EQ(ex.notes[0].pitch, 60);
  EXPECT_EQ(ex.notes[0].velocity, 90);
  EXPECT_DOUBLE_EQ(ex.notes[0].offset, 0.25);
  EXPECT_TRUE(ex.diagnostics.empty());
}

TEST(NoteEvents, QuarterNoteAtDefaultTempo) {
  MidiFile f{0, 480, {Track{MidiEvent::note_on(480, 0, 62, 50), MidiEvent::note_off(480, 0, 62),
                            MidiEvent::end_of_track()}}};
  const auto ex = to_note_events(f);
  ASSERT_EQ(ex.notes.size(), 1u);
  EXPECT_DOUBLE_EQ(ex.notes[0].onset, 0.5);
  EXPECT_DOUBLE_EQ(ex.notes[0].offset, 1.0);
  ASSERT_EQ(ex.tempo.entries().size(), 1u);
  EXPECT_EQ(ex.tempo.entries()[0], (TempoMap::Entry{0, 500000}));
}

TEST(NoteEvents, RestrikeClosesSoundingNote) {
  MidiFile f{0, 480, {Track{MidiEvent::note_on(0, 0, 64, 70), MidiEvent::note_on(480, 0, 64, 80),
                            MidiEvent::note_off(480, 0, 64), MidiEvent::end_of_track()}}};
  const auto ex = to_note_events(f);
  ASSERT_EQ(ex.notes.size(), 2u);
  EXPECT_EQ(ex.notes[0], (NoteEvent{64, 70, 0.0, 0.5, 0}));
  EXPECT_EQ(ex.notes[1], (NoteEvent{64, 80, 0.5, 1.0, 0}));
}

TEST(NoteEvents, TempoChangeMidNote) {
  // 960 ticks at 500000 us/qn = 1 s, then 480 ticks at 250000 us/qn = 0.25 s.
  MidiFile f{1, 480,
             {Track{MidiEvent::set_tempo(0, 500000), MidiEvent::set_tempo(960, 250000), MidiEvent::end_of_track()},
              Track{MidiEvent::note_on(480, 1, 50, 30), MidiEvent::note_off(960, 1, 50), MidiEvent::end_of_track()}}};
  const auto ex = to_note_events(f);
  ASSERT_EQ(ex.notes.size(), 1u);
  EXPECT_DOUBLE_EQ(ex.notes[0].onset, 0.5);
  EXPECT_DOUBLE_EQ(ex.notes[0].offset, 1.25);
  EXPECT_EQ(ex.notes[0].channel, 1);
}

TEST(NoteEvents, LastTempoAtSameTickWins) {
  const TempoMap t(480, {{0, 1000000}, {0, 250000}});
  EXPECT_DOUBLE_EQ(t.seconds(480), 0.25);
}

TEST(NoteEvents, Diagnostics) {
  MidiFile f{0, 480, {Track{MidiEvent::note_off(0, 0, 40), MidiEvent::note_on(0, 0, 41, 60),
                            MidiEvent::note_on(0, 0, 42, 60), MidiEvent::note_off(0, 0, 42),
                            MidiEvent::end_of_track(240)}}};
  const auto ex = to_note_events(f);
  ASSERT_EQ(ex.notes.size(), 1u);
  EXPECT_EQ(ex.notes[0].pitch, 41);
  EXPECT_DOUBLE_EQ(ex.notes[0].offset, 0.25);
  std::vector<NoteWarning> kinds;
  for (const auto& d : ex.diagnostics) kinds.push_back(d.kind);
  EXPECT_EQ(kinds, (std::vector<NoteWarning>{NoteWarning::UnmatchedNoteOff, NoteWarning::ZeroLengthNote,
                                             NoteWarning::DanglingNoteOn}));
}

TEST(NoteEvents, SortedWithPositiveDurations) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pitch(30, 90), vel(1, 127), gap(0, 300);
  std::vector<NoteEvent> notes;
  double t = 0.0;
  for (int i = 0; i < 300; ++i) {
    t += gap(rng) / 1000.0;
    notes.push_back({pitch(rng), vel(rng), t, t + 0.05 + gap(rng) / 500.0, 0});
  }
  const auto ex = to_note_events(notes_to_smf(notes));
  for (std::size_t i = 0; i < ex.notes.size(); ++i) {
    EXPECT_GT(ex.notes[i].offset, ex.notes[i].onset);
    if (i) EXPECT_LE(ex.notes[i - 1].onset, ex.notes[i].onset);
  }
}

TEST(Histograms, PitchCounts) {
  const std::vector<NoteEvent> notes{{60, 10, 0, 1, 0}, {60, 20, 1, 2, 0}, {62, 30, 2, 3, 0}};
  const auto h = histograms(notes);
  for (int p = 0; p < 128; ++p) EXPECT_EQ(h.pitch_counts[p], p == 60 ? 2u : p == 62 ? 1u : 0u);
}

TEST(Histograms, VelocityBins) {
  std::vector<NoteEvent> notes(5, NoteEvent{60, 64, 0, 1, 0});
  const auto h = histograms(notes, 8);
  ASSERT_EQ(h.velocity_bins.size(), 16u);
  for (std::size_t b = 0; b < 16; ++b) EXPECT_EQ(h.velocity_bins[b], b == 8 ? 5u : 0u);
}

TEST(Histograms, EmptyInput) {
  const auto h = histograms({});
  for (auto c : h.pitch_counts) EXPECT_EQ(c, 0u);
  for (auto c : h.velocity_bins) EXPECT_EQ(c, 0u);
}

TEST(Histograms, CountsSumToNotes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pitch(0, 127), vel(1, 127);
  std::vector<NoteEvent> notes;
  for (int i = 0; i < 777; ++i) notes.push_back({pitch(rng), vel(rng), 0, 1, 0});
  const auto h = histograms(notes, 4);
  std::uint64_t p = 0, v = 0;
  for (auto c : h.pitch_counts) p += c;
  for (auto c : h.velocity_bins) v += c;
  EXPECT_EQ(p, notes.size());
  EXPECT_EQ(v, notes.size());
  EXPECT_EQ(code_of([] { histograms({}, 7); }), Errc::InvalidArgument);
}

TEST(Histograms, JsonShape) {
  const auto j = to_json(histograms({}));
  EXPECT_EQ(j["pitch_counts"].size(), 128u);
  EXPECT_EQ(j["velocity_bins"].size(), 16u);
  EXPECT_EQ(j["bin_width"], 8);
}

TEST(Diff, IdenticalLists) {
  const std::vector<NoteEvent> notes{{60, 80, 0.0, 0.5, 0}, {64, 70, 0.1, 0.4, 0}, {60, 90, 1.0, 1.5, 0}};
  const auto d = diff_transcription(notes, notes);
  EXPECT_EQ(d.matched.size(), 3u);
  EXPECT_EQ(d.timing_violations, 0u);
  EXPECT_EQ(d.dynamic_violations, 0u);
  EXPECT_TRUE(d.unmatched_reference.empty());
  EXPECT_TRUE(d.unmatched_candidate.empty());
  EXPECT_TRUE(d.within_thresholds());
}

TEST(Diff, FortyMillisecondShift) {
  const std::vector<NoteEvent> ref{{60, 80, 1.0, 1.5, 0}, {62, 80, 2.0, 2.5, 0}};
  auto cand = ref;
  cand[1].onset += 0.040;
  const auto d = diff_transcription(cand, ref);
  EXPECT_EQ(d.timing_violations, 1u);
  EXPECT_TRUE(d.matched[1].timing_violation);
  EXPECT_FALSE(d.matched[0].timing_violation);
}

TEST(Diff, DynamicThreshold) {
  const std::vector<NoteEvent> ref{{60, 100, 0.0, 0.5, 0}};
  EXPECT_EQ(diff_transcription(std::vector<NoteEvent>{{60, 109, 0.0, 0.5, 0}}, ref).dynamic_violations, 0u);
  EXPECT_EQ(diff_transcription(std::vector<NoteEvent>{{60, 112, 0.0, 0.5, 0}}, ref).dynamic_violations, 1u);
  EXPECT_EQ(diff_transcription(std::vector<NoteEvent>{{60, 110, 0.0, 0.5, 0}}, ref).dynamic_violations, 0u);
}

TEST(Diff, TimingBoundary) {
  const std::vector<NoteEvent> ref{{60, 100, 1.0, 1.5, 0}};
  EXPECT_EQ(diff_transcription(std::vector<NoteEvent>{{60, 100, 1.030, 1.5, 0}}, ref).timing_violations, 0u);
  EXPECT_EQ(diff_transcription(std::vector<NoteEvent>{{60, 100, 0.970, 1.5, 0}}, ref).timing_violations, 0u);
  EXPECT_EQ(diff_transcription(std::vector<NoteEvent>{{60, 100, 1.030001, 1.5, 0}}, ref).timing_violations, 1u);
}

TEST(Diff, WrongPitchIsUnmatched) {
  const std::vector<NoteEvent> ref{{60, 100, 0.0, 0.5, 0}, {62, 100, 1.0, 1.5, 0}};
  const std::vector<NoteEvent> cand{{60, 100, 0.0, 0.5, 0}, {63, 100, 1.0, 1.5, 0}};
  const auto d = diff_transcription(cand, ref);
  EXPECT_EQ(d.pitch_mismatches, 1u);
  EXPECT_EQ(d.unmatched_reference, (std::vector<std::size_t>{1}));
  EXPECT_EQ(d.unmatched_candidate, (std::vector<std::size_t>{1}));
  EXPECT_FALSE(d.within_thresholds());
}

TEST(Diff, NearestOnsetWins) {
  // Two candidates of the same pitch; the closer one pairs with the reference.
  const std::vector<NoteEvent> ref{{60, 100, 1.000, 1.5, 0}};
  const std::vector<NoteEvent> cand{{60, 100, 0.900, 1.5, 0}, {60, 100, 1.010, 1.5, 0}};
  const auto d = diff_transcription(cand, ref);
  ASSERT_EQ(d.matched.size(), 1u);
  EXPECT_EQ(d.matched[0].candidate, 1u);
  EXPECT_EQ(d.unmatched_candidate, (std::vector<std::size_t>{0}));
}

TEST(Diff, EveryReferenceNoteInOneCategory) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pitch(58, 64), vel(40, 120);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<NoteEvent> ref, cand;
    for (int i = 0; i < 40; ++i) {
      const double t = 0.1 * i;
      ref.push_back({pitch(rng), vel(rng), t, t + 0.2, 0});
      if (i % 7 != 3) cand.push_back({i % 11 == 5 ? pitch(rng) : ref.back().pitch, vel(rng),
                                      std::max(0.0, t + jitter(rng)), t + 0.3, 0});
    }
    const auto d = diff_transcription(cand, ref);
    std::vector<int> seen(ref.size(), 0);
    for (const auto& m : d.matched) ++seen[m.reference];
    for (auto r : d.unmatched_reference) ++seen[r];
    for (int s : seen) ASSERT_EQ(s, 1);
    std::vector<int> cseen(cand.size(), 0);
    for (const auto& m : d.matched) ++cseen[m.candidate];
    for (auto c : d.unmatched_candidate) ++cseen[c];
    for (int s : cseen) ASSERT_EQ(s, 1);
  }
}

TEST(RoundTrip, GeneratedFormatOneFiles) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 50; ++i) {
    const auto g = oracles::random_midi(rng);
    const auto bytes = serialize_smf(g.file);
    const MidiFile parsed = parse_smf(bytes);
    EXPECT_EQ(parsed, g.file);
    EXPECT_EQ(serialize_smf(parsed), bytes);
    const auto ex = to_note_events(parsed);
    EXPECT_TRUE(ex.diagnostics.empty());
    ASSERT_EQ(ex.notes.size(), g.notes.size());
    for (std::size_t k = 0; k < g.notes.size(); ++k) {
      EXPECT_EQ(ex.notes[k].pitch, g.notes[k].pitch);
      EXPECT_EQ(ex.notes[k].velocity, g.notes[k].velocity);
      EXPECT_EQ(ex.notes[k].channel, g.notes[k].channel);
      EXPECT_NEAR(ex.notes[k].onset, g.notes[k].onset, 1e-9);
      EXPECT_NEAR(ex.notes[k].offset, g.notes[k].offset, 1e-9);
    }
  }
}
