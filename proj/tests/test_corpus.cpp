// Copyright 2026 The w2n Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "w2n/corpus/dataset.hpp"

namespace w2n {
namespace {

namespace fs = std::filesystem;

dsp::Waveform tone(double hz, std::size_t n, double rate = 16000, double amp = 0.5) {
  dsp::Waveform w;
  w.sample_rate = rate;
  for (std::size_t i = 0; i < n; ++i) {
    w.samples.push_back(amp * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / rate));
  }
  return w;
}

dsp::Waveform noise(std::size_t n, std::uint64_t seed, double rate = 16000) {
  dsp::Waveform w{std::vector<double>(n), rate};
  Rng rng(seed);
  for (auto& v : w.samples) v = rng.uniform(-0.2, 0.2);
  return w;
}

dsp::FeatureSequence frames_of(std::size_t T, std::size_t d, double offset) {
  dsp::FeatureSequence f;
  f.kind = d == 80 ? dsp::FeatureKind::kMfcc80 : dsp::FeatureKind::kSpectral24;
  f.frames = Tensor({T, d});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < d; ++j) f.frames[t * d + j] = offset + static_cast<double>(t) + 0.01 * j;
  return f;
}

std::size_t mfcc_frames(std::size_t n) { return 1 + (n - 400) / 160; }

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("w2n_corpus_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& s) {
  io::write_file(p, std::vector<std::uint8_t>(s.begin(), s.end()));
}

// ------------------------------------------------------------------ vocab / labels

TEST(Vocab, GrowAssignsDenseIds) {
  TriphoneVocab v;
  const auto ids = parse_labels("a-b+c\nb-c+d\na-b+c\nsil\nsil\nb-c+d\nx\nsil\ny\nx\n", v, true, "mem");
  EXPECT_EQ(ids, (std::vector<std::int32_t>{0, 1, 0, 2, 2, 1, 3, 2, 4, 3}));
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.token(2), "sil");
}

TEST(Vocab, UnknownTokenWithoutGrowNamesIt) {
  TriphoneVocab v;
  v.add("sil");
  try {
    parse_labels("sil\nk-ae+t\n", v, false, "lab");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("k-ae+t"), std::string::npos);
  }
  EXPECT_EQ(v.size(), 1u);
}

TEST(Vocab, SaveLoadRoundTrip) {
  TempDir dir("vocab");
  TriphoneVocab v;
  for (const char* t : {"sil", "a-b+c", "ü-ß+ø", "x"}) v.add(t);
  v.save(dir.path() / "vocab.txt");
  const TriphoneVocab back = TriphoneVocab::load(dir.path() / "vocab.txt");
  EXPECT_EQ(back, v);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(back.id(v.token(static_cast<std::int32_t>(i))), i);
  EXPECT_THROW(TriphoneVocab::from_text("a\na\n", "dup"), FormatError);
  EXPECT_THROW(TriphoneVocab::from_text("a\n\nb\n", "gap"), FormatError);
}

// ------------------------------------------------------------------ manifest

TEST(Manifest, ParsesFieldsAndResolvesPaths) {
  const auto m = parse_manifest(
      "# comment\n"
      "u1\tw/u1.wav\tn/u1.wav\tl/u1.lab\thello there\n"
      "\n"
      "u2\t/abs/w.wav\t/abs/n.wav\t-\n"
      "u3\tw3.wav\tn3.wav\r\n",
      "/data", "m");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].source, fs::path("/data/w/u1.wav"));
  EXPECT_EQ(*m[0].labels, fs::path("/data/l/u1.lab"));
  EXPECT_EQ(*m[0].transcript, "hello there");
  EXPECT_EQ(m[1].source, fs::path("/abs/w.wav"));
  EXPECT_FALSE(m[1].labels);
  EXPECT_EQ(m[2].target, fs::path("/data/n3.wav"));
}

TEST(Manifest, RejectsDuplicatesAndShortRows) {
  EXPECT_THROW(parse_manifest("a\tx\ty\na\tx\ty\n", "/", "m"), DataError);
  EXPECT_THROW(parse_manifest("a\tx\n", "/", "m"), DataError);
  EXPECT_THROW(parse_manifest("\tx\ty\n", "/", "m"), DataError);
}

TEST(Manifest, FormatRoundTrip) {
  const std::vector<UtterancePair> m{{"a", "/x/a.wav", "/y/a.wav", fs::path("/l/a.lab"), "hi"},
                                     {"b", "/x/b.wav", "/y/b.wav", std::nullopt, std::nullopt}};
  const auto back = parse_manifest(format_manifest(m), "/", "m");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].labels, m[0].labels);
  EXPECT_EQ(back[0].transcript, m[0].transcript);
  EXPECT_FALSE(back[1].labels);
}

// ------------------------------------------------------------------ align

TEST(Align, EqualDurationsNeedNoStretch) {
  const auto s = noise(16000, 1), t = tone(300, 16000);
  const AlignedPair a = align_pair(s, t);
  EXPECT_EQ(a.ratio, 1.0);
  EXPECT_EQ(a.src.samples, dsp::trim_silence(s).samples);
  EXPECT_EQ(a.tgt.samples, dsp::trim_silence(t).samples);
}

TEST(Align, ShorterTargetIsStretched) {
  const auto s = noise(16000, 2);
  const auto t = tone(300, 15680);  // 2% shorter
  const AlignedPair a = align_pair(s, t);
  EXPECT_NEAR(a.ratio, 16000.0 / 15680.0, 1e-12);
  EXPECT_FALSE(a.stretched_source);
  EXPECT_EQ(a.src.samples, s.samples);
  const auto diff = static_cast<long>(a.src.samples.size()) - static_cast<long>(a.tgt.samples.size());
  EXPECT_LE(std::abs(diff), 160);
  EXPECT_LE(std::abs(static_cast<long>(mfcc_frames(a.src.samples.size())) -
                     static_cast<long>(mfcc_frames(a.tgt.samples.size()))),
            1);
}

TEST(Align, ShorterSourceIsStretchedAndRatesUnified) {
  const auto s = tone(300, 44100 * 9 / 10, 44100);
  const auto t = noise(16000, 3);
  const AlignedPair a = align_pair(s, t);
  EXPECT_TRUE(a.stretched_source);
  EXPECT_EQ(a.src.sample_rate, 16000.0);
  EXPECT_NEAR(static_cast<double>(a.src.samples.size()), 16000.0, 160.0);
}

TEST(Align, ThreeTimesShorterIsRejected) {
  EXPECT_THROW(align_pair(noise(24000, 4), tone(300, 8000)), AlignmentError);
  EXPECT_THROW(align_pair(dsp::Waveform{std::vector<double>(8000, 0.0), 16000}, tone(300, 8000)), AlignmentError);
}

// ------------------------------------------------------------------ chunk

TEST(Chunk, FloorOfLengthOverK) {
  const auto c = chunk(frames_of(10, 80, 0), frames_of(10, 80, 100), nullptr, 3, "u");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[2].chunk_index, 2u);
  EXPECT_EQ(c[2].src[2 * 80], 8.0);  // last kept frame is 8; frame 9 dropped
  EXPECT_EQ(c[1].tgt[0], 103.0);
  EXPECT_EQ(c[0].utterance_id, "u");
}

TEST(Chunk, ExactlyOneChunkIsWholeSequence) {
  const auto src = frames_of(3, 80, 0), tgt = frames_of(3, 24, 5);
  const auto c = chunk(src, tgt, nullptr, 3, "u");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].src, src.frames);
  EXPECT_EQ(c[0].tgt, tgt.frames);
}

TEST(Chunk, LabelsFollowSourceFrames) {
  const std::vector<std::int32_t> labels{4, 4, 1, 0, 2, 2, 3, 1};
  const auto c = chunk(frames_of(8, 24, 0), frames_of(7, 24, 0), &labels, 3, "u");
  ASSERT_EQ(c.size(), 2u);  // min(8,7) = 7 frames
  EXPECT_EQ(c[0].labels, (std::vector<std::int32_t>{4, 4, 1}));
  EXPECT_EQ(c[1].labels, (std::vector<std::int32_t>{0, 2, 2}));
}

TEST(Chunk, MismatchErrorsNameUtterance) {
  try {
    chunk(frames_of(10, 80, 0), frames_of(8, 80, 0), nullptr, 3, "spk1_utt7");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("spk1_utt7"), std::string::npos);
  }
  const std::vector<std::int32_t> short_labels(5, 0);
  EXPECT_THROW(chunk(frames_of(6, 80, 0), frames_of(6, 80, 0), &short_labels, 3, "u"), DataError);
}

// ------------------------------------------------------------------ shards

TEST(Shard, RoundTripBitExact) {
  std::vector<TrainingExample> ex;
  for (std::uint32_t i = 0; i < 5; ++i) {
    ex.push_back({random_uniform({3, 24}, -1, 1, i), random_uniform({3, 24}, -1, 1, 50 + i), {1, 2, 3}, "utt", i});
  }
  const auto bytes = encode_shard(ex);
  const auto back = decode_shard(bytes, "s");
  ASSERT_EQ(back.size(), 5u);
  EXPECT_EQ(back[3].labels, ex[3].labels);
  EXPECT_EQ(back[3].src[7], static_cast<float>(ex[3].src[7]));
  EXPECT_EQ(encode_shard(back), bytes);
  auto bad = bytes;
  bad[60] ^= 0x10;
  EXPECT_THROW(decode_shard(bad, "s"), FormatError);
  ex[2].labels.clear();
  EXPECT_THROW(encode_shard(ex), DimensionError);
}

// ------------------------------------------------------------------ build_dataset

struct SyntheticCorpus {
  TempDir dir{"build"};
  std::vector<UtterancePair> manifest;
  std::vector<std::size_t> longer_len;  // per pair, sorted by id
};

// Five pairs with no silence; lengths chosen so the aligned frame count is
// known in closed form from the longer side.
SyntheticCorpus make_corpus(bool labels) {
  SyntheticCorpus c;
  const std::size_t lens[5][2] = {{16000, 16000}, {12000, 11800}, {9000, 9500}, {20000, 19000}, {4000, 4000}};
  TriphoneVocab scratch;
  for (int i = 0; i < 5; ++i) {
    const std::string id = "utt" + std::to_string(i);
    const fs::path w = c.dir.path() / (id + "_w.wav"), n = c.dir.path() / (id + "_n.wav");
    dsp::write_wav(w, noise(lens[i][0], 10 + static_cast<std::uint64_t>(i)));
    dsp::write_wav(n, tone(200.0 + 50 * i, lens[i][1]));
    UtterancePair p{id, w, n, std::nullopt, std::nullopt};
    const std::size_t L = std::max(lens[i][0], lens[i][1]);
    if (labels) {
      std::string text;
      for (std::size_t f = 0; f < mfcc_frames(L); ++f) text += "ph" + std::to_string((f / 4 + i) % 6) + "\n";
      const fs::path lab = c.dir.path() / (id + ".lab");
      write_text(lab, text);
      p.labels = lab;
    }
    c.manifest.push_back(p);
    c.longer_len.push_back(L);
  }
  return c;
}

TEST(BuildDataset, StatsMatchHandCount) {
  const auto c = make_corpus(true);
  const Dataset ds = build_dataset(c.manifest, {});
  std::size_t want = 0;
  for (std::size_t L : c.longer_len) want += mfcc_frames(L) / 3;
  EXPECT_EQ(ds.stats.pairs_total, 5u);
  EXPECT_EQ(ds.stats.pairs_kept, 5u);
  EXPECT_TRUE(ds.stats.rejected.empty());
  EXPECT_EQ(ds.stats.chunks, want);
  EXPECT_EQ(ds.examples.size(), want);
  EXPECT_EQ(ds.stats.vocab_size, 6u);
  EXPECT_EQ(ds.stats.d_in, 80u);
  for (const auto& ex : ds.examples) {
    EXPECT_EQ(ex.src.shape(), (Shape{3, 80}));
    EXPECT_EQ(ex.tgt.shape(), (Shape{3, 80}));
    ASSERT_EQ(ex.labels.size(), 3u);
    for (auto l : ex.labels) EXPECT_LT(static_cast<std::size_t>(l), ds.vocab.size());
  }
}

TEST(BuildDataset, CorruptWavIsSkippedAndLogged) {
  auto c = make_corpus(false);
  write_text(c.manifest[2].target, "RIFF....garbage");
  std::vector<std::string> logged;
  const Dataset ds = build_dataset(c.manifest, {}, std::nullopt, [&](const Rejection& r) { logged.push_back(r.id); });
  EXPECT_EQ(ds.stats.pairs_kept, 4u);
  ASSERT_EQ(ds.stats.rejected.size(), 1u);
  EXPECT_EQ(ds.stats.rejected[0].id, "utt2");
  EXPECT_EQ(logged, std::vector<std::string>{"utt2"});
  EXPECT_EQ(ds.stats.vocab_size, 0u);
}

TEST(BuildDataset, DirectionSwapSwapsRoles) {
  const auto c = make_corpus(true);
  DatasetConfig fwd, rev;
  rev.direction = Direction::kNaturalToWhisper;
  const Dataset a = build_dataset(c.manifest, fwd), b = build_dataset(c.manifest, rev);
  ASSERT_EQ(a.examples.size(), b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    EXPECT_EQ(a.examples[i].src, b.examples[i].tgt);
    EXPECT_EQ(a.examples[i].tgt, b.examples[i].src);
    EXPECT_EQ(a.examples[i].labels, b.examples[i].labels);
  }
}

TEST(BuildDataset, DeterministicShardsAndReload) {
  const auto c = make_corpus(true);
  TempDir out("shards");
  DatasetConfig cfg;
  cfg.shard_size = 40;
  const Dataset ds = build_dataset(c.manifest, cfg);
  save_dataset(ds, out.path() / "a");
  save_dataset(build_dataset(c.manifest, cfg), out.path() / "b");
  std::size_t shards = 0;
  for (const auto& e : fs::directory_iterator(out.path() / "a")) {
    EXPECT_EQ(io::read_file(e.path()), io::read_file(out.path() / "b" / e.path().filename())) << e.path();
    shards += e.path().extension() == ".wfea";
  }
  EXPECT_EQ(shards, (ds.examples.size() + 39) / 40);
  const Dataset back = load_dataset(out.path() / "a");
  EXPECT_EQ(back.examples.size(), ds.examples.size());
  EXPECT_EQ(back.vocab, ds.vocab);
  EXPECT_EQ(back.stats.chunks, ds.stats.chunks);
  EXPECT_EQ(back.examples[7].labels, ds.examples[7].labels);
}

TEST(BuildDataset, FixedVocabRejectsUnknownTriphones) {
  auto c = make_corpus(true);
  TriphoneVocab v;
  for (int i = 0; i < 6; ++i) v.add("ph" + std::to_string(i));
  std::string text;
  for (std::size_t f = 0; f + 1 < mfcc_frames(c.longer_len[3]); ++f) text += "ph1\n";
  write_text(*c.manifest[3].labels, text + "k-ae+t\n");
  const Dataset ds = build_dataset(c.manifest, {}, v);
  EXPECT_EQ(ds.vocab, v);
  EXPECT_EQ(ds.stats.pairs_kept, 4u);
  ASSERT_EQ(ds.stats.rejected.size(), 1u);
  EXPECT_EQ(ds.stats.rejected[0].id, "utt3");
  EXPECT_NE(ds.stats.rejected[0].reason.find("k-ae+t"), std::string::npos);
}

TEST(BuildDataset, IngestsFeatureFiles) {
  TempDir dir("ingest");
  std::vector<UtterancePair> m;
  for (int i = 0; i < 3; ++i) {
    const std::string id = "v" + std::to_string(i);
    dsp::write_features(dir.path() / (id + "_w.wfea"), frames_of(10 + i, 24, 0));
    dsp::write_features(dir.path() / (id + "_n.wfea"), frames_of(10 + i + (i == 1), 24, 3));
    m.push_back({id, dir.path() / (id + "_w.wfea"), dir.path() / (id + "_n.wfea"), std::nullopt, std::nullopt});
  }
  dsp::write_features(dir.path() / "bad_n.wfea", frames_of(20, 24, 0));
  m.push_back({"bad", dir.path() / "v0_w.wfea", dir.path() / "bad_n.wfea", std::nullopt, std::nullopt});
  DatasetConfig cfg;
  cfg.kind = dsp::FeatureKind::kSpectral24;
  const Dataset ds = build_dataset(m, cfg);
  EXPECT_EQ(ds.stats.chunks, 3u + 3u + 4u);
  EXPECT_EQ(ds.stats.d_in, 24u);
  ASSERT_EQ(ds.stats.rejected.size(), 1u);
  EXPECT_EQ(ds.stats.rejected[0].id, "bad");
  cfg.kind = dsp::FeatureKind::kAperiodic513;
  EXPECT_THROW(build_dataset(m, cfg), DataError);
}

TEST(BuildDataset, NothingUsableIsAnError) {
  auto c = make_corpus(false);
  for (auto& p : c.manifest) p.source = c.dir.path() / "missing.wav";
  EXPECT_THROW(build_dataset(c.manifest, {}), DataError);
}

}  // namespace
}  // namespace w2n
