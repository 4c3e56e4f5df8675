#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "spsn/data.hpp"
#include "spsn/detail/byte_io.hpp"

namespace spsn {
namespace {

namespace fs = std::filesystem;

EventDataset tiny() {
  EventDataset ds;
  ds.channel_count = 4;
  ds.class_count = 2;
  ds.samples.push_back({{{100, 1}, {1500, 3}, {1500, 0}}, 0, 3000});
  ds.samples.push_back({{}, 1, 2000});
  ds.samples.push_back({{{0, 2}}, 1, 10});
  return ds;
}

fs::path temp_path(const std::string& name) {
  auto dir = fs::temp_directory_path() / "spsn_data_test";
  fs::create_directories(dir);
  return dir / name;
}

DataErrorKind decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_dataset(bytes);
  } catch (const DataError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return DataErrorKind::InvariantViolation;
}

TEST(Container, RoundTripThroughFile) {
  const auto ds = tiny();
  const auto path = temp_path("tiny.spke");
  save_dataset(ds, path);
  EXPECT_EQ(load_dataset(path), ds);
  auto test = load_dataset(path, Split::Test);
  EXPECT_EQ(test.split, Split::Test);
}

TEST(Container, EncodingIsDeterministic) {
  EXPECT_EQ(encode_dataset(tiny()), encode_dataset(tiny()));
}

TEST(Container, CorruptMagic) {
  auto bytes = encode_dataset(tiny());
  bytes[0] = 'X';
  EXPECT_EQ(decode_error(bytes), DataErrorKind::MagicMismatch);
}

TEST(Container, WrongVersion) {
  auto bytes = encode_dataset(tiny());
  bytes[4] = 9;
  EXPECT_EQ(decode_error(bytes), DataErrorKind::VersionMismatch);
}

TEST(Container, FlippedPayloadBitFailsChecksum) {
  auto bytes = encode_dataset(tiny());
  bytes[bytes.size() - 10] ^= 0x01;
  EXPECT_EQ(decode_error(bytes), DataErrorKind::ChecksumMismatch);
}

TEST(Container, DeclaredSampleMissingIsTruncation) {
  auto ds = tiny();
  auto bytes = encode_dataset(ds);
  ds.samples.pop_back();
  auto two = encode_dataset(ds);
  // Header claims three samples while the body holds two.
  std::copy(bytes.begin() + 6, bytes.begin() + 22, two.begin() + 6);
  two.resize(two.size() - 4);
  detail::ByteWriter footer;
  footer.u32(detail::crc32(two));
  two.insert(two.end(), footer.buffer().begin(), footer.buffer().end());
  EXPECT_EQ(decode_error(two), DataErrorKind::Truncated);
}

TEST(Container, CutFileIsTruncation) {
  auto bytes = encode_dataset(tiny());
  bytes.resize(bytes.size() / 2);
  EXPECT_EQ(decode_error(bytes), DataErrorKind::Truncated);
}

TEST(Container, InvariantsCheckedOnSave) {
  auto ds = tiny();
  ds.samples[0].events[0].channel = 9;
  EXPECT_THROW(encode_dataset(ds), DataError);
  ds = tiny();
  std::swap(ds.samples[0].events[0], ds.samples[0].events[1]);
  EXPECT_THROW(ds.validate(), DataError);
  ds = tiny();
  ds.samples[1].label = 2;
  EXPECT_THROW(ds.validate(), DataError);
}

TEST(Container, MissingFileIsIoError) {
  EXPECT_THROW(load_dataset("/nonexistent/none.spke"), IoError);
}

TEST(BinEvents, FloorBinning) {
  EventSample s{{{1500, 0}}, 0, 5000};
  const auto r = bin_events<double>(s, 5, 0.001, 1);
  EXPECT_EQ(r.to_vector(), (std::vector<double>{0, 1, 0, 0, 0}));
}

TEST(BinEvents, CollisionsClampToOne) {
  EventSample s{{{1100, 2}, {1900, 2}}, 0, 5000};
  const auto r = bin_events<double>(s, 5, 0.001, 3);
  EXPECT_EQ(r.sum(), 1.0);
  EXPECT_EQ(r[1 * 3 + 2], 1.0);
}

TEST(BinEvents, LateEventsDropped) {
  EventSample s{{{4999, 0}, {5000, 0}}, 0, 6000};
  EXPECT_EQ(bin_events<double>(s, 5, 0.001, 1).sum(), 1.0);
}

TEST(BinEvents, PropertyOnesEqualDistinctCells) {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    EventSample s;
    s.duration_us = 50000;
    const auto n = rng.uniform_index(300);
    for (std::uint64_t k = 0; k < n; ++k) {
      s.events.push_back({rng.uniform_index(50000), static_cast<std::uint32_t>(rng.uniform_index(8))});
    }
    std::sort(s.events.begin(), s.events.end(),
              [](const Event& a, const Event& b) { return a.time_us < b.time_us; });
    const auto r = bin_events<float>(s, 50, 0.001, 8);
    std::set<std::pair<std::uint64_t, std::uint32_t>> cells;
    for (const auto& e : s.events) cells.insert({e.time_us / 1000, e.channel});
    EXPECT_EQ(static_cast<std::size_t>(r.sum()), cells.size());
    EXPECT_LE(r.sum(), static_cast<float>(s.events.size()));
    EXPECT_EQ(cells.size() == s.events.size(), r.sum() == static_cast<float>(s.events.size()));
  }
}

TEST(Shift, ZeroRangeIsIdentity) {
  Rng rng(2);
  const auto r = testing::random_spikes<double>(rng, {20, 10}, 0.3);
  EXPECT_EQ(augment_shift(r, 0.0, rng), r);
}

TEST(Shift, ForcedShiftDropsAtBoundary) {
  Tensor<double> r({1, 10});
  r[9] = 1.0;
  r[3] = 1.0;
  const auto out = shift_channels(r, 2);
  EXPECT_EQ(out.sum(), 1.0);
  EXPECT_EQ(out[5], 1.0);
}

TEST(Shift, AugmentShiftRoundsFractionTimesChannels) {
  Tensor<double> r({1, 10});
  r[4] = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    const long expected = std::lround(a.uniform(-0.3, 0.3) * 10.0);
    EXPECT_EQ(augment_shift(r, 0.3, b), shift_channels(r, expected));
  }
}

TEST(Shift, PropertyNeverAddsSpikes) {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto r = testing::random_spikes<double>(rng, {15, 12}, 0.2);
    EXPECT_LE(augment_shift(r, 0.5, rng).sum(), r.sum());
  }
}

TEST(Scale, UnitFactorIsIdentity) {
  Rng rng(4);
  const auto r = testing::random_spikes<double>(rng, {30, 12}, 0.2);
  EXPECT_EQ(scale_raster(r, 1.0), r);
  EXPECT_EQ(augment_scale(r, 0.0, rng), r);
}

TEST(Scale, ZoomOutByTwoHalvesCoordinates) {
  Tensor<double> r({10, 10});
  r[4 * 10 + 6] = 1.0;
  const auto out = scale_raster(r, 2.0);
  EXPECT_EQ(out.sum(), 1.0);
  EXPECT_EQ(out[2 * 10 + 3], 1.0);
}

TEST(Scale, PropertyOutputStaysBinary) {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const auto r = testing::random_spikes<double>(rng, {25, 9}, 0.3);
    const auto out = augment_scale(r, 0.3, rng);
    for (double v : out.storage()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  }
}

TEST(MakeBatch, LayoutIsTimeBatchChannel) {
  const auto ds = tiny();
  const std::vector<std::size_t> idx{2, 0};
  const auto b = make_batch<double>(ds, idx, 3, 0.001, nullptr, nullptr);
  ASSERT_EQ(b.shape(), (Shape{3, 2, 4}));
  EXPECT_EQ(b.at(0, 0, 2), 1.0);
  EXPECT_EQ(b.at(0, 1, 1), 1.0);
  EXPECT_EQ(b.at(1, 1, 3), 1.0);
  EXPECT_EQ(b.at(1, 1, 0), 1.0);
  EXPECT_EQ(b.sum(), 4.0);
}

TEST(MakeBatch, AugmentationIsSeeded) {
  SynthConfig cfg;
  const auto ds = synth_generate(cfg, Rng(1));
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  AugmentConfig aug;
  const Rng r1(7), r2(7), r3(8);
  const auto a = make_batch<float>(ds, idx, 100, 0.001, &aug, &r1);
  EXPECT_EQ(a, make_batch<float>(ds, idx, 100, 0.001, &aug, &r2));
  EXPECT_NE(a, make_batch<float>(ds, idx, 100, 0.001, &aug, &r3));
}

SynthConfig clean_config() {
  SynthConfig c;
  c.jitter = 0;
  c.noise = 0.0;
  c.samples_per_class = 10;
  return c;
}

TEST(Synth, CleanSamplesEqualPrototypes) {
  const auto cfg = clean_config();
  const Rng rng(9);
  const auto protos = synth_prototypes(cfg, rng);
  const auto ds = synth_generate(cfg, rng);
  ASSERT_EQ(ds.samples.size(), cfg.classes * cfg.samples_per_class);
  for (const auto& s : ds.samples) {
    const auto r = bin_events<double>(s, cfg.steps, cfg.dt, cfg.channels);
    EXPECT_EQ(r, protos[s.label]);
  }
}

TEST(Synth, PrototypesAreDistinctAndNonEmpty) {
  SynthConfig cfg;
  cfg.classes = 30;
  cfg.steps = 4;
  cfg.channels = 3;
  cfg.density = 0.3;
  const auto protos = synth_prototypes(cfg, Rng(10));
  for (std::size_t a = 0; a < protos.size(); ++a) {
    EXPECT_GT(protos[a].sum(), 0.0);
    for (std::size_t b = a + 1; b < protos.size(); ++b) EXPECT_NE(protos[a], protos[b]);
  }
}

TEST(Synth, NearestPrototypeClassifiesCleanTestSplit) {
  const auto cfg = clean_config();
  const Rng rng(11);
  const auto protos = synth_prototypes(cfg, rng);
  const auto [train, test] = stratified_split(synth_generate(cfg, rng), 0.8, Rng(12));
  ASSERT_FALSE(test.samples.empty());
  for (const auto& s : test.samples) {
    const auto r = bin_events<double>(s, cfg.steps, cfg.dt, cfg.channels);
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < protos.size(); ++c) {
      double d = 0;
      for (std::size_t i = 0; i < r.size(); ++i) d += std::abs(r[i] - protos[c][i]);
      if (d < best_d) best_d = d, best = c;
    }
    EXPECT_EQ(best, s.label);
  }
}

TEST(Synth, NoisySamplesAreValidAndDeterministic) {
  SynthConfig cfg;
  const auto a = synth_generate(cfg, Rng(13));
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a, synth_generate(cfg, Rng(13)));
  EXPECT_NE(a, synth_generate(cfg, Rng(14)));
  EXPECT_EQ(encode_dataset(a), encode_dataset(synth_generate(cfg, Rng(13))));
}

TEST(Split, StratifiedCountsAndDisjointness) {
  SynthConfig cfg;
  cfg.samples_per_class = 63;
  const auto ds = synth_generate(cfg, Rng(15));
  const auto [train, test] = stratified_split(ds, 0.8, Rng(16));
  EXPECT_EQ(train.samples.size() + test.samples.size(), ds.samples.size());
  for (std::uint16_t c = 0; c < cfg.classes; ++c) {
    auto count = [c](const EventDataset& d) {
      return std::count_if(d.samples.begin(), d.samples.end(), [c](auto& s) { return s.label == c; });
    };
    EXPECT_EQ(count(train), 50);
    EXPECT_EQ(count(test), 13);
  }
  EXPECT_EQ(test.split, Split::Test);
  EXPECT_THROW(stratified_split(ds, 1.0, Rng(0)), ConfigError);
}

TEST(Shuffle, IsAPermutation) {
  std::vector<std::size_t> v(100);
  std::iota(v.begin(), v.end(), 0);
  Rng rng(17);
  shuffle_indices(v, rng);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(v, sorted);
}

}  // namespace
}  // namespace spsn
