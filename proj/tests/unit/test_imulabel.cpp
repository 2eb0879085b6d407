#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "symplan/episode_io.hpp"
#include "symplan/error.hpp"
#include "symplan/imulabel.hpp"
#include "symplan/metrics.hpp"
#include "test_util.hpp"

using namespace symplan;

namespace {

std::vector<ImuSample> constant(double seconds, double rate, Eigen::Vector3d gyro, double gyro_noise = 0.0,
                                std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ImuSample> out;
  const int count = static_cast<int>(seconds * rate);
  for (int i = 0; i <= count; ++i) {
    ImuSample s{i / rate, {0.0, 0.0, 9.81}, gyro};
    if (gyro_noise > 0) s.gyro += gyro_noise * Eigen::Vector3d(n(rng), n(rng), n(rng));
    out.push_back(s);
  }
  return out;
}

std::vector<double> clock_of(const Episode& ep) {
  std::vector<double> c;
  for (const auto& f : ep.frames) c.push_back(f.t);
  return c;
}

}  // namespace

TEST(Fuse, StaticStaysAtIdentity) {
  const auto q = fuse(constant(10.0, 100.0, Eigen::Vector3d::Zero()));
  EXPECT_LT(angle_between_deg(q.back(), {}), 0.5);
}

TEST(Fuse, ConstantYawRate) {
  const auto q = fuse(constant(1.0, 100.0, {0, 0, std::numbers::pi / 2}));
  EXPECT_NEAR(yaw_deg(q.back()), 90.0, 2.0);
}

TEST(Fuse, NoisyStaticDriftIsBounded) {
  const auto q = fuse(constant(30.0, 100.0, Eigen::Vector3d::Zero(), 0.01, 4));
  EXPECT_LT(angle_between_deg(q.back(), {}), 5.0);
}

TEST(Fuse, UnitNormAndErrors) {
  const auto s = constant(2.0, 100.0, {0.3, -0.2, 0.5}, 0.05, 1);
  for (const auto& q : fuse(s)) EXPECT_NEAR(q.norm(), 1.0, 1e-6);
  auto bad = s;
  bad[5].t = bad[4].t;
  EXPECT_THROW(fuse(bad), Error);
  EXPECT_THROW(fuse(s, 0.0), Error);
  EXPECT_THROW(fuse(s, 1.5), Error);
}

TEST(Motion, StaticWindowIsZero) {
  const auto s = constant(0.1, 100.0, Eigen::Vector3d::Zero());
  const auto q = fuse(s);
  EXPECT_DOUBLE_EQ(motion_magnitude(s, q), 0.0);
  EXPECT_THROW(motion_magnitude(std::span(s).first(1), std::span(q).first(1)), Error);
}

TEST(Motion, RotationAndTranslationExceedThreshold) {
  const MotionParams p;
  const auto rot = constant(1.0, 100.0, {0, 0, std::numbers::pi / 2});
  EXPECT_GT(motion_magnitude(rot, fuse(rot)), p.threshold);
  auto push = constant(0.1, 100.0, Eigen::Vector3d::Zero());
  for (auto& s : push) s.accel.x() = 3.0;
  EXPECT_GT(motion_magnitude(push, std::vector<Quaternion>(push.size())), p.threshold);
}

TEST(Arbitrate, LargestFlaggedWins) {
  const auto& a = blocks_alphabet();
  std::map<SymbolId, MotionFlagStream> s;
  s[blocks::kBlue] = {{0.5, 0.1, 0.3}, {true, false, true}};
  s[blocks::kRed] = {{0.2, 0.1, 0.3}, {true, false, true}};
  EXPECT_EQ(a.render(arbitrate_and_label(s, 3, a)), "B_B");
  EXPECT_THROW(arbitrate_and_label(s, 4, a), Error);
}

TEST(RoundTrip, ZeroNoiseReproducesCompactLabels) {
  SynthImuConfig clean;
  clean.accel_noise = clean.gyro_noise = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ep = sample_demonstration(TaskId::blocks, seed);
    const auto labels = label_streams(synth_imu(ep, clean, seed), clock_of(ep), 0.1, blocks_alphabet());
    EXPECT_EQ(compact_encode(labels), compact_encode(ep.labels())) << "seed " << seed;
  }
}

TEST(RoundTrip, DefaultNoiseSymbolError) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ep = sample_demonstration(TaskId::blocks, 100 + seed);
    const auto labels = label_streams(synth_imu(ep, {}, seed), clock_of(ep), 0.1, blocks_alphabet());
    EXPECT_LT(symbol_error(labels, ep.labels()), 0.05);
  }
}

TEST(Synth, UnmovedBlockNeverFlags) {
  const auto ep = sample_demonstration(TaskId::blocks, 3);
  SymbolSequence labels = ep.labels();
  std::replace(labels.begin(), labels.end(), blocks::kPink, blocks::kNoAction);
  Episode edited = ep;
  for (std::size_t i = 0; i < labels.size(); ++i) edited.frames[i].label = labels[i];
  SynthImuConfig clean;
  clean.accel_noise = clean.gyro_noise = 0.0;
  const auto streams = synth_imu(edited, clean, 1);
  const auto& pink = streams.at(blocks::kPink);
  const auto flags = motion_flags(pink, fuse(pink), clock_of(ep), 0.1);
  EXPECT_TRUE(std::none_of(flags.flag.begin(), flags.flag.end(), [](bool f) { return f; }));
  EXPECT_THROW(synth_imu(sample_demonstration(TaskId::c, 1)), Error);
}

TEST(Synth, UncoveredClockThrows) {
  const auto s = constant(1.0, 100.0, Eigen::Vector3d::Zero());
  const std::vector<double> clock{0.0, 5.0};
  EXPECT_THROW(motion_flags(s, fuse(s), clock, 0.1), Error);
}

TEST(Files, CsvAndDirectoryRoundTrip) {
  test_util::TempDir dir;
  const auto ep = sample_demonstration(TaskId::blocks, 2);
  const auto streams = synth_imu(ep, {}, 2);
  const auto clock = clock_of(ep);
  write_imu_dir(dir.path() / "imu", streams, clock, blocks_alphabet());
  const auto rec = read_imu_dir(dir.path() / "imu", blocks_alphabet());
  EXPECT_EQ(rec.clock.size(), clock.size());
  ASSERT_EQ(rec.streams.size(), streams.size());
  const auto direct = label_streams(streams, clock, 0.1, blocks_alphabet());
  EXPECT_EQ(label_streams(rec.streams, rec.clock, 0.1, blocks_alphabet()), direct);
  const auto ep2 = episode_from_jsonl(episode_to_jsonl(labels_to_episode(direct, clock, 10.0)));
  EXPECT_EQ(ep2.labels(), direct);
  EXPECT_THROW(imu_from_csv("t,ax\n1,2\n"), IoError);
  EXPECT_THROW(read_imu_dir(dir.path() / "nope", blocks_alphabet()), IoError);
}
