#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "symplan/envsim.hpp"
#include "symplan/symbols.hpp"

namespace symplan {

struct ImuSample {
  double t = 0.0;                           // seconds
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // m/s^2
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   // rad/s
};

struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  double norm() const;
};

// Rotation angle between two orientations, degrees.
double angle_between_deg(const Quaternion& a, const Quaternion& b);
double yaw_deg(const Quaternion& q);

// Madgwick IMU filter (no magnetometer). One quaternion per sample; the first
// is q0. Throws Error on non-increasing timestamps or beta outside (0, 1].
std::vector<Quaternion> fuse(std::span<const ImuSample> stream, double beta = 0.1, Quaternion q0 = {});

struct MotionParams {
  double w_accel = 1.0;
  double w_orient = 1.0;
  double q_res = 0.05;
  double threshold = 0.2;
  double gravity = 9.81;
};

// w_accel * mean | |a| - g | + w_orient * number of changes of the binned
// quaternion inside the window. Throws Error for fewer than two samples.
double motion_magnitude(std::span<const ImuSample> samples, std::span<const Quaternion> orientation,
                        const MotionParams& params = {});

struct MotionFlagStream {
  std::vector<double> magnitude;
  std::vector<bool> flag;
};

// Frame f covers [clock[f], clock[f] + frame_period). Throws Error when a
// frame holds fewer than two samples.
MotionFlagStream motion_flags(std::span<const ImuSample> samples, std::span<const Quaternion> orientation,
                              std::span<const double> clock, double frame_period, const MotionParams& params = {});

// Per frame, the flagged object with the largest magnitude (lowest id on
// ties), or `_`. Throws Error when a stream does not span `frames` frames.
SymbolSequence arbitrate_and_label(const std::map<SymbolId, MotionFlagStream>& streams, std::size_t frames,
                                   const Alphabet& alphabet);

using ImuStreams = std::map<SymbolId, std::vector<ImuSample>>;

struct SynthImuConfig {
  double rate = 100.0;  // Hz, an integer multiple of the frame rate
  double accel_noise = 0.02;
  double gyro_noise = 0.005;
  double lift = 3.0;  // m/s^2 amplitude of the vertical bob while carried
};

// One stream per block. While a block's symbol labels the frames it turns 90
// degrees about z and bobs vertically; otherwise it rests.
ImuStreams synth_imu(const Episode& episode, const SynthImuConfig& config = {}, std::uint64_t seed = 0);

struct LabelConfig {
  double beta = 0.1;
  MotionParams motion;
};

SymbolSequence label_streams(const ImuStreams& streams, std::span<const double> clock, double frame_period,
                             const Alphabet& alphabet, const LabelConfig& config = {});

// CSV with header t,ax,ay,az,gx,gy,gz.
std::string imu_to_csv(std::span<const ImuSample> samples);
std::vector<ImuSample> imu_from_csv(const std::string& text);

// A directory of <glyph>.csv streams plus clock.csv (one frame time per line).
void write_imu_dir(const std::filesystem::path& dir, const ImuStreams& streams, std::span<const double> clock,
                   const Alphabet& alphabet);
struct ImuRecording {
  ImuStreams streams;
  std::vector<double> clock;
};
ImuRecording read_imu_dir(const std::filesystem::path& dir, const Alphabet& alphabet);

// Labels packed as an episode with empty observations, for the episode reader.
Episode labels_to_episode(const SymbolSequence& labels, std::span<const double> clock, double frame_rate);

}  // namespace symplan
