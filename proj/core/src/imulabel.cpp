#include "symplan/imulabel.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "symplan/error.hpp"
#include "symplan/io.hpp"

namespace symplan {

namespace {

constexpr double kRad2Deg = 180.0 / std::numbers::pi;
// Sample and frame times come from different grids; compare with slack.
constexpr double kTimeSlack = 1e-9;

Quaternion normalized(Quaternion q) {
  const double n = q.norm();
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

std::array<long, 4> bins(const Quaternion& q, double res) {
  return {std::lround(q.w / res), std::lround(q.x / res), std::lround(q.y / res), std::lround(q.z / res)};
}

}  // namespace

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

double angle_between_deg(const Quaternion& a, const Quaternion& b) {
  const double dot = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z) / (a.norm() * b.norm());
  return 2.0 * std::acos(std::min(1.0, dot)) * kRad2Deg;
}

double yaw_deg(const Quaternion& q) {
  return std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z)) * kRad2Deg;
}

std::vector<Quaternion> fuse(std::span<const ImuSample> stream, double beta, Quaternion q0) {
  if (!(beta > 0.0 && beta <= 1.0)) throw Error("filter gain must lie in (0, 1]");
  std::vector<Quaternion> out;
  out.reserve(stream.size());
  if (stream.empty()) return out;
  Quaternion q = normalized(q0);
  out.push_back(q);
  for (std::size_t i = 1; i < stream.size(); ++i) {
    const auto& s = stream[i];
    const double dt = s.t - stream[i - 1].t;
    if (!(dt > 0.0))
      throw Error("IMU timestamps must increase strictly (sample " + std::to_string(i) + " at t=" +
                  std::to_string(s.t) + ")");
    const double gx = s.gyro.x(), gy = s.gyro.y(), gz = s.gyro.z();
    double dw = 0.5 * (-q.x * gx - q.y * gy - q.z * gz);
    double dx = 0.5 * (q.w * gx + q.y * gz - q.z * gy);
    double dy = 0.5 * (q.w * gy - q.x * gz + q.z * gx);
    double dz = 0.5 * (q.w * gz + q.x * gy - q.y * gx);

    const double an = s.accel.norm();
    if (an > 0.0) {
      const double ax = s.accel.x() / an, ay = s.accel.y() / an, az = s.accel.z() / an;
      const double f1 = 2.0 * (q.x * q.z - q.w * q.y) - ax;
      const double f2 = 2.0 * (q.w * q.x + q.y * q.z) - ay;
      const double f3 = 2.0 * (0.5 - q.x * q.x - q.y * q.y) - az;
      double sw = -2.0 * q.y * f1 + 2.0 * q.x * f2;
      double sx = 2.0 * q.z * f1 + 2.0 * q.w * f2 - 4.0 * q.x * f3;
      double sy = -2.0 * q.w * f1 + 2.0 * q.z * f2 - 4.0 * q.y * f3;
      double sz = 2.0 * q.x * f1 + 2.0 * q.y * f2;
      const double sn = std::sqrt(sw * sw + sx * sx + sy * sy + sz * sz);
      if (sn > 1e-12) {
        dw -= beta * sw / sn;
        dx -= beta * sx / sn;
        dy -= beta * sy / sn;
        dz -= beta * sz / sn;
      }
    }
    q = normalized({q.w + dw * dt, q.x + dx * dt, q.y + dy * dt, q.z + dz * dt});
    out.push_back(q);
  }
  return out;
}

double motion_magnitude(std::span<const ImuSample> samples, std::span<const Quaternion> orientation,
                        const MotionParams& params) {
  if (samples.size() < 2) throw Error("motion window needs at least two samples");
  if (orientation.size() != samples.size()) throw Error("motion window: samples and orientations differ in length");
  double dev = 0.0;
  for (const auto& s : samples) dev += std::abs(s.accel.norm() - params.gravity);
  dev /= static_cast<double>(samples.size());
  int steps = 0;
  auto prev = bins(orientation[0], params.q_res);
  for (std::size_t i = 1; i < orientation.size(); ++i) {
    const auto b = bins(orientation[i], params.q_res);
    steps += b != prev;
    prev = b;
  }
  return params.w_accel * dev + params.w_orient * steps;
}

MotionFlagStream motion_flags(std::span<const ImuSample> samples, std::span<const Quaternion> orientation,
                              std::span<const double> clock, double frame_period, const MotionParams& params) {
  if (orientation.size() != samples.size()) throw Error("samples and orientations differ in length");
  MotionFlagStream out;
  out.magnitude.reserve(clock.size());
  out.flag.reserve(clock.size());
  std::size_t lo = 0;
  for (const double t0 : clock) {
    while (lo < samples.size() && samples[lo].t < t0 - kTimeSlack) ++lo;
    std::size_t hi = lo;
    while (hi < samples.size() && samples[hi].t < t0 + frame_period - kTimeSlack) ++hi;
    if (hi - lo < 2) throw Error("IMU stream does not cover the frame at t=" + std::to_string(t0));
    const double m = motion_magnitude(samples.subspan(lo, hi - lo), orientation.subspan(lo, hi - lo), params);
    out.magnitude.push_back(m);
    out.flag.push_back(m > params.threshold);
  }
  return out;
}

SymbolSequence arbitrate_and_label(const std::map<SymbolId, MotionFlagStream>& streams, std::size_t frames,
                                   const Alphabet& alphabet) {
  for (const auto& [id, s] : streams) {
    if (!alphabet.contains(id)) throw Error("stream for unknown symbol id " + std::to_string(id));
    if (s.flag.size() != frames || s.magnitude.size() != frames)
      throw Error(std::string("stream '") + alphabet.glyph(id) + "' does not cover the frame clock");
  }
  SymbolSequence out(frames, alphabet.no_action());
  for (std::size_t f = 0; f < frames; ++f) {
    double best = -1.0;
    for (const auto& [id, s] : streams) {
      if (s.flag[f] && s.magnitude[f] > best) {
        best = s.magnitude[f];
        out[f] = id;
      }
    }
  }
  return out;
}

ImuStreams synth_imu(const Episode& episode, const SynthImuConfig& config, std::uint64_t seed) {
  if (episode.meta.task != TaskId::blocks) throw Error("synth_imu expects a blocks episode");
  const double ratio = config.rate / episode.meta.frame_rate;
  const auto per_frame = static_cast<int>(std::lround(ratio));
  if (per_frame < 2 || std::abs(ratio - per_frame) > 1e-9)
    throw Error("IMU rate must be an integer multiple (>= 2) of the frame rate");
  const auto labels = episode.labels();
  const double t0 = episode.frames.empty() ? 0.0 : episode.frames.front().t;
  const std::size_t n = labels.size() * static_cast<std::size_t>(per_frame);
  const double dt = 1.0 / config.rate;
  const double g = MotionParams{}.gravity;

  ImuStreams streams;
  for (SymbolId b = 0; b < blocks::kNumBlocks; ++b) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    std::normal_distribution<double> an(0.0, 1.0), gn(0.0, 1.0);
    auto& out = streams[b];
    out.reserve(n);
    std::size_t f = 0;
    while (f < labels.size()) {
      std::size_t end = f;
      while (end < labels.size() && labels[end] == labels[f]) ++end;
      const bool moving = labels[f] == b;
      const std::size_t first = f * per_frame, last = end * per_frame;
      const double rate = moving ? (std::numbers::pi / 2.0) / (static_cast<double>(last - first) * dt) : 0.0;
      for (std::size_t j = first; j < last; ++j) {
        ImuSample s;
        s.t = t0 + static_cast<double>(j) / config.rate;
        s.accel = {0.0, 0.0, g};
        if (moving) {
          const double tau = static_cast<double>(j - first) * dt;
          s.accel.z() += config.lift * std::sin(2.0 * std::numbers::pi * tau);
          s.gyro.z() = rate;
        }
        if (config.accel_noise > 0.0) s.accel += config.accel_noise * Eigen::Vector3d(an(rng), an(rng), an(rng));
        if (config.gyro_noise > 0.0) s.gyro += config.gyro_noise * Eigen::Vector3d(gn(rng), gn(rng), gn(rng));
        out.push_back(s);
      }
      f = end;
    }
  }
  return streams;
}

SymbolSequence label_streams(const ImuStreams& streams, std::span<const double> clock, double frame_period,
                             const Alphabet& alphabet, const LabelConfig& config) {
  std::map<SymbolId, MotionFlagStream> flags;
  for (const auto& [id, samples] : streams) {
    const auto q = fuse(samples, config.beta);
    flags[id] = motion_flags(samples, q, clock, frame_period, config.motion);
  }
  return arbitrate_and_label(flags, clock.size(), alphabet);
}

std::string imu_to_csv(std::span<const ImuSample> samples) {
  std::string out = "t,ax,ay,az,gx,gy,gz\n";
  char buf[256];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.9f,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.accel.x(), s.accel.y(),
                  s.accel.z(), s.gyro.x(), s.gyro.y(), s.gyro.z());
    out += buf;
  }
  return out;
}

std::vector<ImuSample> imu_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<ImuSample> out;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("t,", 0) == 0) continue;
    std::array<double, 7> v{};
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t k = 0; k < v.size(); ++k) {
      const auto r = std::from_chars(p, end, v[k]);
      if (r.ec != std::errc{}) throw IoError("IMU CSV line " + std::to_string(lineno) + ": expected 7 numbers");
      p = r.ptr;
      if (k + 1 < v.size()) {
        if (p == end || *p != ',') throw IoError("IMU CSV line " + std::to_string(lineno) + ": expected 7 columns");
        ++p;
      }
    }
    if (p != end) throw IoError("IMU CSV line " + std::to_string(lineno) + ": trailing data");
    out.push_back({v[0], {v[1], v[2], v[3]}, {v[4], v[5], v[6]}});
  }
  return out;
}

void write_imu_dir(const std::filesystem::path& dir, const ImuStreams& streams, std::span<const double> clock,
                   const Alphabet& alphabet) {
  std::filesystem::create_directories(dir);
  for (const auto& [id, samples] : streams)
    io::write_file_atomic(dir / (std::string(1, alphabet.glyph(id)) + ".csv"), imu_to_csv(samples));
  std::string c;
  char buf[64];
  for (double t : clock) {
    std::snprintf(buf, sizeof buf, "%.9f\n", t);
    c += buf;
  }
  io::write_file_atomic(dir / "clock.csv", c);
}

ImuRecording read_imu_dir(const std::filesystem::path& dir, const Alphabet& alphabet) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  ImuRecording rec;
  const auto clock_path = dir / "clock.csv";
  if (!std::filesystem::exists(clock_path)) throw IoError("missing frame clock: " + clock_path.string());
  std::istringstream in(io::read_file(clock_path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "t") continue;
    double t = 0;
    const auto r = std::from_chars(line.data(), line.data() + line.size(), t);
    if (r.ec != std::errc{}) throw IoError("bad frame time in " + clock_path.string() + ": " + line);
    rec.clock.push_back(t);
  }
  for (const auto& sym : alphabet.symbols()) {
    if (sym.id == alphabet.no_action()) continue;
    const auto p = dir / (std::string(1, sym.glyph) + ".csv");
    if (std::filesystem::exists(p)) rec.streams[sym.id] = imu_from_csv(io::read_file(p));
  }
  if (rec.streams.empty()) throw IoError("no IMU streams in " + dir.string());
  return rec;
}

Episode labels_to_episode(const SymbolSequence& labels, std::span<const double> clock, double frame_rate) {
  if (labels.size() != clock.size()) throw Error("labels and clock differ in length");
  Episode ep;
  ep.meta.task = TaskId::blocks;
  ep.meta.frame_rate = frame_rate;
  ep.meta.generator_version = "symplan-imulabel/1";
  ep.initial = BlocksState{};
  for (std::size_t i = 0; i < labels.size(); ++i) ep.frames.push_back({clock[i], Eigen::VectorXd(), labels[i]});
  return ep;
}

}  // namespace symplan
