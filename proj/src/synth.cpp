#include "motionfc/synth.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace motionfc {

namespace {

struct JointTemplate {
  const char* name;
  double lateral, vertical;
  double reach;  // oscillation amplitude multiplier
  double side;   // +1 left, -1 right, 0 center (sets oscillation phase)
};

// Neck-rooted body in meters: x lateral, y up.
constexpr std::array<JointTemplate, 13> kBody{{
    {"neck", 0.0, 0.0, 0.0, 0.0},
    {"left_shoulder", 0.18, -0.05, 0.2, 1.0},
    {"right_shoulder", -0.18, -0.05, 0.2, -1.0},
    {"left_elbow", 0.25, -0.32, 0.6, 1.0},
    {"right_elbow", -0.25, -0.32, 0.6, -1.0},
    {"left_wrist", 0.28, -0.58, 1.0, 1.0},
    {"right_wrist", -0.28, -0.58, 1.0, -1.0},
    {"left_hip", 0.10, -0.55, 0.2, -1.0},
    {"right_hip", -0.10, -0.55, 0.2, 1.0},
    {"left_knee", 0.11, -0.98, 0.6, -1.0},
    {"right_knee", -0.11, -0.98, 0.6, 1.0},
    {"left_ankle", 0.12, -1.40, 1.0, -1.0},
    {"right_ankle", -0.12, -1.40, 1.0, 1.0},
}};

constexpr double kPixelsPerMeter = 150.0;

}  // namespace

SynthSpec SynthSpec::defaults_for(std::size_t dims) {
  SynthSpec s;
  s.dims = dims;
  if (dims == 2) {
    s.frame_interval_ms = 40.0;
    s.speed = {20.0, 120.0};
    s.acceleration = 20.0;
    s.amplitude = {5.0, 20.0};
    s.occlusion_rate = 0.02;
    s.image_bounds = std::make_pair(1280.0, 720.0);
  }
  return s;
}

void SynthSpec::validate() const {
  if (num_sequences < 1 || frames < 1 || joints < 1 || sequences_per_video < 1) {
    throw ValidationError("synthetic sizes must be positive");
  }
  if (dims != 2 && dims != 3) throw ValidationError("synthetic dims must be 2 or 3");
  if (!(frame_interval_ms > 0.0)) throw ValidationError("frame_interval_ms must be positive");
  if (!(occlusion_rate >= 0.0 && occlusion_rate < 1.0)) {
    throw ValidationError("occlusion_rate must be in [0, 1)");
  }
  if (dims == 3 && occlusion_rate > 0.0) {
    throw ValidationError("3D synthetic data has no occlusion");
  }
  if (speed.first > speed.second || amplitude.first > amplitude.second ||
      frequency_hz.first > frequency_hz.second) {
    throw ValidationError("synthetic ranges must satisfy lo <= hi");
  }
  if (dims == 2 && !image_bounds) throw ValidationError("2D synthetic data needs image_bounds");
}

SkeletonSpec synthetic_skeleton(std::size_t joints,
                                std::optional<std::pair<double, double>> image_bounds) {
  SkeletonSpec s;
  s.image_bounds = image_bounds;
  s.neck_index = 0;
  if (joints == kBody.size()) {
    for (const auto& j : kBody) s.joint_names.emplace_back(j.name);
    for (std::size_t i = 1; i + 1 < kBody.size(); i += 2) s.left_right_swap.emplace_back(i, i + 1);
  } else {
    for (std::size_t i = 0; i < joints; ++i) s.joint_names.push_back("joint" + std::to_string(i));
  }
  return s;
}

Dataset generate_dataset(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  Dataset ds;
  ds.dims = spec.dims;
  ds.frame_interval_ms = spec.frame_interval_ms;
  ds.skeleton = synthetic_skeleton(spec.joints, spec.image_bounds);

  const bool pixels = spec.dims == 2;
  const double unit = pixels ? kPixelsPerMeter : 1.0;
  const double dt = spec.frame_interval_ms / 1000.0;

  // Body template, in the current unit.
  struct Joint {
    double lateral, vertical, reach, side;
  };
  std::vector<Joint> body;
  if (spec.joints == kBody.size()) {
    for (const auto& j : kBody) body.push_back({j.lateral * unit, j.vertical * unit, j.reach, j.side});
  } else {
    for (std::size_t i = 0; i < spec.joints; ++i) {
      body.push_back({uniform(-0.3, 0.3) * unit, uniform(-1.4, 0.0) * unit,
                      i == 0 ? 0.0 : uniform(0.2, 1.0), i % 2 == 0 ? 1.0 : -1.0});
    }
  }

  const std::size_t videos =
      (spec.num_sequences + spec.sequences_per_video - 1) / spec.sequences_per_video;
  std::size_t emitted = 0;
  for (std::size_t v = 0; v < videos && emitted < spec.num_sequences; ++v) {
    const std::size_t chunks = std::min(spec.sequences_per_video, spec.num_sequences - emitted);
    const std::size_t total = chunks * spec.frames;

    // Root state.
    const double heading = uniform(0.0, 2.0 * std::numbers::pi);
    const double speed = uniform(spec.speed.first, spec.speed.second);
    double px, py, pz = 0.0;
    if (pixels) {
      px = uniform(0.25, 0.75) * spec.image_bounds->first;
      py = uniform(0.15, 0.35) * spec.image_bounds->second;
    } else {
      px = uniform(-2.0, 2.0);
      py = uniform(1.4, 1.6);
      pz = uniform(-2.0, 2.0);
    }
    double vx = speed * std::cos(heading);
    double vy = pixels ? speed * std::sin(heading) * 0.3 : 0.0;
    double vz = pixels ? 0.0 : speed * std::sin(heading);
    const double acc_freq = uniform(0.1, 0.4);
    const double acc_phase_x = uniform(0.0, 2.0 * std::numbers::pi);
    const double acc_phase_z = uniform(0.0, 2.0 * std::numbers::pi);
    const double gait_freq = uniform(spec.frequency_hz.first, spec.frequency_hz.second);
    const double gait_phase = uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> amps(body.size());
    for (std::size_t j = 0; j < body.size(); ++j)
      amps[j] = uniform(spec.amplitude.first, spec.amplitude.second) * body[j].reach;

    PoseSequence video(total, spec.joints, spec.dims, spec.frame_interval_ms);
    for (std::size_t f = 0; f < total; ++f) {
      const double t = static_cast<double>(f) * dt;
      // Facing direction follows the current velocity in the ground plane.
      const double face = pixels ? 0.0 : std::atan2(vz, vx);
      const double cf = std::cos(face), sf = std::sin(face);
      for (std::size_t j = 0; j < body.size(); ++j) {
        const double swing =
            amps[j] * std::sin(2.0 * std::numbers::pi * gait_freq * t + gait_phase +
                               (body[j].side < 0 ? std::numbers::pi : 0.0));
        if (pixels) {
          video.at(f, j, 0) = px + body[j].lateral + swing;
          video.at(f, j, 1) = py - body[j].vertical + 0.3 * swing;
        } else {
          // Lateral offset is perpendicular to the facing direction; the
          // swing moves along it, with a small vertical component.
          video.at(f, j, 0) = px - sf * body[j].lateral + cf * swing;
          video.at(f, j, 1) = py + body[j].vertical + 0.2 * std::abs(swing);
          video.at(f, j, 2) = pz + cf * body[j].lateral + sf * swing;
        }
      }
      const double ax = spec.acceleration * std::sin(2.0 * std::numbers::pi * acc_freq * t + acc_phase_x);
      const double az = spec.acceleration * std::sin(2.0 * std::numbers::pi * acc_freq * t + acc_phase_z);
      vx += ax * dt;
      if (pixels) vy += 0.3 * az * dt; else vz += az * dt;
      px += vx * dt;
      py += vy * dt;
      pz += vz * dt;
    }

    if (pixels) {
      std::bernoulli_distribution starts(spec.occlusion_rate);
      std::uniform_int_distribution<std::size_t> run_length(1, 5);
      for (std::size_t j = 0; j < spec.joints; ++j) {
        for (std::size_t f = 0; f < total; ++f) {
          if (!starts(rng)) continue;
          const std::size_t len = run_length(rng);
          for (std::size_t k = f; k < std::min(total, f + len); ++k) video.visibility(k, j) = 0;
          f += len;
        }
      }
      const auto [w, h] = *spec.image_bounds;
      for (std::size_t f = 0; f < total; ++f)
        for (std::size_t j = 0; j < spec.joints; ++j) {
          const double x = video.at(f, j, 0), y = video.at(f, j, 1);
          if (x < 0.0 || x >= w || y < 0.0 || y >= h) video.visibility(f, j) = 0;
          if (!video.visible(f, j)) video.position(f, j).setZero();
        }
    }

    const std::string vid = "video" + std::to_string(v);
    for (std::size_t c = 0; c < chunks; ++c) {
      PoseSequence seq = video.slice(c * spec.frames, spec.frames);
      seq.video_id = vid;
      seq.sequence_id = vid + "_seq" + std::to_string(c);
      ds.sequences.push_back(std::move(seq));
      ++emitted;
    }
  }
  ds.validate();
  return ds;
}

}  // namespace motionfc
