#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>

#include "motionfc/core.hpp"

namespace motionfc {

/// Parameters of the synthetic motion generator. Ranges are [lo, hi] and
/// sampled uniformly per sequence (per joint for limb oscillation).
struct SynthSpec {
  std::size_t num_sequences = 64;
  std::size_t frames = 30;
  /// Consecutive sequences cut from the same video (shared id, contiguous).
  std::size_t sequences_per_video = 1;
  std::size_t joints = 13;
  std::size_t dims = 3;
  double frame_interval_ms = 64.3;
  /// Root speed in units per second (meters for 3D, pixels for 2D).
  std::pair<double, double> speed{0.3, 1.5};
  /// Magnitude of the smooth random acceleration, units per second^2.
  double acceleration = 0.3;
  std::pair<double, double> amplitude{0.05, 0.15};
  std::pair<double, double> frequency_hz{0.5, 1.5};
  /// Per joint and frame, probability that an occlusion run starts (2D).
  double occlusion_rate = 0.0;
  std::optional<std::pair<double, double>> image_bounds;
  std::uint64_t seed = 0;

  /// Scaled defaults for 2D pixel data.
  static SynthSpec defaults_for(std::size_t dims);
  void validate() const;
};

/// Neck-rooted 13-joint skeleton (or generic names for other J) with the
/// matching left/right pairs.
SkeletonSpec synthetic_skeleton(std::size_t joints,
                                std::optional<std::pair<double, double>> image_bounds);

/// Root: linear translation plus a smooth random acceleration. Other joints:
/// root + fixed offset + sinusoidal oscillation whose amplitude grows towards
/// the extremities. 2D adds occlusion runs and marks joints outside the image
/// invisible; invisible coordinates are written as 0.
Dataset generate_dataset(const SynthSpec& spec);

}  // namespace motionfc
