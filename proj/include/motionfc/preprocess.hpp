#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "motionfc/core.hpp"

namespace motionfc {

struct PreprocessConfig {
  /// Coordinates are multiplied by this after centering.
  double scale = 1.0;
  bool interpolate_invisible = true;
  bool boundary_filter = true;

  /// 100 for 3D data in meters, 1 for 2D pixels.
  static PreprocessConfig defaults_for(std::size_t dims);
  void validate() const;
};

struct WindowSpec {
  std::size_t input_frames = 16;
  std::size_t output_frames = 14;
  std::size_t stride = 1;
  /// Draw start frames uniformly at random (one draw per enumerated start)
  /// instead of enumerating them.
  bool random_start = false;

  std::size_t total() const { return input_frames + output_frames; }
  void validate() const;
};

struct CenteredSequence {
  PoseSequence sequence;
  Vector center_offset;
  double scale = 1.0;
  /// Neck never visible: the centroid of visible joints was used instead.
  bool flagged = false;
};

/// Subtracts the neck position of the first frame where the neck is visible
/// and multiplies by `cfg.scale` (100 turns meters into centimeters).
CenteredSequence center_and_scale(const PoseSequence& sequence, const SkeletonSpec& skeleton,
                                  const PreprocessConfig& cfg);
/// Applies a known offset/scale: (x - offset) * scale.
PoseSequence apply_center(const PoseSequence& sequence, const Vector& offset, double scale);
/// Inverse of apply_center: x / scale + offset.
PoseSequence undo_center(const PoseSequence& sequence, const Vector& offset, double scale);

struct InterpolatedSequence {
  PoseSequence sequence;
  /// Joints with no visible frame; their coordinates are untouched.
  std::vector<std::size_t> never_visible;
};

/// Linearly fills interior invisible runs per joint from the visible frames
/// around them; leading and trailing runs repeat the nearest visible frame.
/// Visibility flags are unchanged.
InterpolatedSequence interpolate_invisible(const PoseSequence& sequence);

/// tau x J visibility: every forecast frame repeats `last_visibility`.
std::vector<std::uint8_t> pad_visibility(const std::vector<std::uint8_t>& last_visibility,
                                         std::size_t tau);
/// Overwrites `forecast` visibility with the last input frame's flags.
void apply_visibility_padding(PoseSequence& forecast, const PoseSequence& input);

/// Marks 2D joints outside [0, w) x [0, h) invisible. Coordinates are kept.
PoseSequence boundary_filter(const PoseSequence& prediction, std::pair<double, double> bounds);

/// Concatenates sequences that share a video id (in file order) and cuts
/// windows of input_frames + output_frames frames. Groups shorter than one
/// window are skipped. Samples are in original coordinates (offset 0, scale 1).
std::vector<MotionSample> extend_and_window(const Dataset& dataset, const WindowSpec& spec,
                                            std::mt19937_64& rng);
/// Windows of each sequence on its own (no concatenation), enumerated with
/// the spec's stride. Used for evaluation so windows map back to a sequence.
std::vector<MotionSample> evaluation_windows(const Dataset& dataset, const WindowSpec& spec);

/// Reverses input || target in time and splits it again at the same point.
MotionSample reverse_augment(const MotionSample& sample);
/// Negates coordinate `axis` (of an already centered sample) and swaps the
/// skeleton's left/right joint pairs.
MotionSample flip_augment(const MotionSample& sample, const SkeletonSpec& skeleton,
                          std::size_t axis);

/// Centers and scales a raw sample using its input's first frame.
MotionSample normalize_sample(const MotionSample& sample, const SkeletonSpec& skeleton,
                              const PreprocessConfig& cfg);
/// Maps a normalized sequence back to original units.
PoseSequence denormalize(const PoseSequence& sequence, const MotionSample& sample);

}  // namespace motionfc
