#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace motionfc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Input that violates a documented precondition or file format.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure at run time (non-finite activations, loss or gradients).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pose trajectory of one person: N frames x J joints x D dims plus
/// per-joint visibility. Frames are 0-based; coordinates are stored
/// frame-major, then joint, then dimension.
class PoseSequence {
 public:
  PoseSequence() = default;
  PoseSequence(std::size_t frames, std::size_t joints, std::size_t dims,
               double frame_interval_ms = 1.0);

  std::size_t frames() const { return frames_; }
  std::size_t joints() const { return joints_; }
  std::size_t dims() const { return dims_; }

  double& at(std::size_t frame, std::size_t joint, std::size_t dim) {
    return coords_[(frame * joints_ + joint) * dims_ + dim];
  }
  double at(std::size_t frame, std::size_t joint, std::size_t dim) const {
    return coords_[(frame * joints_ + joint) * dims_ + dim];
  }
  std::uint8_t& visibility(std::size_t frame, std::size_t joint) {
    return visibility_[frame * joints_ + joint];
  }
  std::uint8_t visibility(std::size_t frame, std::size_t joint) const {
    return visibility_[frame * joints_ + joint];
  }
  bool visible(std::size_t frame, std::size_t joint) const {
    return visibility(frame, joint) != 0;
  }

  Eigen::Map<const Vector> position(std::size_t frame, std::size_t joint) const {
    return {coords_.data() + (frame * joints_ + joint) * dims_,
            static_cast<Eigen::Index>(dims_)};
  }
  Eigen::Map<Vector> position(std::size_t frame, std::size_t joint) {
    return {coords_.data() + (frame * joints_ + joint) * dims_,
            static_cast<Eigen::Index>(dims_)};
  }

  const std::vector<double>& coords() const { return coords_; }
  const std::vector<std::uint8_t>& visibility() const { return visibility_; }

  double frame_interval_ms = 1.0;
  std::string sequence_id;
  std::string video_id;

  /// Frames [begin, begin + count) as a new sequence with the same ids.
  PoseSequence slice(std::size_t begin, std::size_t count) const;
  /// This sequence followed by `tail` (shapes must agree).
  PoseSequence concat(const PoseSequence& tail) const;
  /// Throws ValidationError when shape, visibility or finiteness is violated.
  void validate() const;

  friend bool operator==(const PoseSequence&, const PoseSequence&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t joints_ = 0;
  std::size_t dims_ = 0;
  std::vector<double> coords_;
  std::vector<std::uint8_t> visibility_;
};

/// One training/evaluation window. `center_offset` and `scale` describe the
/// normalization applied to both parts: stored = (original - offset) * scale.
struct MotionSample {
  PoseSequence input;
  PoseSequence target;
  Vector center_offset;
  double scale = 1.0;
  /// Id of the sequence the window was cut from and the 0-based frame of
  /// that sequence where the window starts.
  std::string source_id;
  std::size_t start_frame = 0;

  std::size_t input_frames() const { return input.frames(); }
  std::size_t output_frames() const { return target.frames(); }
  std::size_t joints() const { return input.joints(); }
  std::size_t dims() const { return input.dims(); }

  void validate() const;
};

struct SkeletonSpec {
  std::vector<std::string> joint_names;
  std::size_t neck_index = 0;
  std::vector<std::pair<std::size_t, std::size_t>> left_right_swap;
  std::optional<std::pair<double, double>> image_bounds;

  std::size_t joints() const { return joint_names.size(); }
  void validate() const;

  friend bool operator==(const SkeletonSpec&, const SkeletonSpec&) = default;
};

struct Dataset {
  SkeletonSpec skeleton;
  std::size_t dims = 3;
  double frame_interval_ms = 1.0;
  std::vector<PoseSequence> sequences;

  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Reads the JSON-lines dataset format: a header line followed by one
/// sequence per line. Errors name the offending 1-based line number.
Dataset load_dataset(const std::filesystem::path& path);
/// Writes the JSON-lines dataset format. Refuses to write non-finite values.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// A forecast of `tau` frames for one evaluation window.
struct Prediction {
  PoseSequence forecast;
  /// Sequence id of the ground truth the window was cut from.
  std::string source_input_id;
  /// 0-based index, within that sequence, of the first forecast frame.
  std::size_t forecast_start = 0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct PredictionSet {
  SkeletonSpec skeleton;
  std::size_t dims = 3;
  double frame_interval_ms = 1.0;
  std::vector<Prediction> predictions;
};

PredictionSet load_predictions(const std::filesystem::path& path);
void save_predictions(const PredictionSet& predictions,
                      const std::filesystem::path& path);

}  // namespace motionfc
