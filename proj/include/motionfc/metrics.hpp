#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "motionfc/core.hpp"

namespace motionfc {

enum class MetricKind { vim, vam };

std::string to_string(MetricKind kind);
MetricKind parse_metric_kind(const std::string& s);

/// 1-based index of a forecast frame: step 1 is the first predicted frame.
struct ForecastStep {
  std::size_t value = 1;
  std::size_t index() const { return value - 1; }
  friend bool operator==(ForecastStep, ForecastStep) = default;
};

struct MetricConfig {
  MetricKind kind = MetricKind::vim;
  /// Penalty for a wrong visibility prediction (VAM).
  double beta = 200.0;
  std::vector<double> offsets_ms{100, 240, 500, 640, 900};
  /// Multiplies position errors: 100 turns meters into centimeters.
  double unit_scale = 100.0;

  /// VIM in centimeters for 3D; VAM in pixels for 2D.
  static MetricConfig defaults_for(std::size_t dims);
  void validate() const;
};

/// round(offset / interval), clamped to [1, tau]. `clamped` reports whether
/// clamping changed the result.
ForecastStep offset_to_frame(double offset_ms, double frame_interval_ms, std::size_t tau,
                             bool* clamped = nullptr);

/// Mean Euclidean distance over joints visible in the ground truth, times
/// unit_scale. Returns 0 when no joint is visible.
double vim(const PoseSequence& pred, const PoseSequence& gt, ForecastStep step,
           const MetricConfig& cfg);
/// Per joint: both visible -> distance * unit_scale, both invisible -> 0,
/// disagreement -> beta; averaged over all joints.
double vam(const PoseSequence& pred, const PoseSequence& gt, ForecastStep step,
           const MetricConfig& cfg);
double frame_metric(const PoseSequence& pred, const PoseSequence& gt, ForecastStep step,
                    const MetricConfig& cfg);

struct MetricReport {
  MetricKind kind = MetricKind::vim;
  std::vector<double> offsets_ms;
  std::vector<std::size_t> frames;  // 1-based forecast steps
  std::vector<double> values;       // per offset, averaged over samples
  double average = 0.0;
  std::vector<std::string> sample_ids;
  std::vector<std::vector<double>> per_sample;  // [sample][offset]
  /// (sample, offset) cells whose ground truth had no visible joint (VIM).
  std::size_t empty_frames = 0;
  std::vector<std::string> warnings;
};

/// Matches each prediction to its ground-truth window by sequence id and
/// forecast start, then averages the per-offset metric over samples.
MetricReport evaluate(const PredictionSet& predictions, const Dataset& ground_truth,
                      const MetricConfig& cfg);
/// Same, for forecasts already paired with ground truth.
MetricReport evaluate_pairs(const std::vector<PoseSequence>& predictions,
                            const std::vector<PoseSequence>& ground_truth,
                            const std::vector<std::string>& ids, double frame_interval_ms,
                            const MetricConfig& cfg);

/// Repeats the last observed pose for every forecast frame, with the last
/// observed visibility.
PoseSequence zero_velocity_baseline(const MotionSample& sample);

std::string report_to_json(const MetricReport& report);
std::string report_to_csv(const MetricReport& report);
/// Bar chart of the per-offset values.
std::string report_to_svg(const MetricReport& report);
void write_report(const MetricReport& report, const std::filesystem::path& stem);

}  // namespace motionfc
