#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "motionfc/core.hpp"
#include "motionfc/dct.hpp"
#include "motionfc/gcnet.hpp"
#include "motionfc/metrics.hpp"
#include "motionfc/preprocess.hpp"

namespace motionfc {

/// Everything needed to turn raw input windows into forecasts: the network
/// plus the preprocessing it was trained with.
struct Forecaster {
  GcnModel model;
  PreprocessConfig preprocess;
  InputRepr input_repr = InputRepr::position;
  std::size_t input_frames = 16;
  std::size_t output_frames = 14;

  DctBasis basis() const;
};

void save_forecaster(const Forecaster& forecaster, const std::filesystem::path& path);
Forecaster load_forecaster(const std::filesystem::path& path);

/// interpolate -> center/scale -> network -> original units -> visibility
/// padding -> boundary filter (2D with image bounds). Returns the forecast
/// frames in the input's units.
PoseSequence run_inference(const Forecaster& forecaster, const PoseSequence& raw_input,
                           const SkeletonSpec& skeleton);

struct FusionConfig {
  std::size_t short_frames = 4;
  void validate(std::size_t tau) const;
};

/// First `short_frames` frames (and visibility) from `short_pred`, the rest
/// from `long_pred`.
PoseSequence fuse(const PoseSequence& short_pred, const PoseSequence& long_pred,
                  const FusionConfig& cfg);
/// Coordinate-wise mean; visibility is visible when a majority (ties
/// visible) of the inputs say so.
PoseSequence average_predictions(const std::vector<PoseSequence>& predictions);

struct FusedReport {
  std::vector<double> offsets_ms;
  std::vector<double> values;
  std::vector<std::string> provenance;  // name of the report each value came from
  double average = 0.0;
};

/// Per offset, the smallest value among the named reports.
FusedReport fuse_reports(const std::vector<std::pair<std::string, MetricReport>>& reports);
std::string fused_report_to_json(const FusedReport& report);

/// One prediction per evaluation window of `dataset`.
PredictionSet predict_dataset(const Forecaster& forecaster, const Dataset& dataset,
                              std::size_t stride);
/// Short/long fusion (and optional averaging of extra models into the long
/// part) over every evaluation window.
PredictionSet predict_dataset_fused(const Forecaster& short_model, const Forecaster& long_model,
                                    const std::vector<Forecaster>& extra_models,
                                    const Dataset& dataset, std::size_t stride,
                                    const FusionConfig& cfg);

}  // namespace motionfc
