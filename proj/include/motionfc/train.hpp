#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "motionfc/core.hpp"
#include "motionfc/dct.hpp"
#include "motionfc/gcnet.hpp"
#include "motionfc/metrics.hpp"
#include "motionfc/predict.hpp"
#include "motionfc/preprocess.hpp"

namespace motionfc {

struct LossConfig {
  bool ohkm_enabled = true;
  /// Hardest joints kept per sample: 6 for 3D, 8 for 2D by default.
  std::size_t ohkm_k = 6;
  double smooth_l1_beta = 1.0;

  static LossConfig defaults_for(std::size_t dims);
  void validate(std::size_t joints) const;
};

struct CurriculumConfig {
  bool enabled = true;
  /// Forecast frame t joins the loss at epoch epochs_per_frame * t.
  std::size_t epochs_per_frame = 2;
  void validate() const;
};

struct OptimizerConfig {
  double learning_rate = 1e-3;
  /// Learning rate multiplier applied once per epoch.
  double decay = 0.95;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  void validate() const;
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

struct AugmentConfig {
  /// Add the time-reversed copy of every window each epoch.
  bool reverse = true;
  /// Mirror a window along `flip_axis` with probability `flip_probability`.
  bool flip = true;
  std::size_t flip_axis = 0;
  double flip_probability = 0.5;

  static AugmentConfig defaults_for(std::size_t dims);
  void validate(std::size_t dims) const;
};

struct TrainConfig {
  GcnConfig model;
  PreprocessConfig preprocess;
  WindowSpec window;
  LossConfig loss;
  CurriculumConfig curriculum;
  OptimizerConfig optimizer;
  AugmentConfig augment;
  MetricConfig metric;
  InputRepr input_repr = InputRepr::velocity;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  /// Stride of the validation windows.
  std::size_t eval_stride = 1;
  /// When set, forecast frames after the first `short_term_frames` never
  /// contribute to the loss, and validation scores frames 1..k only.
  std::optional<std::size_t> short_term_frames;

  /// Defaults for a dataset of the given shape (scale, OHKM k, input
  /// representation, augmentation and metric all depend on dims).
  static TrainConfig defaults_for(std::size_t joints, std::size_t dims);
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  std::optional<double> val_metric;
  double learning_rate = 0.0;
  std::size_t active_frames = 0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string diagnostic;

  std::string to_csv() const;
  std::string to_json() const;
};

double smooth_l1(double pred, double target, double beta);
/// d smooth_l1 / d pred.
double smooth_l1_grad(double pred, double target, double beta);

/// Per joint, the mean smooth-L1 over active frames and all channels. Frames
/// where the target joint is invisible are left out. `frame_mask` has one
/// entry per frame.
std::vector<double> joint_losses(const PoseSequence& pred, const PoseSequence& target,
                                 const std::vector<std::uint8_t>& frame_mask,
                                 double beta = 1.0);

/// Mean of the k largest entries; ties go to the lower index.
double ohkm(const std::vector<double>& losses, std::size_t k);
/// Indices of the entries ohkm() averages, in selection order.
std::vector<std::size_t> ohkm_select(const std::vector<double>& losses, std::size_t k);

/// Frames 0..T-1 always active; forecast frame t (1-based) active once
/// epoch >= epochs_per_frame * t. `epoch` is 0-based.
std::vector<std::uint8_t> curriculum_mask(std::size_t epoch, std::size_t input_frames,
                                          std::size_t output_frames,
                                          const CurriculumConfig& cfg);
/// Additionally switches off forecast frames after the first `short_frames`.
void restrict_to_short_term(std::vector<std::uint8_t>& mask, std::size_t input_frames,
                            std::size_t short_frames);

/// base * decay^epoch, epoch 0-based.
double learning_rate(std::size_t epoch, const OptimizerConfig& cfg);

/// Bias-corrected Adam update of `params` in place.
void adam_step(std::span<Matrix* const> params, const Gradients& grads, OptimizerState& state,
               double lr, const OptimizerConfig& cfg);
void adam_step(GcnModel& model, const Gradients& grads, OptimizerState& state, double lr,
               const OptimizerConfig& cfg);

/// A window ready for the network: normalized (and possibly interpolated)
/// input, full-length ground truth, and network features.
struct PreparedSample {
  MotionSample sample;
  /// Input || target in normalized units, with the original visibility.
  PoseSequence truth;
  Matrix features;
};

PreparedSample prepare_sample(const MotionSample& raw, const SkeletonSpec& skeleton,
                              const TrainConfig& cfg, const DctBasis& basis,
                              bool flip = false);

struct BatchLoss {
  double loss = 0.0;  // mean over the batch
  std::vector<double> sample_losses;
  Gradients gradients;  // of the batch mean loss
  ForwardCache cache;
};

/// Masked smooth-L1 / OHKM loss of the completed trajectory and its gradient
/// with respect to every model parameter.
BatchLoss loss_and_gradients(const GcnModel& model, std::span<const PreparedSample> batch,
                             const std::vector<std::uint8_t>& frame_mask, const LossConfig& loss,
                             InputRepr repr, const DctBasis& basis, std::mt19937_64* dropout_rng);
/// Loss only, same definition, any mode.
double batch_loss(const GcnModel& model, std::span<const PreparedSample> batch,
                  const std::vector<std::uint8_t>& frame_mask, const LossConfig& loss,
                  InputRepr repr, const DctBasis& basis, Mode mode);

struct TrainResult {
  Forecaster forecaster;
  TrainReport report;
};

struct TrainHooks {
  /// Called with the window indices of every mini-batch, in order.
  std::function<void(std::size_t epoch, std::span<const std::size_t> batch)> on_batch;
  /// Starting point instead of a fresh init_model (pretraining hook).
  std::optional<GcnModel> initial_model;
};

/// Mini-batch Adam over the windows of `dataset`. With a validation set the
/// returned forecaster is the one from the best-scoring epoch; otherwise the
/// last. A divergence stops training and keeps the last good model.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg, std::uint64_t seed,
                  const Dataset* validation = nullptr, const TrainHooks& hooks = {});
/// train() with the loss restricted to the first `short_frames` forecast frames.
TrainResult train_short_term(const Dataset& dataset, TrainConfig cfg, std::uint64_t seed,
                             std::size_t short_frames = 4, const Dataset* validation = nullptr,
                             const TrainHooks& hooks = {});

/// Average validation metric of a forecaster on every window of `dataset`.
MetricReport validate_forecaster(const Forecaster& forecaster, const Dataset& dataset,
                                 const MetricConfig& metric, std::size_t stride);

}  // namespace motionfc
