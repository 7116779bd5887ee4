#include "motionfc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace motionfc {

LossConfig LossConfig::defaults_for(std::size_t dims) {
  LossConfig cfg;
  cfg.ohkm_k = dims == 2 ? 8 : 6;
  return cfg;
}

void LossConfig::validate(std::size_t joints) const {
  if (!(smooth_l1_beta > 0.0)) throw ValidationError("loss.smooth_l1_beta must be positive");
  if (ohkm_enabled && (ohkm_k < 1 || ohkm_k > joints)) {
    throw ValidationError("loss.ohkm_k must be in [1, " + std::to_string(joints) + "]");
  }
}

void CurriculumConfig::validate() const {
  if (epochs_per_frame < 1) throw ValidationError("curriculum.epochs_per_frame must be >= 1");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("optimizer.learning_rate must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ValidationError("optimizer.decay must be in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("optimizer betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("optimizer.epsilon must be positive");
}

AugmentConfig AugmentConfig::defaults_for(std::size_t dims) {
  AugmentConfig cfg;
  cfg.reverse = dims == 3;
  cfg.flip = dims == 3;
  return cfg;
}

void AugmentConfig::validate(std::size_t dims) const {
  if (flip && dims != 3) throw ValidationError("augment.flip is only defined for 3D data");
  if (flip_axis >= dims) throw ValidationError("augment.flip_axis out of range");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ValidationError("augment.flip_probability must be in [0, 1]");
  }
}

TrainConfig TrainConfig::defaults_for(std::size_t joints, std::size_t dims) {
  TrainConfig cfg;
  cfg.model.joints = joints;
  cfg.model.dims = dims;
  cfg.model.coefficients = cfg.window.total();
  cfg.preprocess = PreprocessConfig::defaults_for(dims);
  cfg.loss = LossConfig::defaults_for(dims);
  cfg.loss.ohkm_k = std::min(cfg.loss.ohkm_k, joints);
  cfg.augment = AugmentConfig::defaults_for(dims);
  cfg.metric = MetricConfig::defaults_for(dims);
  cfg.input_repr = dims == 3 ? InputRepr::velocity : InputRepr::position;
  return cfg;
}

void TrainConfig::validate() const {
  model.validate();
  preprocess.validate();
  window.validate();
  loss.validate(model.joints);
  curriculum.validate();
  optimizer.validate();
  augment.validate(model.dims);
  metric.validate();
  if (model.coefficients > window.total()) {
    throw ValidationError("model.dct_coefficients exceeds the window length");
  }
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (eval_stride < 1) throw ValidationError("eval_stride must be at least 1");
  if (short_term_frames &&
      (*short_term_frames < 1 || *short_term_frames > window.output_frames)) {
    throw ValidationError("short_term_frames must be in [1, output_frames]");
  }
}

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "epoch,loss,val_metric,lr,active_frames,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << "," << e.loss << ",";
    if (e.val_metric) out << *e.val_metric;
    out << "," << e.learning_rate << "," << e.active_frames << "," << e.seconds << "\n";
  }
  return out.str();
}

std::string TrainReport::to_json() const {
  nlohmann::json j;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"loss", e.loss},
                    {"val_metric", e.val_metric ? nlohmann::json(*e.val_metric) : nlohmann::json()},
                    {"lr", e.learning_rate},
                    {"active_frames", e.active_frames},
                    {"seconds", e.seconds}});
  }
  j["epochs"] = std::move(rows);
  j["best_epoch"] = best_epoch;
  j["diverged"] = diverged;
  j["diagnostic"] = diagnostic;
  return j.dump(2) + "\n";
}

double smooth_l1(double pred, double target, double beta) {
  const double e = std::abs(pred - target);
  return e < beta ? 0.5 * e * e / beta : e - 0.5 * beta;
}

double smooth_l1_grad(double pred, double target, double beta) {
  const double e = pred - target;
  if (std::abs(e) < beta) return e / beta;
  return e > 0.0 ? 1.0 : -1.0;
}

namespace {

void check_loss_shapes(const PoseSequence& pred, const PoseSequence& target,
                       const std::vector<std::uint8_t>& frame_mask) {
  if (pred.frames() != target.frames() || pred.joints() != target.joints() ||
      pred.dims() != target.dims()) {
    throw ValidationError("prediction and target shapes differ");
  }
  if (frame_mask.size() != pred.frames()) {
    throw ValidationError("frame mask has " + std::to_string(frame_mask.size()) +
                          " entries for " + std::to_string(pred.frames()) + " frames");
  }
  if (std::none_of(frame_mask.begin(), frame_mask.end(), [](auto m) { return m != 0; })) {
    throw ValidationError("frame mask selects no frame");
  }
}

/// Per-joint losses and, when `grad` is given, d(sum_j w_j * L_j)/d pred
/// with w_j = weights[j].
std::vector<double> joint_losses_impl(const PoseSequence& pred, const PoseSequence& target,
                                      const std::vector<std::uint8_t>& frame_mask, double beta,
                                      const std::vector<double>* weights, PoseSequence* grad) {
  check_loss_shapes(pred, target, frame_mask);
  std::vector<double> losses(pred.joints(), 0.0);
  for (std::size_t j = 0; j < pred.joints(); ++j) {
    std::size_t count = 0;
    double sum = 0.0;
    for (std::size_t f = 0; f < pred.frames(); ++f) {
      if (!frame_mask[f] || !target.visible(f, j)) continue;
      for (std::size_t d = 0; d < pred.dims(); ++d) sum += smooth_l1(pred.at(f, j, d), target.at(f, j, d), beta);
      count += pred.dims();
    }
    if (count == 0) continue;
    losses[j] = sum / static_cast<double>(count);
    if (grad && weights && (*weights)[j] != 0.0) {
      const double w = (*weights)[j] / static_cast<double>(count);
      for (std::size_t f = 0; f < pred.frames(); ++f) {
        if (!frame_mask[f] || !target.visible(f, j)) continue;
        for (std::size_t d = 0; d < pred.dims(); ++d)
          grad->at(f, j, d) += w * smooth_l1_grad(pred.at(f, j, d), target.at(f, j, d), beta);
      }
    }
  }
  return losses;
}

}  // namespace

std::vector<double> joint_losses(const PoseSequence& pred, const PoseSequence& target,
                                 const std::vector<std::uint8_t>& frame_mask, double beta) {
  return joint_losses_impl(pred, target, frame_mask, beta, nullptr, nullptr);
}

std::vector<std::size_t> ohkm_select(const std::vector<double>& losses, std::size_t k) {
  if (k < 1 || k > losses.size()) {
    throw ValidationError("ohkm k=" + std::to_string(k) + " out of range for " +
                          std::to_string(losses.size()) + " joints");
  }
  std::vector<std::size_t> idx(losses.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
  idx.resize(k);
  return idx;
}

double ohkm(const std::vector<double>& losses, std::size_t k) {
  double sum = 0.0;
  for (std::size_t i : ohkm_select(losses, k)) sum += losses[i];
  return sum / static_cast<double>(k);
}

std::vector<std::uint8_t> curriculum_mask(std::size_t epoch, std::size_t input_frames,
                                          std::size_t output_frames,
                                          const CurriculumConfig& cfg) {
  std::vector<std::uint8_t> mask(input_frames + output_frames, 1);
  if (!cfg.enabled) return mask;
  cfg.validate();
  for (std::size_t t = 1; t <= output_frames; ++t)
    mask[input_frames + t - 1] = epoch >= cfg.epochs_per_frame * t ? 1 : 0;
  return mask;
}

void restrict_to_short_term(std::vector<std::uint8_t>& mask, std::size_t input_frames,
                            std::size_t short_frames) {
  for (std::size_t f = input_frames + short_frames; f < mask.size(); ++f) mask[f] = 0;
}

double learning_rate(std::size_t epoch, const OptimizerConfig& cfg) {
  return cfg.learning_rate * std::pow(cfg.decay, static_cast<double>(epoch));
}

void adam_step(std::span<Matrix* const> params, const Gradients& grads, OptimizerState& state,
               double lr, const OptimizerConfig& cfg) {
  if (grads.size() != params.size()) throw ValidationError("gradient count does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols()) {
      throw ValidationError("gradient shape does not match parameter " + std::to_string(i));
    }
    if (!grads[i].allFinite()) throw DivergenceError("non-finite gradient for parameter " + std::to_string(i));
  }
  if (state.first_moment.empty()) {
    for (auto* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i]->array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  }
}

void adam_step(GcnModel& model, const Gradients& grads, OptimizerState& state, double lr,
               const OptimizerConfig& cfg) {
  std::vector<Matrix*> params;
  for (auto& p : model.parameters()) params.push_back(p.value);
  adam_step(params, grads, state, lr, cfg);
  ++model.revision;
}

PreparedSample prepare_sample(const MotionSample& raw, const SkeletonSpec& skeleton,
                              const TrainConfig& cfg, const DctBasis& basis, bool flip) {
  MotionSample s = raw;
  if (cfg.preprocess.interpolate_invisible) s.input = interpolate_invisible(s.input).sequence;
  s = normalize_sample(s, skeleton, cfg.preprocess);
  if (flip) s = flip_augment(s, skeleton, cfg.augment.flip_axis);
  PreparedSample out;
  out.truth = s.input.concat(s.target);
  out.features = node_features(s, basis, cfg.model.node_mode, cfg.input_repr);
  out.sample = std::move(s);
  return out;
}

namespace {

struct SampleResult {
  double loss = 0.0;
  Matrix grad_output;
};

SampleResult sample_loss(const GcnModel& model, const PreparedSample& ps, const Matrix& output,
                         const std::vector<std::uint8_t>& frame_mask, const LossConfig& loss,
                         InputRepr repr, const DctBasis& basis, bool want_grad) {
  const auto& mc = model.config();
  const Matrix joint_out = to_joint_layout(output, mc.joints, mc.dims, mc.node_mode);
  const PoseSequence decoded = decode_sequence(joint_out, mc.dims, basis);
  const PoseSequence completed = reconstruct_positions(decoded, ps.sample.input, repr);

  const std::vector<double> losses =
      joint_losses_impl(completed, ps.truth, frame_mask, loss.smooth_l1_beta, nullptr, nullptr);
  const std::size_t k = loss.ohkm_enabled ? loss.ohkm_k : losses.size();
  const std::vector<std::size_t> picked = ohkm_select(losses, k);
  SampleResult out;
  for (std::size_t j : picked) out.loss += losses[j];
  out.loss /= static_cast<double>(k);
  if (!std::isfinite(out.loss)) throw DivergenceError("non-finite training loss");
  if (!want_grad) return out;

  std::vector<double> weights(losses.size(), 0.0);
  for (std::size_t j : picked) weights[j] = 1.0 / static_cast<double>(k);
  PoseSequence grad(completed.frames(), completed.joints(), completed.dims());
  joint_losses_impl(completed, ps.truth, frame_mask, loss.smooth_l1_beta, &weights, &grad);
  const PoseSequence grad_decoded =
      reconstruct_positions_adjoint(grad, ps.sample.input.frames(), repr);
  out.grad_output = from_joint_layout(encode_sequence(grad_decoded, basis), mc.dims, mc.node_mode);
  return out;
}

}  // namespace

BatchLoss loss_and_gradients(const GcnModel& model, std::span<const PreparedSample> batch,
                             const std::vector<std::uint8_t>& frame_mask, const LossConfig& loss,
                             InputRepr repr, const DctBasis& basis, std::mt19937_64* dropout_rng) {
  std::vector<Matrix> features;
  features.reserve(batch.size());
  for (const auto& ps : batch) features.push_back(ps.features);
  ForwardResult fw = forward(model, features, Mode::train, dropout_rng);
  BatchLoss out;
  std::vector<Matrix> grad_outputs;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    SampleResult r = sample_loss(model, batch[s], fw.outputs[s], frame_mask, loss, repr, basis, true);
    out.sample_losses.push_back(r.loss);
    out.loss += r.loss * inv_batch;
    grad_outputs.push_back(r.grad_output * inv_batch);
  }
  out.gradients = backward(model, fw.cache, grad_outputs);
  out.cache = std::move(fw.cache);
  return out;
}

double batch_loss(const GcnModel& model, std::span<const PreparedSample> batch,
                  const std::vector<std::uint8_t>& frame_mask, const LossConfig& loss,
                  InputRepr repr, const DctBasis& basis, Mode mode) {
  std::vector<Matrix> features;
  for (const auto& ps : batch) features.push_back(ps.features);
  if (mode == Mode::train && model.config().dropout_rate > 0.0) {
    throw ValidationError("batch_loss in train mode requires dropout to be off");
  }
  ForwardResult fw = forward(model, features, mode);
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s)
    total += sample_loss(model, batch[s], fw.outputs[s], frame_mask, loss, repr, basis, false).loss;
  return total / static_cast<double>(batch.size());
}

MetricReport validate_forecaster(const Forecaster& forecaster, const Dataset& dataset,
                                 const MetricConfig& metric, std::size_t stride) {
  WindowSpec spec;
  spec.input_frames = forecaster.input_frames;
  spec.output_frames = forecaster.output_frames;
  spec.stride = stride;
  std::vector<PoseSequence> preds, gts;
  std::vector<std::string> ids;
  for (const auto& w : evaluation_windows(dataset, spec)) {
    preds.push_back(run_inference(forecaster, w.input, dataset.skeleton));
    gts.push_back(w.target);
    ids.push_back(w.source_id + "@" + std::to_string(w.start_frame + w.input.frames()));
  }
  return evaluate_pairs(preds, gts, ids, dataset.frame_interval_ms, metric);
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg, std::uint64_t seed,
                  const Dataset* validation, const TrainHooks& hooks) {
  cfg.validate();
  dataset.validate();
  if (dataset.skeleton.joints() != cfg.model.joints || dataset.dims != cfg.model.dims) {
    throw ValidationError("dataset shape does not match model.joints / model.dims");
  }
  const DctBasis basis = make_basis(cfg.window.total(), cfg.model.coefficients);

  // Independent streams so that switching one feature on or off does not
  // shift the randomness seen by the others.
  std::mt19937_64 window_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 shuffle_rng(seed ^ 0xbf58476d1ce4e5b9ULL);
  std::mt19937_64 flip_rng(seed ^ 0x94d049bb133111ebULL);
  std::mt19937_64 dropout_rng(seed ^ 0x2545f4914f6cdd1dULL);

  Forecaster current;
  current.model = hooks.initial_model ? *hooks.initial_model : init_model(cfg.model, seed);
  if (current.model.config() != cfg.model) {
    throw ValidationError("initial model config does not match: " +
                          std::string("check joints, dims and layer sizes"));
  }
  current.preprocess = cfg.preprocess;
  current.input_repr = cfg.input_repr;
  current.input_frames = cfg.window.input_frames;
  current.output_frames = cfg.window.output_frames;

  std::vector<MotionSample> windows = extend_and_window(dataset, cfg.window, window_rng);
  if (windows.empty()) throw ValidationError("dataset yields no training windows");

  // A short-term model is judged only on the frames it is trained for.
  MetricConfig val_metric = cfg.metric;
  if (cfg.short_term_frames && validation) {
    val_metric.offsets_ms.clear();
    for (std::size_t f = 1; f <= *cfg.short_term_frames; ++f)
      val_metric.offsets_ms.push_back(static_cast<double>(f) * validation->frame_interval_ms);
  }

  TrainResult result;
  result.forecaster = current;
  std::optional<double> best_metric;
  OptimizerState state;
  std::bernoulli_distribution flip_draw(cfg.augment.flip_probability);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    if (cfg.window.random_start && epoch > 0) {
      windows = extend_and_window(dataset, cfg.window, window_rng);
    }
    std::vector<MotionSample> pool = windows;
    if (cfg.augment.reverse) {
      for (const auto& w : windows) pool.push_back(reverse_augment(w));
    }
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    std::vector<std::uint8_t> mask = curriculum_mask(epoch, cfg.window.input_frames,
                                                     cfg.window.output_frames, cfg.curriculum);
    if (cfg.short_term_frames) {
      restrict_to_short_term(mask, cfg.window.input_frames, *cfg.short_term_frames);
    }
    const double lr = learning_rate(epoch, cfg.optimizer);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        const std::span<const std::size_t> ids(order.data() + start, end - start);
        if (hooks.on_batch) hooks.on_batch(epoch, ids);
        std::vector<PreparedSample> batch;
        for (std::size_t i : ids) {
          const bool flip = cfg.augment.flip && flip_draw(flip_rng);
          batch.push_back(prepare_sample(pool[i], dataset.skeleton, cfg, basis, flip));
        }
        BatchLoss bl = loss_and_gradients(current.model, batch, mask, cfg.loss, cfg.input_repr,
                                          basis, &dropout_rng);
        if (!std::isfinite(bl.loss)) throw DivergenceError("non-finite training loss");
        update_running_stats(current.model, bl.cache);
        adam_step(current.model, bl.gradients, state, lr, cfg.optimizer);
        for (double l : bl.sample_losses) loss_sum += l;
        seen += bl.sample_losses.size();
      }
    } catch (const DivergenceError& e) {
      result.report.diverged = true;
      result.report.diagnostic =
          "epoch " + std::to_string(epoch + 1) + ": " + e.what() + "; kept last good model";
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / static_cast<double>(seen);
    rec.learning_rate = lr;
    rec.active_frames = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
    if (validation) {
      rec.val_metric = validate_forecaster(current, *validation, val_metric, cfg.eval_stride).average;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.report.epochs.push_back(rec);

    if (!rec.val_metric || !best_metric || *rec.val_metric < *best_metric) {
      if (rec.val_metric) best_metric = rec.val_metric;
      result.forecaster = current;
      result.report.best_epoch = rec.epoch;
    }
  }
  return result;
}

TrainResult train_short_term(const Dataset& dataset, TrainConfig cfg, std::uint64_t seed,
                             std::size_t short_frames, const Dataset* validation,
                             const TrainHooks& hooks) {
  if (short_frames < 1 || short_frames > cfg.window.output_frames) {
    throw ValidationError("short-term frame count must be in [1, output_frames]");
  }
  cfg.short_term_frames = short_frames;
  return train(dataset, cfg, seed, validation, hooks);
}

}  // namespace motionfc
