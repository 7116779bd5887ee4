// Shared fixtures and independent reference implementations for the unit
// and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "motionfc/synth.hpp"
#include "motionfc/train.hpp"

namespace motionfc::testing {

inline PoseSequence random_sequence(std::size_t frames, std::size_t joints, std::size_t dims,
                                    std::mt19937_64& rng, double spread = 1.0) {
  std::normal_distribution<double> normal(0.0, spread);
  PoseSequence s(frames, joints, dims, 40.0);
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t j = 0; j < joints; ++j)
      for (std::size_t d = 0; d < dims; ++d) s.at(f, j, d) = normal(rng);
  return s;
}

// Plain-loop VIM: no Eigen, no shared helpers.
inline double brute_vim(const PoseSequence& pred, const PoseSequence& gt, std::size_t frame,
                        double unit_scale) {
  double total = 0.0;
  int count = 0;
  for (std::size_t j = 0; j < gt.joints(); ++j) {
    if (gt.visibility(frame, j) != 1) continue;
    double sq = 0.0;
    for (std::size_t d = 0; d < gt.dims(); ++d) {
      const double e = pred.at(frame, j, d) - gt.at(frame, j, d);
      sq += e * e;
    }
    total += std::sqrt(sq) * unit_scale;
    ++count;
  }
  return count == 0 ? 0.0 : total / count;
}

inline double brute_vam(const PoseSequence& pred, const PoseSequence& gt, std::size_t frame,
                        double unit_scale, double beta) {
  double total = 0.0;
  for (std::size_t j = 0; j < gt.joints(); ++j) {
    const int p = pred.visibility(frame, j), g = gt.visibility(frame, j);
    if (p != g) {
      total += beta;
    } else if (g == 1) {
      double sq = 0.0;
      for (std::size_t d = 0; d < gt.dims(); ++d) {
        const double e = pred.at(frame, j, d) - gt.at(frame, j, d);
        sq += e * e;
      }
      total += std::sqrt(sq) * unit_scale;
    }
  }
  return total / static_cast<double>(gt.joints());
}

// Top-k mean by full sort; stable so that ties keep the lower index first.
inline double sorted_ohkm(const std::vector<double>& losses, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> v;
  for (std::size_t i = 0; i < losses.size(); ++i) v.push_back({losses[i], i});
  std::stable_sort(v.begin(), v.end(), [](auto a, auto b) { return a.first > b.first; });
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i].first;
  return s / static_cast<double>(k);
}

struct GradCheckResult {
  std::vector<std::string> names;
  std::vector<double> relative_errors;
  double worst = 0.0;
  /// Tensors whose gradient norm was below kGradFloor in both estimates.
  std::vector<std::string> floored;
};

inline constexpr double kGradFloor = 1e-6;

// Small J=5, D=3 problem with T=4, tau=4 (L = N = 8).
struct GradCheckProblem {
  TrainConfig cfg;
  Dataset data;
  std::vector<PreparedSample> batch;
  std::vector<std::uint8_t> mask;
  GcnModel model;
};

inline GradCheckProblem make_gradcheck_problem(NodeMode node_mode, InputRepr repr,
                                               std::uint64_t seed = 5) {
  GradCheckProblem p;
  SynthSpec spec;
  spec.joints = 5;
  spec.frames = 8;
  spec.num_sequences = 3;
  spec.seed = seed;
  p.data = generate_dataset(spec);

  p.cfg = TrainConfig::defaults_for(5, 3);
  p.cfg.window.input_frames = 4;
  p.cfg.window.output_frames = 4;
  p.cfg.model.coefficients = 8;
  p.cfg.model.num_blocks = 2;
  p.cfg.model.hidden_channels = 16;
  p.cfg.model.dropout_rate = 0.0;
  p.cfg.model.node_mode = node_mode;
  p.cfg.loss.ohkm_k = 2;
  p.cfg.input_repr = repr;

  const DctBasis basis = make_basis(8, 8);
  std::mt19937_64 rng(seed);
  for (const auto& w : extend_and_window(p.data, p.cfg.window, rng))
    p.batch.push_back(prepare_sample(w, p.data.skeleton, p.cfg, basis));
  // Curriculum at epoch 4: inputs plus the first two forecast frames.
  p.mask = curriculum_mask(4, 4, 4, p.cfg.curriculum);

  p.model = init_model(p.cfg.model, seed);
  // Move the normalization parameters off their initial values so their
  // gradients are exercised in a generic state.
  std::mt19937_64 prng(seed + 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& prm : p.model.parameters()) {
    if (prm.name.find("gamma") != std::string::npos || prm.name.find("beta") != std::string::npos ||
        prm.name.find("bias") != std::string::npos) {
      for (Eigen::Index i = 0; i < prm.value->size(); ++i) (*prm.value)(i) += u(prng);
    }
  }
  return p;
}

inline GradCheckResult gradient_check(GradCheckProblem& p, double h = 1e-5) {
  const DctBasis basis = make_basis(8, 8);
  const BatchLoss analytic = loss_and_gradients(p.model, p.batch, p.mask, p.cfg.loss,
                                                p.cfg.input_repr, basis, nullptr);
  GradCheckResult out;
  auto params = p.model.parameters();
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& value = *params[t].value;
    Matrix numeric(value.rows(), value.cols());
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value(i);
      value(i) = saved + h;
      const double up =
          batch_loss(p.model, p.batch, p.mask, p.cfg.loss, p.cfg.input_repr, basis, Mode::train);
      value(i) = saved - h;
      const double down =
          batch_loss(p.model, p.batch, p.mask, p.cfg.loss, p.cfg.input_repr, basis, Mode::train);
      value(i) = saved;
      numeric(i) = (up - down) / (2.0 * h);
    }
    const Matrix& a = analytic.gradients[t];
    // Biases that feed a normalization have an exactly zero gradient; the
    // floor keeps their finite-difference roundoff from reading as 100%.
    const double scale = std::max(a.norm(), numeric.norm());
    const double rel = (a - numeric).norm() / std::max(scale, kGradFloor);
    if (scale < kGradFloor) out.floored.push_back(params[t].name);
    out.names.push_back(params[t].name);
    out.relative_errors.push_back(rel);
    out.worst = std::max(out.worst, rel);
  }
  return out;
}

}  // namespace motionfc::testing
