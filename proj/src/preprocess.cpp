#include "motionfc/preprocess.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <string>

namespace motionfc {

PreprocessConfig PreprocessConfig::defaults_for(std::size_t dims) {
  PreprocessConfig cfg;
  cfg.scale = dims == 3 ? 100.0 : 1.0;
  return cfg;
}

void PreprocessConfig::validate() const {
  if (!(scale > 0.0)) throw ValidationError("preprocess.scale must be positive");
}

void WindowSpec::validate() const {
  if (input_frames < 2) throw ValidationError("window.input_frames must be at least 2");
  if (output_frames < 1) throw ValidationError("window.output_frames must be at least 1");
  if (stride < 1) throw ValidationError("window.stride must be at least 1");
}

PoseSequence apply_center(const PoseSequence& sequence, const Vector& offset, double scale) {
  PoseSequence out = sequence;
  for (std::size_t f = 0; f < out.frames(); ++f)
    for (std::size_t j = 0; j < out.joints(); ++j)
      out.position(f, j) = (sequence.position(f, j) - offset) * scale;
  return out;
}

PoseSequence undo_center(const PoseSequence& sequence, const Vector& offset, double scale) {
  PoseSequence out = sequence;
  for (std::size_t f = 0; f < out.frames(); ++f)
    for (std::size_t j = 0; j < out.joints(); ++j)
      out.position(f, j) = sequence.position(f, j) / scale + offset;
  return out;
}

CenteredSequence center_and_scale(const PoseSequence& sequence, const SkeletonSpec& skeleton,
                                  const PreprocessConfig& cfg) {
  cfg.validate();
  if (skeleton.neck_index >= sequence.joints()) {
    throw ValidationError("neck index out of range for sequence");
  }
  CenteredSequence out;
  out.scale = cfg.scale;
  out.center_offset = Vector::Zero(static_cast<Eigen::Index>(sequence.dims()));
  bool found = false;
  for (std::size_t f = 0; f < sequence.frames() && !found; ++f) {
    if (sequence.visible(f, skeleton.neck_index)) {
      out.center_offset = sequence.position(f, skeleton.neck_index);
      found = true;
    }
  }
  if (!found) {
    out.flagged = true;
    std::size_t count = 0;
    for (std::size_t f = 0; f < sequence.frames(); ++f)
      for (std::size_t j = 0; j < sequence.joints(); ++j)
        if (sequence.visible(f, j)) {
          out.center_offset += sequence.position(f, j);
          ++count;
        }
    if (count == 0) {
      for (std::size_t f = 0; f < sequence.frames(); ++f)
        for (std::size_t j = 0; j < sequence.joints(); ++j)
          out.center_offset += sequence.position(f, j);
      count = sequence.frames() * sequence.joints();
    }
    out.center_offset /= static_cast<double>(count);
  }
  out.sequence = apply_center(sequence, out.center_offset, out.scale);
  return out;
}

InterpolatedSequence interpolate_invisible(const PoseSequence& sequence) {
  InterpolatedSequence out{sequence, {}};
  PoseSequence& s = out.sequence;
  const std::size_t n = s.frames();
  for (std::size_t j = 0; j < s.joints(); ++j) {
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < n; ++f)
      if (s.visible(f, j)) visible.push_back(f);
    if (visible.empty()) {
      out.never_visible.push_back(j);
      continue;
    }
    for (std::size_t f = 0; f < visible.front(); ++f)
      s.position(f, j) = sequence.position(visible.front(), j);
    for (std::size_t f = visible.back() + 1; f < n; ++f)
      s.position(f, j) = sequence.position(visible.back(), j);
    for (std::size_t k = 0; k + 1 < visible.size(); ++k) {
      const std::size_t t = visible[k];
      const std::size_t m = visible[k + 1] - t;
      if (m < 2) continue;
      const Vector x0 = sequence.position(t, j);
      const Vector x1 = sequence.position(t + m, j);
      for (std::size_t i = 1; i < m; ++i) {
        s.position(t + i, j) =
            static_cast<double>(i) / static_cast<double>(m) * (x1 - x0) + x0;
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> pad_visibility(const std::vector<std::uint8_t>& last_visibility,
                                         std::size_t tau) {
  std::vector<std::uint8_t> out;
  out.reserve(last_visibility.size() * tau);
  for (std::size_t t = 0; t < tau; ++t)
    out.insert(out.end(), last_visibility.begin(), last_visibility.end());
  return out;
}

void apply_visibility_padding(PoseSequence& forecast, const PoseSequence& input) {
  const std::size_t last = input.frames() - 1;
  for (std::size_t t = 0; t < forecast.frames(); ++t)
    for (std::size_t j = 0; j < forecast.joints(); ++j)
      forecast.visibility(t, j) = input.visibility(last, j);
}

PoseSequence boundary_filter(const PoseSequence& prediction, std::pair<double, double> bounds) {
  if (prediction.dims() != 2) {
    throw ValidationError("boundary filtering only applies to 2D predictions");
  }
  const auto [w, h] = bounds;
  PoseSequence out = prediction;
  for (std::size_t f = 0; f < out.frames(); ++f)
    for (std::size_t j = 0; j < out.joints(); ++j) {
      const double x = out.at(f, j, 0);
      const double y = out.at(f, j, 1);
      if (x < 0.0 || x >= w || y < 0.0 || y >= h) out.visibility(f, j) = 0;
    }
  return out;
}

namespace {

MotionSample cut_window(const PoseSequence& seq, std::size_t start, const WindowSpec& spec) {
  MotionSample s;
  s.input = seq.slice(start, spec.input_frames);
  s.target = seq.slice(start + spec.input_frames, spec.output_frames);
  s.center_offset = Vector::Zero(static_cast<Eigen::Index>(seq.dims()));
  s.scale = 1.0;
  s.source_id = seq.sequence_id;
  s.start_frame = start;
  return s;
}

}  // namespace

std::vector<MotionSample> extend_and_window(const Dataset& dataset, const WindowSpec& spec,
                                            std::mt19937_64& rng) {
  spec.validate();
  // Group by video id, keeping first-appearance order of videos.
  std::vector<std::string> order;
  std::map<std::string, PoseSequence> groups;
  for (const auto& seq : dataset.sequences) {
    auto it = groups.find(seq.video_id);
    if (it == groups.end()) {
      order.push_back(seq.video_id);
      PoseSequence start = seq;
      start.sequence_id = seq.video_id;
      groups.emplace(seq.video_id, std::move(start));
    } else {
      it->second = it->second.concat(seq);
    }
  }
  std::vector<MotionSample> out;
  for (const auto& vid : order) {
    const PoseSequence& seq = groups.at(vid);
    if (seq.frames() < spec.total()) {
      std::cerr << "warning: video '" << vid << "' has " << seq.frames()
                << " frames, fewer than one window; skipped\n";
      continue;
    }
    const std::size_t starts = seq.frames() - spec.total() + 1;
    const std::size_t count = (starts + spec.stride - 1) / spec.stride;
    if (spec.random_start) {
      std::uniform_int_distribution<std::size_t> pick(0, starts - 1);
      for (std::size_t i = 0; i < count; ++i) out.push_back(cut_window(seq, pick(rng), spec));
    } else {
      for (std::size_t i = 0; i < count; ++i)
        out.push_back(cut_window(seq, i * spec.stride, spec));
    }
  }
  return out;
}

std::vector<MotionSample> evaluation_windows(const Dataset& dataset, const WindowSpec& spec) {
  spec.validate();
  std::vector<MotionSample> out;
  for (const auto& seq : dataset.sequences) {
    if (seq.frames() < spec.total()) continue;
    for (std::size_t start = 0; start + spec.total() <= seq.frames(); start += spec.stride)
      out.push_back(cut_window(seq, start, spec));
  }
  return out;
}

MotionSample reverse_augment(const MotionSample& sample) {
  const PoseSequence full = sample.input.concat(sample.target);
  const std::size_t n = full.frames();
  PoseSequence reversed = full;
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t j = 0; j < full.joints(); ++j) {
      reversed.position(f, j) = full.position(n - 1 - f, j);
      reversed.visibility(f, j) = full.visibility(n - 1 - f, j);
    }
  MotionSample out = sample;
  out.input = reversed.slice(0, sample.input.frames());
  out.target = reversed.slice(sample.input.frames(), sample.target.frames());
  return out;
}

MotionSample flip_augment(const MotionSample& sample, const SkeletonSpec& skeleton,
                          std::size_t axis) {
  if (axis >= sample.dims()) throw ValidationError("flip axis out of range");
  auto flip = [&](const PoseSequence& seq) {
    PoseSequence out = seq;
    for (std::size_t f = 0; f < seq.frames(); ++f)
      for (std::size_t j = 0; j < seq.joints(); ++j) out.at(f, j, axis) = -seq.at(f, j, axis);
    for (auto [a, b] : skeleton.left_right_swap) {
      for (std::size_t f = 0; f < seq.frames(); ++f) {
        const Vector pa = out.position(f, a);
        out.position(f, a) = out.position(f, b);
        out.position(f, b) = pa;
        std::swap(out.visibility(f, a), out.visibility(f, b));
      }
    }
    return out;
  };
  MotionSample out = sample;
  out.input = flip(sample.input);
  out.target = flip(sample.target);
  return out;
}

MotionSample normalize_sample(const MotionSample& sample, const SkeletonSpec& skeleton,
                              const PreprocessConfig& cfg) {
  CenteredSequence c = center_and_scale(sample.input, skeleton, cfg);
  MotionSample out = sample;
  out.input = std::move(c.sequence);
  out.target = apply_center(sample.target, c.center_offset, c.scale);
  out.center_offset = c.center_offset;
  out.scale = c.scale;
  return out;
}

PoseSequence denormalize(const PoseSequence& sequence, const MotionSample& sample) {
  return undo_center(sequence, sample.center_offset, sample.scale);
}

}  // namespace motionfc
