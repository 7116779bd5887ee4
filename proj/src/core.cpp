#include "motionfc/core.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace motionfc {

using nlohmann::json;

PoseSequence::PoseSequence(std::size_t frames, std::size_t joints, std::size_t dims,
                           double frame_interval)
    : frame_interval_ms(frame_interval),
      frames_(frames),
      joints_(joints),
      dims_(dims),
      coords_(frames * joints * dims, 0.0),
      visibility_(frames * joints, 1) {}

PoseSequence PoseSequence::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > frames_) {
    throw ValidationError("slice [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") exceeds " +
                          std::to_string(frames_) + " frames");
  }
  PoseSequence out(count, joints_, dims_, frame_interval_ms);
  out.sequence_id = sequence_id;
  out.video_id = video_id;
  const std::size_t frame_values = joints_ * dims_;
  std::copy_n(coords_.begin() + static_cast<std::ptrdiff_t>(begin * frame_values),
              count * frame_values, out.coords_.begin());
  std::copy_n(visibility_.begin() + static_cast<std::ptrdiff_t>(begin * joints_),
              count * joints_, out.visibility_.begin());
  return out;
}

PoseSequence PoseSequence::concat(const PoseSequence& tail) const {
  if (tail.joints_ != joints_ || tail.dims_ != dims_) {
    throw ValidationError("cannot concatenate sequences of different shape");
  }
  PoseSequence out = *this;
  out.frames_ += tail.frames_;
  out.coords_.insert(out.coords_.end(), tail.coords_.begin(), tail.coords_.end());
  out.visibility_.insert(out.visibility_.end(), tail.visibility_.begin(),
                         tail.visibility_.end());
  return out;
}

void PoseSequence::validate() const {
  if (frames_ < 1 || joints_ < 1) {
    throw ValidationError("sequence '" + sequence_id + "' must have at least one frame and joint");
  }
  if (dims_ != 2 && dims_ != 3) {
    throw ValidationError("sequence '" + sequence_id + "' has dims " +
                          std::to_string(dims_) + ", expected 2 or 3");
  }
  if (!(frame_interval_ms > 0.0)) {
    throw ValidationError("frame_interval_ms must be positive");
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) {
      throw ValidationError("sequence '" + sequence_id + "' has a non-finite coordinate");
    }
  }
  for (auto v : visibility_) {
    if (v > 1) {
      throw ValidationError("sequence '" + sequence_id + "' has visibility outside {0,1}");
    }
    if (dims_ == 3 && v != 1) {
      throw ValidationError("sequence '" + sequence_id +
                            "' is 3D but has invisible joints");
    }
  }
}

void MotionSample::validate() const {
  if (input.joints() != target.joints() || input.dims() != target.dims()) {
    throw ValidationError("sample input and target shapes differ");
  }
  if (center_offset.size() != static_cast<Eigen::Index>(input.dims())) {
    throw ValidationError("sample center offset must have one entry per dimension");
  }
  if (!(scale > 0.0)) {
    throw ValidationError("sample scale must be positive");
  }
}

void SkeletonSpec::validate() const {
  const std::size_t j = joint_names.size();
  if (j == 0) {
    throw ValidationError("skeleton has no joints");
  }
  if (neck_index >= j) {
    throw ValidationError("neck_index " + std::to_string(neck_index) + " out of range");
  }
  std::vector<bool> used(j, false);
  for (auto [a, b] : left_right_swap) {
    if (a >= j || b >= j || a == b || used[a] || used[b]) {
      throw ValidationError("left_right_swap pairs must be disjoint and in range");
    }
    used[a] = used[b] = true;
  }
  if (image_bounds && !(image_bounds->first > 0 && image_bounds->second > 0)) {
    throw ValidationError("image_bounds must be positive");
  }
}

void Dataset::validate() const {
  skeleton.validate();
  if (dims != 2 && dims != 3) {
    throw ValidationError("dims must be 2 or 3");
  }
  if (!(frame_interval_ms > 0.0)) {
    throw ValidationError("frame_interval_ms must be positive");
  }
  for (const auto& s : sequences) {
    if (s.joints() != skeleton.joints() || s.dims() != dims) {
      throw ValidationError("sequence '" + s.sequence_id +
                            "' does not match the dataset joint count or dims");
    }
    s.validate();
  }
}

namespace {

json header_json(const SkeletonSpec& skeleton, std::size_t dims, double interval) {
  json h;
  h["joints"] = skeleton.joint_names;
  h["neck_index"] = skeleton.neck_index;
  h["dims"] = dims;
  h["frame_interval_ms"] = interval;
  if (skeleton.image_bounds) {
    h["image_bounds"] = {skeleton.image_bounds->first, skeleton.image_bounds->second};
  } else {
    h["image_bounds"] = nullptr;
  }
  if (skeleton.left_right_swap.empty()) {
    h["left_right_swap"] = nullptr;
  } else {
    json pairs = json::array();
    for (auto [a, b] : skeleton.left_right_swap) pairs.push_back({a, b});
    h["left_right_swap"] = pairs;
  }
  return h;
}

struct Header {
  SkeletonSpec skeleton;
  std::size_t dims = 0;
  double frame_interval_ms = 0.0;
};

Header parse_header(const json& h) {
  Header out;
  out.skeleton.joint_names = h.at("joints").get<std::vector<std::string>>();
  out.skeleton.neck_index = h.at("neck_index").get<std::size_t>();
  out.dims = h.at("dims").get<std::size_t>();
  out.frame_interval_ms = h.at("frame_interval_ms").get<double>();
  if (h.contains("image_bounds") && !h["image_bounds"].is_null()) {
    const auto& b = h["image_bounds"];
    if (!b.is_array() || b.size() != 2) throw ValidationError("image_bounds must be [w, h]");
    out.skeleton.image_bounds = std::make_pair(b[0].get<double>(), b[1].get<double>());
  }
  if (h.contains("left_right_swap") && !h["left_right_swap"].is_null()) {
    for (const auto& p : h["left_right_swap"]) {
      if (!p.is_array() || p.size() != 2) throw ValidationError("swap pair must be [i, j]");
      out.skeleton.left_right_swap.emplace_back(p[0].get<std::size_t>(),
                                                p[1].get<std::size_t>());
    }
  }
  out.skeleton.validate();
  if (out.dims != 2 && out.dims != 3) throw ValidationError("dims must be 2 or 3");
  if (!(out.frame_interval_ms > 0.0)) throw ValidationError("frame_interval_ms must be positive");
  return out;
}

json sequence_json(const PoseSequence& s) {
  json frames = json::array();
  json vis = json::array();
  for (std::size_t f = 0; f < s.frames(); ++f) {
    json frame = json::array();
    json fv = json::array();
    for (std::size_t j = 0; j < s.joints(); ++j) {
      json joint = json::array();
      for (std::size_t d = 0; d < s.dims(); ++d) {
        const double c = s.at(f, j, d);
        if (!std::isfinite(c)) {
          throw ValidationError("refusing to write non-finite coordinate in sequence '" +
                                s.sequence_id + "'");
        }
        joint.push_back(c);
      }
      frame.push_back(std::move(joint));
      fv.push_back(static_cast<int>(s.visibility(f, j)));
    }
    frames.push_back(std::move(frame));
    vis.push_back(std::move(fv));
  }
  json out;
  out["sequence_id"] = s.sequence_id;
  out["video_id"] = s.video_id;
  out["frames"] = std::move(frames);
  out["visibility"] = std::move(vis);
  return out;
}

PoseSequence parse_sequence(const json& rec, const Header& header) {
  const auto& frames = rec.at("frames");
  const auto& vis = rec.at("visibility");
  if (!frames.is_array() || !vis.is_array() || frames.size() != vis.size()) {
    throw ValidationError("frames and visibility must be arrays of equal length");
  }
  const std::size_t n = frames.size();
  const std::size_t jn = header.skeleton.joints();
  PoseSequence s(n, jn, header.dims, header.frame_interval_ms);
  s.sequence_id = rec.at("sequence_id").get<std::string>();
  s.video_id = rec.at("video_id").get<std::string>();
  for (std::size_t f = 0; f < n; ++f) {
    if (frames[f].size() != jn || vis[f].size() != jn) {
      throw ValidationError("frame " + std::to_string(f) + " has " +
                            std::to_string(frames[f].size()) + " joints, expected " +
                            std::to_string(jn));
    }
    for (std::size_t j = 0; j < jn; ++j) {
      const auto& joint = frames[f][j];
      if (joint.size() != header.dims) {
        throw ValidationError("frame " + std::to_string(f) + " joint " + std::to_string(j) +
                              " has " + std::to_string(joint.size()) + " dims, expected " +
                              std::to_string(header.dims));
      }
      for (std::size_t d = 0; d < header.dims; ++d) s.at(f, j, d) = joint[d].get<double>();
      const int v = vis[f][j].get<int>();
      if (v != 0 && v != 1) {
        throw ValidationError("visibility value " + std::to_string(v) + " outside {0,1}");
      }
      s.visibility(f, j) = static_cast<std::uint8_t>(v);
    }
  }
  s.validate();
  return s;
}

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json rec = json::parse(line);
      fn(rec, !seen_header);
      seen_header = true;
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!seen_header) throw ValidationError(path.string() + ": missing header line");
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ostringstream buf;
  for (const auto& r : records) buf << r.dump() << '\n';
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << buf.str();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
  Dataset ds;
  Header header;
  for_each_record(path, [&](const json& rec, bool is_header) {
    if (is_header) {
      header = parse_header(rec);
      ds.skeleton = header.skeleton;
      ds.dims = header.dims;
      ds.frame_interval_ms = header.frame_interval_ms;
    } else {
      ds.sequences.push_back(parse_sequence(rec, header));
    }
  });
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::vector<json> records;
  records.push_back(header_json(dataset.skeleton, dataset.dims, dataset.frame_interval_ms));
  for (const auto& s : dataset.sequences) records.push_back(sequence_json(s));
  write_lines(path, records);
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  PredictionSet out;
  Header header;
  for_each_record(path, [&](const json& rec, bool is_header) {
    if (is_header) {
      header = parse_header(rec);
      out.skeleton = header.skeleton;
      out.dims = header.dims;
      out.frame_interval_ms = header.frame_interval_ms;
      return;
    }
    Prediction p;
    p.forecast = parse_sequence(rec, header);
    p.source_input_id = rec.at("source_input_id").get<std::string>();
    p.forecast_start = rec.at("forecast_start").get<std::size_t>();
    out.predictions.push_back(std::move(p));
  });
  return out;
}

void save_predictions(const PredictionSet& predictions, const std::filesystem::path& path) {
  std::vector<json> records;
  records.push_back(
      header_json(predictions.skeleton, predictions.dims, predictions.frame_interval_ms));
  for (const auto& p : predictions.predictions) {
    json rec = sequence_json(p.forecast);
    rec["source_input_id"] = p.source_input_id;
    rec["forecast_start"] = p.forecast_start;
    records.push_back(std::move(rec));
  }
  write_lines(path, records);
}

}  // namespace motionfc
