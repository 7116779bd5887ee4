#include "motionfc/predict.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "motionfc/serialize.hpp"

namespace motionfc {

using nlohmann::json;

DctBasis Forecaster::basis() const {
  return make_basis(input_frames + output_frames, model.config().coefficients);
}

void save_forecaster(const Forecaster& f, const std::filesystem::path& path) {
  json doc = model_to_json(f.model);
  doc["pipeline"] = {{"scale", f.preprocess.scale},
                     {"interpolate_invisible", f.preprocess.interpolate_invisible},
                     {"boundary_filter", f.preprocess.boundary_filter},
                     {"input_repr", to_string(f.input_repr)},
                     {"input_frames", f.input_frames},
                     {"output_frames", f.output_frames}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Forecaster load_forecaster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ValidationError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  Forecaster f;
  f.model = model_from_json(doc);
  try {
    const json& p = doc.at("pipeline");
    f.preprocess.scale = p.at("scale").get<double>();
    f.preprocess.interpolate_invisible = p.at("interpolate_invisible").get<bool>();
    f.preprocess.boundary_filter = p.at("boundary_filter").get<bool>();
    f.input_repr = parse_input_repr(p.at("input_repr").get<std::string>());
    f.input_frames = p.at("input_frames").get<std::size_t>();
    f.output_frames = p.at("output_frames").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint " + path.string() + " lacks pipeline settings: " + e.what());
  }
  f.preprocess.validate();
  if (f.model.config().coefficients > f.input_frames + f.output_frames) {
    throw ValidationError("checkpoint keeps more DCT coefficients than window frames");
  }
  return f;
}

PoseSequence run_inference(const Forecaster& f, const PoseSequence& raw_input,
                           const SkeletonSpec& skeleton) {
  if (raw_input.frames() != f.input_frames) {
    throw ValidationError("input window has " + std::to_string(raw_input.frames()) +
                          " frames, model expects " + std::to_string(f.input_frames));
  }
  const PoseSequence filled = f.preprocess.interpolate_invisible
                                  ? interpolate_invisible(raw_input).sequence
                                  : raw_input;
  MotionSample sample;
  sample.input = filled;
  sample.target = PoseSequence(f.output_frames, raw_input.joints(), raw_input.dims(),
                               raw_input.frame_interval_ms);
  sample.center_offset = Vector::Zero(static_cast<Eigen::Index>(raw_input.dims()));
  const MotionSample normalized = normalize_sample(sample, skeleton, f.preprocess);
  PoseSequence forecast =
      denormalize(predict(f.model, normalized, f.basis(), f.input_repr), normalized);
  forecast.frame_interval_ms = raw_input.frame_interval_ms;
  forecast.sequence_id = raw_input.sequence_id;
  forecast.video_id = raw_input.video_id;
  apply_visibility_padding(forecast, raw_input);
  if (raw_input.dims() == 2 && f.preprocess.boundary_filter && skeleton.image_bounds) {
    forecast = boundary_filter(forecast, *skeleton.image_bounds);
  }
  return forecast;
}

void FusionConfig::validate(std::size_t tau) const {
  if (short_frames < 1 || short_frames > tau) {
    throw ValidationError("fusion.short_frames must be in [1, " + std::to_string(tau) + "]");
  }
}

PoseSequence fuse(const PoseSequence& short_pred, const PoseSequence& long_pred,
                  const FusionConfig& cfg) {
  if (short_pred.frames() != long_pred.frames() || short_pred.joints() != long_pred.joints() ||
      short_pred.dims() != long_pred.dims()) {
    throw ValidationError("cannot fuse predictions of different shape");
  }
  cfg.validate(short_pred.frames());
  return short_pred.slice(0, cfg.short_frames)
      .concat(long_pred.slice(cfg.short_frames, long_pred.frames() - cfg.short_frames));
}

PoseSequence average_predictions(const std::vector<PoseSequence>& preds) {
  if (preds.empty()) throw ValidationError("nothing to average");
  PoseSequence out = preds.front();
  for (std::size_t f = 0; f < out.frames(); ++f)
    for (std::size_t j = 0; j < out.joints(); ++j) {
      Vector sum = Vector::Zero(static_cast<Eigen::Index>(out.dims()));
      std::size_t votes = 0;
      for (const auto& p : preds) {
        if (p.frames() != out.frames() || p.joints() != out.joints() || p.dims() != out.dims()) {
          throw ValidationError("cannot average predictions of different shape");
        }
        sum += p.position(f, j);
        votes += p.visibility(f, j);
      }
      out.position(f, j) = sum / static_cast<double>(preds.size());
      out.visibility(f, j) = 2 * votes >= preds.size() ? 1 : 0;
    }
  return out;
}

FusedReport fuse_reports(const std::vector<std::pair<std::string, MetricReport>>& reports) {
  if (reports.empty()) throw ValidationError("no reports to fuse");
  FusedReport out;
  out.offsets_ms = reports.front().second.offsets_ms;
  for (const auto& [name, r] : reports) {
    if (r.offsets_ms != out.offsets_ms) {
      throw ValidationError("report '" + name + "' uses different offsets");
    }
  }
  for (std::size_t k = 0; k < out.offsets_ms.size(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    std::string from;
    for (const auto& [name, r] : reports) {
      if (r.values[k] < best) {
        best = r.values[k];
        from = name;
      }
    }
    out.values.push_back(best);
    out.provenance.push_back(from);
    out.average += best;
  }
  out.average /= static_cast<double>(out.values.size());
  return out;
}

std::string fused_report_to_json(const FusedReport& r) {
  json j;
  j["offsets_ms"] = r.offsets_ms;
  j["values"] = r.values;
  j["provenance"] = r.provenance;
  j["average"] = r.average;
  return j.dump(2) + "\n";
}

namespace {

WindowSpec eval_spec(const Forecaster& f, std::size_t stride) {
  WindowSpec spec;
  spec.input_frames = f.input_frames;
  spec.output_frames = f.output_frames;
  spec.stride = stride;
  return spec;
}

PredictionSet empty_set(const Dataset& dataset) {
  PredictionSet out;
  out.skeleton = dataset.skeleton;
  out.dims = dataset.dims;
  out.frame_interval_ms = dataset.frame_interval_ms;
  return out;
}

Prediction make_prediction(PoseSequence forecast, const MotionSample& w) {
  Prediction p;
  p.forecast = std::move(forecast);
  p.source_input_id = w.source_id;
  p.forecast_start = w.start_frame + w.input.frames();
  return p;
}

}  // namespace

PredictionSet predict_dataset(const Forecaster& f, const Dataset& dataset, std::size_t stride) {
  PredictionSet out = empty_set(dataset);
  for (const auto& w : evaluation_windows(dataset, eval_spec(f, stride)))
    out.predictions.push_back(make_prediction(run_inference(f, w.input, dataset.skeleton), w));
  return out;
}

PredictionSet predict_dataset_fused(const Forecaster& short_model, const Forecaster& long_model,
                                    const std::vector<Forecaster>& extra_models,
                                    const Dataset& dataset, std::size_t stride,
                                    const FusionConfig& cfg) {
  if (short_model.input_frames != long_model.input_frames ||
      short_model.output_frames != long_model.output_frames) {
    throw ValidationError("short- and long-term models use different windows");
  }
  PredictionSet out = empty_set(dataset);
  for (const auto& w : evaluation_windows(dataset, eval_spec(long_model, stride))) {
    PoseSequence long_pred = run_inference(long_model, w.input, dataset.skeleton);
    if (!extra_models.empty()) {
      std::vector<PoseSequence> all{long_pred};
      for (const auto& m : extra_models) all.push_back(run_inference(m, w.input, dataset.skeleton));
      long_pred = average_predictions(all);
    }
    const PoseSequence short_pred = run_inference(short_model, w.input, dataset.skeleton);
    out.predictions.push_back(make_prediction(fuse(short_pred, long_pred, cfg), w));
  }
  return out;
}

}  // namespace motionfc
