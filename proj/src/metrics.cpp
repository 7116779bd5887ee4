#include "motionfc/metrics.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

namespace motionfc {

std::string to_string(MetricKind kind) { return kind == MetricKind::vim ? "vim" : "vam"; }

MetricKind parse_metric_kind(const std::string& s) {
  if (s == "vim") return MetricKind::vim;
  if (s == "vam") return MetricKind::vam;
  throw ValidationError("unknown metric '" + s + "' (expected vim or vam)");
}

MetricConfig MetricConfig::defaults_for(std::size_t dims) {
  MetricConfig cfg;
  if (dims == 2) {
    cfg.kind = MetricKind::vam;
    cfg.offsets_ms = {80, 160, 320, 400, 560};
    cfg.unit_scale = 1.0;
  }
  return cfg;
}

void MetricConfig::validate() const {
  if (!(beta >= 0.0)) throw ValidationError("metric.beta must be non-negative");
  if (!(unit_scale > 0.0)) throw ValidationError("metric.unit_scale must be positive");
  if (offsets_ms.empty()) throw ValidationError("metric.offsets_ms must not be empty");
  for (double o : offsets_ms) {
    if (!(o > 0.0)) throw ValidationError("metric offsets must be positive");
  }
}

ForecastStep offset_to_frame(double offset_ms, double frame_interval_ms, std::size_t tau,
                             bool* clamped) {
  if (!(offset_ms > 0.0)) throw ValidationError("offset must be positive");
  if (!(frame_interval_ms > 0.0)) throw ValidationError("frame interval must be positive");
  if (tau == 0) throw ValidationError("forecast horizon must be positive");
  const double raw = std::round(offset_ms / frame_interval_ms);
  const double frame = std::clamp(raw, 1.0, static_cast<double>(tau));
  if (clamped) *clamped = frame != raw;
  return {static_cast<std::size_t>(frame)};
}

namespace {

void check_pair(const PoseSequence& pred, const PoseSequence& gt, ForecastStep step) {
  if (pred.joints() != gt.joints() || pred.dims() != gt.dims()) {
    throw ValidationError("prediction and ground truth shapes differ");
  }
  if (step.value < 1 || step.index() >= pred.frames() || step.index() >= gt.frames()) {
    throw ValidationError("forecast step " + std::to_string(step.value) + " out of range");
  }
}

}  // namespace

double vim(const PoseSequence& pred, const PoseSequence& gt, ForecastStep step,
           const MetricConfig& cfg) {
  check_pair(pred, gt, step);
  const std::size_t f = step.index();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < gt.joints(); ++j) {
    if (!gt.visible(f, j)) continue;
    sum += (pred.position(f, j) - gt.position(f, j)).norm();
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count) * cfg.unit_scale;
}

double vam(const PoseSequence& pred, const PoseSequence& gt, ForecastStep step,
           const MetricConfig& cfg) {
  check_pair(pred, gt, step);
  const std::size_t f = step.index();
  double sum = 0.0;
  for (std::size_t j = 0; j < gt.joints(); ++j) {
    const bool pv = pred.visible(f, j);
    const bool gv = gt.visible(f, j);
    if (pv != gv) {
      sum += cfg.beta;
    } else if (gv) {
      sum += (pred.position(f, j) - gt.position(f, j)).norm() * cfg.unit_scale;
    }
  }
  return sum / static_cast<double>(gt.joints());
}

double frame_metric(const PoseSequence& pred, const PoseSequence& gt, ForecastStep step,
                    const MetricConfig& cfg) {
  return cfg.kind == MetricKind::vim ? vim(pred, gt, step, cfg) : vam(pred, gt, step, cfg);
}

MetricReport evaluate_pairs(const std::vector<PoseSequence>& predictions,
                            const std::vector<PoseSequence>& ground_truth,
                            const std::vector<std::string>& ids, double frame_interval_ms,
                            const MetricConfig& cfg) {
  cfg.validate();
  if (predictions.size() != ground_truth.size() || predictions.size() != ids.size()) {
    throw ValidationError("prediction and ground-truth counts differ");
  }
  MetricReport report;
  report.kind = cfg.kind;
  report.offsets_ms = cfg.offsets_ms;
  report.sample_ids = ids;
  if (predictions.empty()) throw ValidationError("nothing to evaluate");
  const std::size_t tau = predictions.front().frames();
  for (double o : cfg.offsets_ms) {
    bool clamped = false;
    report.frames.push_back(offset_to_frame(o, frame_interval_ms, tau, &clamped).value);
    if (clamped) {
      std::ostringstream msg;
      msg << "offset " << o << " ms lies outside the " << tau << "-frame horizon; clamped";
      report.warnings.push_back(msg.str());
    }
  }
  report.values.assign(cfg.offsets_ms.size(), 0.0);
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    if (predictions[s].frames() != tau) throw ValidationError("forecasts differ in length");
    std::vector<double> row;
    for (std::size_t k = 0; k < report.frames.size(); ++k) {
      const ForecastStep step{report.frames[k]};
      row.push_back(frame_metric(predictions[s], ground_truth[s], step, cfg));
      if (cfg.kind == MetricKind::vim) {
        bool any = false;
        for (std::size_t j = 0; j < ground_truth[s].joints(); ++j)
          any = any || ground_truth[s].visible(step.index(), j);
        if (!any) ++report.empty_frames;
      }
      report.values[k] += row.back();
    }
    report.per_sample.push_back(std::move(row));
  }
  for (double& v : report.values) v /= static_cast<double>(predictions.size());
  double total = 0.0;
  for (double v : report.values) total += v;
  report.average = total / static_cast<double>(report.values.size());
  if (report.empty_frames > 0) {
    report.warnings.push_back(std::to_string(report.empty_frames) +
                              " evaluated frames had no visible ground-truth joint (scored 0)");
  }
  return report;
}

MetricReport evaluate(const PredictionSet& predictions, const Dataset& ground_truth,
                      const MetricConfig& cfg) {
  std::map<std::string, const PoseSequence*> by_id;
  for (const auto& s : ground_truth.sequences) by_id[s.sequence_id] = &s;
  std::vector<std::string> unmatched;
  std::vector<PoseSequence> preds, gts;
  std::vector<std::string> ids;
  for (const auto& p : predictions.predictions) {
    auto it = by_id.find(p.source_input_id);
    const std::size_t tau = p.forecast.frames();
    if (it == by_id.end() || p.forecast_start + tau > it->second->frames()) {
      unmatched.push_back(p.source_input_id + "@" + std::to_string(p.forecast_start));
      continue;
    }
    preds.push_back(p.forecast);
    gts.push_back(it->second->slice(p.forecast_start, tau));
    ids.push_back(p.source_input_id + "@" + std::to_string(p.forecast_start));
  }
  if (!unmatched.empty()) {
    std::string msg = "predictions without ground truth:";
    for (const auto& u : unmatched) msg += " " + u;
    throw ValidationError(msg);
  }
  return evaluate_pairs(preds, gts, ids, ground_truth.frame_interval_ms, cfg);
}

PoseSequence zero_velocity_baseline(const MotionSample& sample) {
  const PoseSequence& in = sample.input;
  const PoseSequence last = in.slice(in.frames() - 1, 1);
  PoseSequence out = last;
  for (std::size_t t = 1; t < sample.target.frames(); ++t) out = out.concat(last);
  return out;
}

std::string report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["metric"] = to_string(r.kind);
  j["offsets_ms"] = r.offsets_ms;
  j["frames"] = r.frames;
  j["values"] = r.values;
  j["average"] = r.average;
  j["empty_frames"] = r.empty_frames;
  j["warnings"] = r.warnings;
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t s = 0; s < r.per_sample.size(); ++s)
    samples.push_back({{"id", r.sample_ids[s]}, {"values", r.per_sample[s]}});
  j["per_sample"] = std::move(samples);
  return j.dump(2) + "\n";
}

std::string report_to_csv(const MetricReport& r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "offset_ms,frame," << to_string(r.kind) << "\n";
  for (std::size_t k = 0; k < r.values.size(); ++k)
    out << r.offsets_ms[k] << "," << r.frames[k] << "," << r.values[k] << "\n";
  out << "average,," << r.average << "\n";
  return out.str();
}

std::string report_to_svg(const MetricReport& r) {
  const double width = 480, height = 300, margin = 40;
  double top = 0.0;
  for (double v : r.values) top = std::max(top, v);
  if (top <= 0.0) top = 1.0;
  const double bar_space = (width - 2 * margin) / static_cast<double>(std::max<std::size_t>(1, r.values.size()));
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << to_string(r.kind) << " per offset (average " << r.average << ")</text>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < r.values.size(); ++k) {
    const double h = (height - 2 * margin - 20) * r.values[k] / top;
    const double x = margin + bar_space * static_cast<double>(k) + bar_space * 0.15;
    const double y = height - margin - h;
    out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_space * 0.7
        << "\" height=\"" << h << "\" fill=\"steelblue\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << y - 4
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << r.values[k] << "</text>\n";
    out << "<text x=\"" << x << "\" y=\"" << height - margin + 14
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << r.offsets_ms[k] << " ms</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_report(const MetricReport& report, const std::filesystem::path& stem) {
  auto write = [](const std::filesystem::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out << body;
  };
  write(stem.string() + ".json", report_to_json(report));
  write(stem.string() + ".csv", report_to_csv(report));
  write(stem.string() + ".svg", report_to_svg(report));
}

}  // namespace motionfc
