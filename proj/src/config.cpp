#include "motionfc/config.hpp"

#include <fstream>
#include <sstream>

namespace motionfc {

using nlohmann::json;

json default_run_config() {
  return json::parse(R"({
    "seed": 0,
    "epochs": 50,
    "batch_size": 16,
    "output_dir": "run",
    "data": {"train": null, "validation": null},
    "model": {
      "hidden_channels": 256,
      "num_blocks": 12,
      "dropout": 0.5,
      "node_mode": "one_node_per_joint",
      "use_norm": true,
      "norm_momentum": 0.1,
      "dct_coefficients": null
    },
    "preprocess": {"scale": null, "interpolate_invisible": true, "boundary_filter": true},
    "window": {"input_frames": 16, "output_frames": 14, "stride": 1, "random_start": false,
               "eval_stride": 1},
    "input_repr": null,
    "loss": {"ohkm_enabled": true, "ohkm_k": null, "smooth_l1_beta": 1.0},
    "curriculum": {"enabled": true, "epochs_per_frame": 2},
    "optimizer": {"learning_rate": 0.001, "decay": 0.95, "beta1": 0.9, "beta2": 0.999,
                  "epsilon": 1e-8},
    "augment": {"reverse": null, "flip": null, "flip_axis": 0, "flip_probability": 0.5},
    "short_term_frames": null,
    "metric": {"kind": null, "beta": 200, "offsets_ms": null, "unit_scale": null},
    "fusion": {"short_frames": 4},
    "sweep": {"scale": null, "num_blocks": [12], "hidden_channels": [256], "jobs": 1}
  })");
}

namespace {

bool compatible(const json& slot, const json& value) {
  if (slot.is_null() || value.is_null()) return true;
  if (slot.is_number()) return value.is_number();
  if (slot.is_object()) return value.is_object();
  return slot.type() == value.type();
}

}  // namespace

void merge_config(json& base, const json& overrides, const std::string& prefix) {
  if (!overrides.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    const std::string dotted = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ValidationError("unknown config key '" + dotted + "'");
    json& slot = base[key];
    if (!compatible(slot, value)) {
      throw ValidationError("config key '" + dotted + "' has the wrong type");
    }
    if (slot.is_object()) {
      merge_config(slot, value, dotted);
    } else {
      slot = value;
    }
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  // Build the nested override object from the dotted path.
  json patch = value;
  std::string path = key;
  while (true) {
    const auto dot = path.rfind('.');
    const std::string leaf = dot == std::string::npos ? path : path.substr(dot + 1);
    if (leaf.empty()) throw ValidationError("override key '" + key + "' is malformed");
    patch = json{{leaf, patch}};
    if (dot == std::string::npos) break;
    path = path.substr(0, dot);
  }
  merge_config(config, patch);
}

json load_run_config(const std::optional<std::filesystem::path>& path,
                     const std::vector<std::string>& overrides) {
  json config = default_run_config();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ValidationError("cannot open config " + path->string());
    std::stringstream buf;
    buf << in.rdbuf();
    json user;
    try {
      user = json::parse(buf.str());
    } catch (const json::exception& e) {
      throw ValidationError("config " + path->string() + " is not valid JSON: " + e.what());
    }
    merge_config(config, user);
  }
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  const json& v = j.at(key);
  return v.is_null() ? fallback : v.get<T>();
}

}  // namespace

RunConfig resolve_run_config(const json& config, std::size_t joints, std::size_t dims) {
  RunConfig run;
  try {
    TrainConfig& t = run.train;
    t = TrainConfig::defaults_for(joints, dims);
    run.seed = config.at("seed").get<std::uint64_t>();
    t.epochs = config.at("epochs").get<std::size_t>();
    t.batch_size = config.at("batch_size").get<std::size_t>();
    run.output_dir = config.at("output_dir").get<std::string>();

    const json& data = config.at("data");
    if (!data.at("train").is_null()) run.train_data = data.at("train").get<std::string>();
    if (!data.at("validation").is_null()) {
      run.validation_data = data.at("validation").get<std::string>();
    }

    const json& w = config.at("window");
    t.window.input_frames = w.at("input_frames").get<std::size_t>();
    t.window.output_frames = w.at("output_frames").get<std::size_t>();
    t.window.stride = w.at("stride").get<std::size_t>();
    t.window.random_start = w.at("random_start").get<bool>();
    t.eval_stride = w.at("eval_stride").get<std::size_t>();

    const json& m = config.at("model");
    t.model.hidden_channels = m.at("hidden_channels").get<std::size_t>();
    t.model.num_blocks = m.at("num_blocks").get<std::size_t>();
    t.model.dropout_rate = m.at("dropout").get<double>();
    t.model.node_mode = parse_node_mode(m.at("node_mode").get<std::string>());
    t.model.use_norm = m.at("use_norm").get<bool>();
    t.model.norm_momentum = m.at("norm_momentum").get<double>();
    t.model.coefficients = get_or<std::size_t>(m, "dct_coefficients", t.window.total());

    const json& p = config.at("preprocess");
    t.preprocess.scale = get_or<double>(p, "scale", t.preprocess.scale);
    t.preprocess.interpolate_invisible = p.at("interpolate_invisible").get<bool>();
    t.preprocess.boundary_filter = p.at("boundary_filter").get<bool>();

    if (!config.at("input_repr").is_null()) {
      t.input_repr = parse_input_repr(config.at("input_repr").get<std::string>());
    }

    const json& l = config.at("loss");
    t.loss.ohkm_enabled = l.at("ohkm_enabled").get<bool>();
    t.loss.ohkm_k = get_or<std::size_t>(l, "ohkm_k", t.loss.ohkm_k);
    t.loss.smooth_l1_beta = l.at("smooth_l1_beta").get<double>();

    const json& c = config.at("curriculum");
    t.curriculum.enabled = c.at("enabled").get<bool>();
    t.curriculum.epochs_per_frame = c.at("epochs_per_frame").get<std::size_t>();

    const json& o = config.at("optimizer");
    t.optimizer.learning_rate = o.at("learning_rate").get<double>();
    t.optimizer.decay = o.at("decay").get<double>();
    t.optimizer.beta1 = o.at("beta1").get<double>();
    t.optimizer.beta2 = o.at("beta2").get<double>();
    t.optimizer.epsilon = o.at("epsilon").get<double>();

    const json& a = config.at("augment");
    t.augment.reverse = get_or<bool>(a, "reverse", t.augment.reverse);
    t.augment.flip = get_or<bool>(a, "flip", t.augment.flip);
    t.augment.flip_axis = a.at("flip_axis").get<std::size_t>();
    t.augment.flip_probability = a.at("flip_probability").get<double>();

    if (!config.at("short_term_frames").is_null()) {
      t.short_term_frames = config.at("short_term_frames").get<std::size_t>();
    }

    const json& mt = config.at("metric");
    if (!mt.at("kind").is_null()) t.metric.kind = parse_metric_kind(mt.at("kind").get<std::string>());
    t.metric.beta = mt.at("beta").get<double>();
    t.metric.offsets_ms = get_or<std::vector<double>>(mt, "offsets_ms", t.metric.offsets_ms);
    t.metric.unit_scale = get_or<double>(mt, "unit_scale", t.metric.unit_scale);

    run.fusion.short_frames = config.at("fusion").at("short_frames").get<std::size_t>();

    const json& s = config.at("sweep");
    run.sweep.scale = get_or<std::vector<double>>(s, "scale", {t.preprocess.scale});
    run.sweep.num_blocks = s.at("num_blocks").get<std::vector<std::size_t>>();
    run.sweep.hidden_channels = s.at("hidden_channels").get<std::vector<std::size_t>>();
    run.sweep.jobs = s.at("jobs").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid config value: ") + e.what());
  }

  run.train.validate();
  run.fusion.validate(run.train.window.output_frames);
  if (run.sweep.jobs < 1) throw ValidationError("sweep.jobs must be at least 1");

  const TrainConfig& t = run.train;
  json r = config;
  r["model"]["dct_coefficients"] = t.model.coefficients;
  r["preprocess"]["scale"] = t.preprocess.scale;
  r["input_repr"] = to_string(t.input_repr);
  r["loss"]["ohkm_k"] = t.loss.ohkm_k;
  r["augment"]["reverse"] = t.augment.reverse;
  r["augment"]["flip"] = t.augment.flip;
  r["metric"]["kind"] = to_string(t.metric.kind);
  r["metric"]["offsets_ms"] = t.metric.offsets_ms;
  r["metric"]["unit_scale"] = t.metric.unit_scale;
  r["sweep"]["scale"] = run.sweep.scale;
  run.resolved = std::move(r);
  return run;
}

}  // namespace motionfc
