#include "motionfc/serialize.hpp"

#include <algorithm>
#include <sstream>

namespace motionfc {

using nlohmann::json;

namespace {

constexpr const char* kFormatTag = "motionfc-gcn-checkpoint";

}  // namespace

json config_to_json(const GcnConfig& c) {
  return {{"joints", c.joints},
          {"dims", c.dims},
          {"coefficients", c.coefficients},
          {"hidden_channels", c.hidden_channels},
          {"num_blocks", c.num_blocks},
          {"dropout_rate", c.dropout_rate},
          {"node_mode", to_string(c.node_mode)},
          {"use_norm", c.use_norm},
          {"norm_momentum", c.norm_momentum},
          {"norm_epsilon", c.norm_epsilon}};
}

GcnConfig config_from_json(const json& j) {
  GcnConfig c;
  static const char* keys[] = {"joints",      "dims",      "coefficients", "hidden_channels",
                               "num_blocks",  "dropout_rate", "node_mode", "use_norm",
                               "norm_momentum", "norm_epsilon"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(std::begin(keys), std::end(keys), k) == std::end(keys)) {
      throw ValidationError("unknown model config key '" + k + "'");
    }
  }
  c.joints = j.at("joints").get<std::size_t>();
  c.dims = j.at("dims").get<std::size_t>();
  c.coefficients = j.at("coefficients").get<std::size_t>();
  c.hidden_channels = j.at("hidden_channels").get<std::size_t>();
  c.num_blocks = j.at("num_blocks").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.node_mode = parse_node_mode(j.at("node_mode").get<std::string>());
  c.use_norm = j.at("use_norm").get<bool>();
  c.norm_momentum = j.at("norm_momentum").get<double>();
  c.norm_epsilon = j.at("norm_epsilon").get<double>();
  c.validate();
  return c;
}

std::string describe_config_difference(const GcnConfig& expected, const GcnConfig& found) {
  const json a = config_to_json(expected);
  const json b = config_to_json(found);
  std::ostringstream out;
  for (const auto& [k, v] : a.items()) {
    if (b.at(k) != v) {
      if (out.tellp() > 0) out << "; ";
      out << k << ": expected " << v.dump() << ", found " << b.at(k).dump();
    }
  }
  return out.str();
}

json matrix_to_json(const Matrix& m) {
  json values = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  return {{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const json& j) {
  const auto& shape = j.at("shape");
  if (!shape.is_array() || shape.size() != 2) throw ValidationError("tensor shape must be [rows, cols]");
  const auto rows = shape[0].get<Eigen::Index>();
  const auto cols = shape[1].get<Eigen::Index>();
  const auto& values = j.at("values");
  if (rows < 0 || cols < 0 || values.size() != static_cast<std::size_t>(rows * cols)) {
    throw ValidationError("tensor has " + std::to_string(values.size()) +
                          " values, shape needs " + std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[i++].get<double>();
  return m;
}

json model_to_json(const GcnModel& model) {
  json params = json::array();
  for (const auto& p : model.parameters()) {
    json t = matrix_to_json(*p.value);
    t["name"] = p.name;
    params.push_back(std::move(t));
  }
  json buffers = json::array();
  for (const auto& p : model.buffers()) {
    json t = matrix_to_json(*p.value);
    t["name"] = p.name;
    buffers.push_back(std::move(t));
  }
  return {{"format", kFormatTag},
          {"version", kCheckpointVersion},
          {"config", config_to_json(model.config())},
          {"seed", model.seed},
          {"parameters", std::move(params)},
          {"buffers", std::move(buffers)}};
}

GcnModel model_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string{}) != kFormatTag) {
      throw ValidationError("not a model checkpoint (format tag missing)");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ValidationError("checkpoint version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    GcnModel model(config_from_json(doc.at("config")));
    model.seed = doc.at("seed").get<std::uint64_t>();
    auto restore = [](auto targets, const json& stored, const char* what) {
      if (stored.size() != targets.size()) {
        throw ValidationError(std::string("checkpoint has ") + std::to_string(stored.size()) +
                              " " + what + ", model needs " + std::to_string(targets.size()));
      }
      for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& t = stored[i];
        if (t.at("name").get<std::string>() != targets[i].name) {
          throw ValidationError("checkpoint tensor '" + t.at("name").get<std::string>() +
                                "' where '" + targets[i].name + "' was expected");
        }
        Matrix m = matrix_from_json(t);
        if (m.rows() != targets[i].value->rows() || m.cols() != targets[i].value->cols()) {
          throw ValidationError("checkpoint tensor '" + targets[i].name + "' has wrong shape");
        }
        *targets[i].value = std::move(m);
      }
    };
    restore(model.parameters(), doc.at("parameters"), "parameters");
    restore(model.buffers(), doc.at("buffers"), "buffers");
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("corrupt checkpoint: ") + e.what());
  }
}

}  // namespace motionfc
