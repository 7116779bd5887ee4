#include "motionfc/gcnet.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "motionfc/serialize.hpp"

namespace motionfc {

std::string to_string(NodeMode mode) {
  return mode == NodeMode::one_node_per_joint ? "one_node_per_joint" : "one_node_per_channel";
}

std::string to_string(InputRepr repr) {
  return repr == InputRepr::position ? "position" : "velocity";
}

NodeMode parse_node_mode(const std::string& s) {
  if (s == "one_node_per_joint") return NodeMode::one_node_per_joint;
  if (s == "one_node_per_channel") return NodeMode::one_node_per_channel;
  throw ValidationError("unknown node_mode '" + s + "'");
}

InputRepr parse_input_repr(const std::string& s) {
  if (s == "position") return InputRepr::position;
  if (s == "velocity") return InputRepr::velocity;
  throw ValidationError("unknown input representation '" + s + "'");
}

std::size_t GcnConfig::nodes() const {
  return node_mode == NodeMode::one_node_per_joint ? joints : joints * dims;
}

std::size_t GcnConfig::node_features() const {
  return node_mode == NodeMode::one_node_per_joint ? dims * coefficients : coefficients;
}

void GcnConfig::validate() const {
  if (joints < 1) throw ValidationError("model.joints must be at least 1");
  if (dims != 2 && dims != 3) throw ValidationError("model.dims must be 2 or 3");
  if (coefficients < 1) throw ValidationError("model.dct_coefficients must be at least 1");
  if (hidden_channels < 1) throw ValidationError("model.hidden_channels must be at least 1");
  if (num_blocks < 1) throw ValidationError("model.num_blocks must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("model.dropout must be in [0, 1)");
  }
  if (!(norm_momentum > 0.0 && norm_momentum <= 1.0)) {
    throw ValidationError("model.norm_momentum must be in (0, 1]");
  }
  if (!(norm_epsilon > 0.0)) throw ValidationError("model.norm_epsilon must be positive");
}

namespace {

GraphConv make_conv(std::size_t nodes, std::size_t in, std::size_t out) {
  const auto n = static_cast<Eigen::Index>(nodes);
  return {Matrix::Zero(n, n), Matrix::Zero(static_cast<Eigen::Index>(in),
                                           static_cast<Eigen::Index>(out)),
          Matrix::Zero(1, static_cast<Eigen::Index>(out))};
}

FeatureNorm make_norm(std::size_t features) {
  const auto f = static_cast<Eigen::Index>(features);
  return {Matrix::Ones(1, f), Matrix::Zero(1, f), Matrix::Zero(1, f), Matrix::Ones(1, f)};
}

template <typename Model, typename Out>
void collect_parameters(Model& m, Out& out) {
  auto conv = [&](auto& c, const std::string& prefix) {
    out.push_back({prefix + ".adjacency", &c.adjacency});
    out.push_back({prefix + ".weight", &c.weight});
    out.push_back({prefix + ".bias", &c.bias});
  };
  auto norm = [&](auto& n, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &n.gamma});
    out.push_back({prefix + ".beta", &n.beta});
  };
  conv(m.input_layer, "input");
  norm(m.input_norm, "input_norm");
  for (std::size_t b = 0; b < m.blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b);
    conv(m.blocks[b].conv1, p + ".conv1");
    norm(m.blocks[b].norm1, p + ".norm1");
    conv(m.blocks[b].conv2, p + ".conv2");
    norm(m.blocks[b].norm2, p + ".norm2");
  }
  conv(m.output_layer, "output");
}

template <typename Model, typename Out>
void collect_buffers(Model& m, Out& out) {
  auto norm = [&](auto& n, const std::string& prefix) {
    out.push_back({prefix + ".running_mean", &n.running_mean});
    out.push_back({prefix + ".running_var", &n.running_var});
  };
  norm(m.input_norm, "input_norm");
  for (std::size_t b = 0; b < m.blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b);
    norm(m.blocks[b].norm1, p + ".norm1");
    norm(m.blocks[b].norm2, p + ".norm2");
  }
}

}  // namespace

GcnModel::GcnModel(GcnConfig config) : config_(config) {
  config_.validate();
  const std::size_t n = config_.nodes();
  const std::size_t f = config_.node_features();
  const std::size_t h = config_.hidden_channels;
  input_layer = make_conv(n, f, h);
  input_norm = make_norm(h);
  blocks.resize(config_.num_blocks);
  for (auto& b : blocks) {
    b.conv1 = make_conv(n, h, h);
    b.norm1 = make_norm(h);
    b.conv2 = make_conv(n, h, h);
    b.norm2 = make_norm(h);
  }
  output_layer = make_conv(n, h, f);
}

std::vector<GcnModel::Param> GcnModel::parameters() {
  std::vector<Param> out;
  collect_parameters(*this, out);
  return out;
}

std::vector<GcnModel::ConstParam> GcnModel::parameters() const {
  std::vector<ConstParam> out;
  collect_parameters(*this, out);
  return out;
}

std::vector<GcnModel::Param> GcnModel::buffers() {
  std::vector<Param> out;
  collect_buffers(*this, out);
  return out;
}

std::vector<GcnModel::ConstParam> GcnModel::buffers() const {
  std::vector<ConstParam> out;
  collect_buffers(*this, out);
  return out;
}

std::size_t GcnModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += static_cast<std::size_t>(p.value->size());
  return total;
}

GcnModel init_model(const GcnConfig& config, std::uint64_t seed) {
  GcnModel model(config);
  model.seed = seed;
  std::mt19937_64 rng(seed);
  auto fill = [&](Matrix& m, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  };
  auto init_conv = [&](GraphConv& c) {
    fill(c.adjacency, std::sqrt(6.0 / static_cast<double>(2 * c.adjacency.rows())));
    fill(c.weight, std::sqrt(6.0 / static_cast<double>(c.weight.rows() + c.weight.cols())));
  };
  init_conv(model.input_layer);
  for (auto& b : model.blocks) {
    init_conv(b.conv1);
    init_conv(b.conv2);
  }
  init_conv(model.output_layer);
  return model;
}

void zero_output_path(GcnModel& model) {
  model.output_layer.weight.setZero();
  model.output_layer.bias.setZero();
  ++model.revision;
}

Matrix graph_conv_forward(const GraphConv& layer, const Matrix& input, ConvCache* cache) {
  if (input.rows() != layer.adjacency.cols() || input.cols() != layer.weight.rows()) {
    throw ValidationError("graph conv input is " + std::to_string(input.rows()) + "x" +
                          std::to_string(input.cols()) + ", expected " +
                          std::to_string(layer.adjacency.cols()) + "x" +
                          std::to_string(layer.weight.rows()));
  }
  Matrix hw = input * layer.weight;
  Matrix out = layer.adjacency * hw;
  out.rowwise() += layer.bias.row(0);
  if (cache) {
    cache->input = input;
    cache->ah = layer.adjacency * input;
    cache->hw = std::move(hw);
  }
  return out;
}

Matrix graph_conv_backward(const GraphConv& layer, const ConvCache& cache,
                           const Matrix& grad_output, Matrix& grad_adjacency,
                           Matrix& grad_weight, Matrix& grad_bias) {
  grad_adjacency.noalias() += grad_output * cache.hw.transpose();
  grad_weight.noalias() += cache.ah.transpose() * grad_output;
  grad_bias += grad_output.colwise().sum();
  return layer.adjacency.transpose() * (grad_output * layer.weight.transpose());
}

namespace {

struct StageRef {
  const GraphConv* conv;
  const FeatureNorm* norm;
};

StageRef stage_layers(const GcnModel& model, std::size_t stage) {
  if (stage == 0) return {&model.input_layer, &model.input_norm};
  const auto& b = model.blocks[(stage - 1) / 2];
  return (stage - 1) % 2 == 0 ? StageRef{&b.conv1, &b.norm1} : StageRef{&b.conv2, &b.norm2};
}

struct StageGrad {
  GraphConv* conv;
  FeatureNorm* norm;
};

StageGrad stage_layers(GcnModel& model, std::size_t stage) {
  if (stage == 0) return {&model.input_layer, &model.input_norm};
  auto& b = model.blocks[(stage - 1) / 2];
  return (stage - 1) % 2 == 0 ? StageGrad{&b.conv1, &b.norm1} : StageGrad{&b.conv2, &b.norm2};
}

std::vector<Matrix> run_stage(const GcnModel& model, std::size_t stage,
                              const std::vector<Matrix>& inputs, Mode mode,
                              std::mt19937_64* rng, StageCache& cache) {
  const auto& cfg = model.config();
  const StageRef layers = stage_layers(model, stage);
  const std::size_t batch = inputs.size();
  std::vector<Matrix> z(batch);
  cache.conv.resize(batch);
  for (std::size_t b = 0; b < batch; ++b)
    z[b] = graph_conv_forward(*layers.conv, inputs[b], &cache.conv[b]);

  if (cfg.use_norm) {
    const FeatureNorm& norm = *layers.norm;
    Matrix mean, var;
    if (mode == Mode::train) {
      const double rows = static_cast<double>(batch * static_cast<std::size_t>(z[0].rows()));
      mean = Matrix::Zero(1, z[0].cols());
      for (const auto& m : z) mean += m.colwise().sum();
      mean /= rows;
      var = Matrix::Zero(1, z[0].cols());
      for (const auto& m : z) var += (m.rowwise() - mean.row(0)).array().square().matrix().colwise().sum();
      var /= rows;
    } else {
      mean = norm.running_mean;
      var = norm.running_var;
    }
    cache.norm.batch_mean = mean;
    cache.norm.batch_var = var;
    cache.norm.inv_std = (var.array() + cfg.norm_epsilon).rsqrt().matrix();
    cache.norm.normalized.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      Matrix xhat = ((z[b].rowwise() - mean.row(0)).array().rowwise() *
                     cache.norm.inv_std.row(0).array())
                        .matrix();
      z[b] = (xhat.array().rowwise() * norm.gamma.row(0).array()).matrix();
      z[b].rowwise() += norm.beta.row(0);
      cache.norm.normalized[b] = std::move(xhat);
    }
  }

  const bool drop = mode == Mode::train && cfg.dropout_rate > 0.0;
  if (drop && rng == nullptr) throw ValidationError("train-mode dropout needs an rng");
  cache.activated.resize(batch);
  cache.dropout_mask.clear();
  std::vector<Matrix> out(batch);
  std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
  const double inv_keep = 1.0 / (1.0 - cfg.dropout_rate);
  for (std::size_t b = 0; b < batch; ++b) {
    cache.activated[b] = z[b].array().tanh().matrix();
    if (drop) {
      Matrix mask(z[b].rows(), z[b].cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = keep(*rng) ? inv_keep : 0.0;
      out[b] = cache.activated[b].cwiseProduct(mask);
      cache.dropout_mask.push_back(std::move(mask));
    } else {
      out[b] = cache.activated[b];
    }
  }
  return out;
}

std::vector<Matrix> stage_backward(const GcnModel& model, std::size_t stage,
                                   const StageCache& cache, std::vector<Matrix> grad,
                                   GcnModel& grads) {
  const auto& cfg = model.config();
  const StageRef layers = stage_layers(model, stage);
  const StageGrad g = stage_layers(grads, stage);
  const std::size_t batch = grad.size();
  for (std::size_t b = 0; b < batch; ++b) {
    if (!cache.dropout_mask.empty()) grad[b] = grad[b].cwiseProduct(cache.dropout_mask[b]);
    grad[b] = grad[b].cwiseProduct(
        (1.0 - cache.activated[b].array().square()).matrix());
  }
  if (cfg.use_norm) {
    const auto& nc = cache.norm;
    const double rows = static_cast<double>(batch * static_cast<std::size_t>(grad[0].rows()));
    Matrix sum_dxhat = Matrix::Zero(1, grad[0].cols());
    Matrix sum_dxhat_xhat = Matrix::Zero(1, grad[0].cols());
    std::vector<Matrix> dxhat(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      g.norm->gamma += grad[b].cwiseProduct(nc.normalized[b]).colwise().sum();
      g.norm->beta += grad[b].colwise().sum();
      dxhat[b] = (grad[b].array().rowwise() * layers.norm->gamma.row(0).array()).matrix();
      sum_dxhat += dxhat[b].colwise().sum();
      sum_dxhat_xhat += dxhat[b].cwiseProduct(nc.normalized[b]).colwise().sum();
    }
    const Matrix mean_dxhat = sum_dxhat / rows;
    const Matrix mean_dxhat_xhat = sum_dxhat_xhat / rows;
    for (std::size_t b = 0; b < batch; ++b) {
      Matrix centered = dxhat[b].rowwise() - mean_dxhat.row(0);
      centered -= (nc.normalized[b].array().rowwise() * mean_dxhat_xhat.row(0).array()).matrix();
      grad[b] = (centered.array().rowwise() * nc.inv_std.row(0).array()).matrix();
    }
  }
  std::vector<Matrix> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out[b] = graph_conv_backward(*layers.conv, cache.conv[b], grad[b], g.conv->adjacency,
                                 g.conv->weight, g.conv->bias);
  }
  return out;
}

void check_finite(const std::vector<Matrix>& ms, const char* where) {
  for (const auto& m : ms) {
    if (!m.allFinite()) {
      throw DivergenceError(std::string("non-finite activations in ") + where);
    }
  }
}

}  // namespace

ForwardResult forward(const GcnModel& model, std::span<const Matrix> features, Mode mode,
                      std::mt19937_64* rng) {
  const auto& cfg = model.config();
  if (features.empty()) throw ValidationError("forward needs at least one sample");
  for (const auto& f : features) {
    if (static_cast<std::size_t>(f.rows()) != cfg.nodes() ||
        static_cast<std::size_t>(f.cols()) != cfg.node_features()) {
      throw ValidationError("features are " + std::to_string(f.rows()) + "x" +
                            std::to_string(f.cols()) + ", model expects " +
                            std::to_string(cfg.nodes()) + "x" +
                            std::to_string(cfg.node_features()));
    }
  }
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.mode = mode;
  cache.model = &model;
  cache.revision = model.revision;
  cache.inputs.assign(features.begin(), features.end());
  cache.stages.resize(1 + 2 * model.blocks.size());

  std::vector<Matrix> y = run_stage(model, 0, cache.inputs, mode, rng, cache.stages[0]);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    std::vector<Matrix> t = run_stage(model, 2 * b + 1, y, mode, rng, cache.stages[2 * b + 1]);
    t = run_stage(model, 2 * b + 2, t, mode, rng, cache.stages[2 * b + 2]);
    for (std::size_t s = 0; s < y.size(); ++s) y[s] += t[s];
  }
  check_finite(y, "hidden layers");
  cache.output_conv.resize(y.size());
  result.outputs.resize(y.size());
  for (std::size_t s = 0; s < y.size(); ++s) {
    result.outputs[s] = graph_conv_forward(model.output_layer, y[s], &cache.output_conv[s]) +
                        cache.inputs[s];
  }
  check_finite(result.outputs, "network output");
  return result;
}

Matrix forward(const GcnModel& model, const Matrix& features, Mode mode, std::mt19937_64* rng) {
  return std::move(forward(model, std::span<const Matrix>(&features, 1), mode, rng).outputs[0]);
}

Gradients backward(const GcnModel& model, const ForwardCache& cache,
                   std::span<const Matrix> grad_outputs) {
  if (cache.model != &model || cache.revision != model.revision) {
    throw ValidationError("forward cache is stale: model changed since the forward pass");
  }
  if (cache.mode != Mode::train) {
    throw ValidationError("backward needs a cache from a train-mode forward pass");
  }
  if (grad_outputs.size() != cache.inputs.size()) {
    throw ValidationError("gradient batch size does not match the forward batch");
  }
  for (std::size_t s = 0; s < grad_outputs.size(); ++s) {
    if (grad_outputs[s].rows() != cache.inputs[s].rows() ||
        grad_outputs[s].cols() != cache.inputs[s].cols()) {
      throw ValidationError("gradient shape does not match the network output");
    }
  }
  GcnModel grads = model;
  for (auto& p : grads.parameters()) p.value->setZero();

  const std::size_t batch = grad_outputs.size();
  std::vector<Matrix> dy(batch);
  for (std::size_t s = 0; s < batch; ++s) {
    dy[s] = graph_conv_backward(model.output_layer, cache.output_conv[s], grad_outputs[s],
                                grads.output_layer.adjacency, grads.output_layer.weight,
                                grads.output_layer.bias);
  }
  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    std::vector<Matrix> dt = stage_backward(model, 2 * b + 2, cache.stages[2 * b + 2], dy, grads);
    dt = stage_backward(model, 2 * b + 1, cache.stages[2 * b + 1], std::move(dt), grads);
    for (std::size_t s = 0; s < batch; ++s) dy[s] += dt[s];
  }
  stage_backward(model, 0, cache.stages[0], std::move(dy), grads);

  Gradients out;
  for (auto& p : grads.parameters()) out.push_back(std::move(*p.value));
  for (const auto& g : out) {
    if (!g.allFinite()) throw DivergenceError("non-finite gradient");
  }
  return out;
}

void update_running_stats(GcnModel& model, const ForwardCache& cache) {
  const auto& cfg = model.config();
  if (!cfg.use_norm || cache.mode != Mode::train) return;
  const double m = cfg.norm_momentum;
  const double rows =
      static_cast<double>(cache.inputs.size() * static_cast<std::size_t>(cache.inputs[0].rows()));
  const double unbias = rows > 1.0 ? rows / (rows - 1.0) : 1.0;
  for (std::size_t s = 0; s < cache.stages.size(); ++s) {
    FeatureNorm& norm = *stage_layers(model, s).norm;
    const NormCache& nc = cache.stages[s].norm;
    norm.running_mean = (1.0 - m) * norm.running_mean + m * nc.batch_mean;
    norm.running_var = (1.0 - m) * norm.running_var + m * unbias * nc.batch_var;
  }
}

Matrix to_joint_layout(const Matrix& features, std::size_t joints, std::size_t dims,
                       NodeMode from) {
  if (from == NodeMode::one_node_per_joint) return features;
  const auto jn = static_cast<Eigen::Index>(joints);
  const auto dn = static_cast<Eigen::Index>(dims);
  if (features.rows() != jn * dn) throw ValidationError("per-channel features have wrong row count");
  const Eigen::Index l = features.cols();
  Matrix out(jn, dn * l);
  for (Eigen::Index j = 0; j < jn; ++j)
    for (Eigen::Index d = 0; d < dn; ++d) out.row(j).segment(d * l, l) = features.row(j * dn + d);
  return out;
}

Matrix from_joint_layout(const Matrix& joint_features, std::size_t dims, NodeMode to) {
  if (to == NodeMode::one_node_per_joint) return joint_features;
  const auto dn = static_cast<Eigen::Index>(dims);
  const Eigen::Index jn = joint_features.rows();
  if (joint_features.cols() % dn != 0) throw ValidationError("feature width not divisible by dims");
  const Eigen::Index l = joint_features.cols() / dn;
  Matrix out(jn * dn, l);
  for (Eigen::Index j = 0; j < jn; ++j)
    for (Eigen::Index d = 0; d < dn; ++d) out.row(j * dn + d) = joint_features.row(j).segment(d * l, l);
  return out;
}

Matrix node_features(const MotionSample& sample, const DctBasis& basis, NodeMode mode,
                     InputRepr repr) {
  const PoseSequence& in = sample.input;
  if (in.frames() == 0 || basis.length() < in.frames()) {
    throw ValidationError("DCT length " + std::to_string(basis.length()) +
                          " is shorter than the input window");
  }
  const std::size_t tau = basis.length() - in.frames();
  PoseSequence series = in;
  if (repr == InputRepr::velocity) {
    for (std::size_t j = 0; j < in.joints(); ++j) {
      series.position(0, j).setZero();
      for (std::size_t t = 1; t < in.frames(); ++t)
        series.position(t, j) = in.position(t, j) - in.position(t - 1, j);
    }
  }
  const Matrix joint_features = encode_sequence(pad_future(series, tau), basis);
  return from_joint_layout(joint_features, in.dims(), mode);
}

PoseSequence reconstruct_positions(const PoseSequence& decoded, const PoseSequence& input,
                                   InputRepr repr) {
  if (repr == InputRepr::position) return decoded;
  const std::size_t t_in = input.frames();
  PoseSequence out = decoded;
  for (std::size_t j = 0; j < decoded.joints(); ++j) {
    Vector acc = input.position(0, j);
    out.position(0, j) = acc;
    for (std::size_t t = 1; t < decoded.frames(); ++t) {
      if (t == t_in) acc = input.position(t_in - 1, j);
      acc += decoded.position(t, j);
      out.position(t, j) = acc;
    }
  }
  return out;
}

PoseSequence reconstruct_positions_adjoint(const PoseSequence& grad_positions,
                                           std::size_t input_frames, InputRepr repr) {
  if (repr == InputRepr::position) return grad_positions;
  PoseSequence out = grad_positions;
  const std::size_t n = grad_positions.frames();
  for (std::size_t j = 0; j < out.joints(); ++j) {
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(out.dims()));
    for (std::size_t t = n; t-- > 1;) {
      if (t == input_frames - 1) acc.setZero();
      acc += grad_positions.position(t, j);
      out.position(t, j) = acc;
    }
    out.position(0, j).setZero();
  }
  return out;
}

PoseSequence complete_trajectory(const GcnModel& model, const MotionSample& sample,
                                 const DctBasis& basis, InputRepr repr) {
  const auto& cfg = model.config();
  const Matrix features = node_features(sample, basis, cfg.node_mode, repr);
  const Matrix out = forward(model, features, Mode::eval);
  const Matrix joint_out = to_joint_layout(out, cfg.joints, cfg.dims, cfg.node_mode);
  PoseSequence decoded = decode_sequence(joint_out, cfg.dims, basis);
  decoded.frame_interval_ms = sample.input.frame_interval_ms;
  return reconstruct_positions(decoded, sample.input, repr);
}

PoseSequence predict(const GcnModel& model, const MotionSample& sample, const DctBasis& basis,
                     InputRepr repr) {
  const PoseSequence full = complete_trajectory(model, sample, basis, repr);
  const std::size_t t_in = sample.input.frames();
  PoseSequence out = full.slice(t_in, full.frames() - t_in);
  out.sequence_id = sample.input.sequence_id;
  out.video_id = sample.input.video_id;
  return out;
}

void save_model(const GcnModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

GcnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

GcnModel load_model(const std::filesystem::path& path, const GcnConfig& expected) {
  GcnModel model = load_model(path);
  const std::string diff = describe_config_difference(expected, model.config());
  if (!diff.empty()) {
    throw ValidationError("checkpoint " + path.string() + " does not match the expected model: " +
                          diff);
  }
  return model;
}

}  // namespace motionfc
