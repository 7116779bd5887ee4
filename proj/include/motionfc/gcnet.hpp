#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "motionfc/core.hpp"
#include "motionfc/dct.hpp"

namespace motionfc {

enum class NodeMode { one_node_per_joint, one_node_per_channel };
enum class InputRepr { position, velocity };
enum class Mode { train, eval };

std::string to_string(NodeMode mode);
std::string to_string(InputRepr repr);
NodeMode parse_node_mode(const std::string& s);
InputRepr parse_input_repr(const std::string& s);

struct GcnConfig {
  std::size_t joints = 13;
  std::size_t dims = 3;
  std::size_t coefficients = 30;
  std::size_t hidden_channels = 256;
  std::size_t num_blocks = 12;
  double dropout_rate = 0.5;
  NodeMode node_mode = NodeMode::one_node_per_joint;
  bool use_norm = true;
  double norm_momentum = 0.1;
  double norm_epsilon = 1e-5;

  /// Graph nodes: J, or J*D when every channel is its own node.
  std::size_t nodes() const;
  /// Features per node: D*L, or L.
  std::size_t node_features() const;
  void validate() const;

  friend bool operator==(const GcnConfig&, const GcnConfig&) = default;
};

/// Z = A * H * W + 1 * b. All parameters are learnable; `bias` is 1 x F_out.
struct GraphConv {
  Matrix adjacency;
  Matrix weight;
  Matrix bias;
};

/// Per-feature normalization over the nodes of every sample in a batch, with
/// a learnable affine map. Eval mode uses the running statistics.
struct FeatureNorm {
  Matrix gamma;
  Matrix beta;
  Matrix running_mean;
  Matrix running_var;
};

struct GcnBlock {
  GraphConv conv1;
  FeatureNorm norm1;
  GraphConv conv2;
  FeatureNorm norm2;
};

/// Residual graph-convolution network:
///   y   = drop(tanh(norm(conv_in(x))))
///   y  += drop(tanh(norm2(conv2(drop(tanh(norm1(conv1(y))))))))   per block
///   out = conv_out(y) + x
class GcnModel {
 public:
  GcnModel() = default;
  explicit GcnModel(GcnConfig config);

  const GcnConfig& config() const { return config_; }
  std::uint64_t seed = 0;
  /// Bumped by every parameter update; caches from older revisions are stale.
  std::uint64_t revision = 0;

  GraphConv input_layer;
  FeatureNorm input_norm;
  std::vector<GcnBlock> blocks;
  GraphConv output_layer;

  struct Param {
    std::string name;
    Matrix* value;
  };
  struct ConstParam {
    std::string name;
    const Matrix* value;
  };
  /// Learnable tensors in a fixed order; Gradients follow the same order.
  std::vector<Param> parameters();
  std::vector<ConstParam> parameters() const;
  /// Running normalization statistics (not learnable).
  std::vector<Param> buffers();
  std::vector<ConstParam> buffers() const;

  std::size_t parameter_count() const;

 private:
  GcnConfig config_;
};

/// Gradients aligned with GcnModel::parameters().
using Gradients = std::vector<Matrix>;

GcnModel init_model(const GcnConfig& config, std::uint64_t seed);
/// Zeroes the output layer so that the network reproduces its input.
void zero_output_path(GcnModel& model);

struct ConvCache {
  Matrix input;  // H
  Matrix ah;     // A * H
  Matrix hw;     // H * W
};

struct NormCache {
  std::vector<Matrix> normalized;  // (Z - mean) * inv_std, per sample
  Matrix inv_std;                  // 1 x F
  Matrix batch_mean;
  Matrix batch_var;
};

/// conv -> norm -> tanh -> dropout, recorded for the whole batch.
struct StageCache {
  std::vector<ConvCache> conv;
  NormCache norm;
  std::vector<Matrix> activated;
  std::vector<Matrix> dropout_mask;  // empty when dropout is off
};

/// Everything backward needs for one batch. Stage 0 is the input layer;
/// block b owns stages 2b+1 and 2b+2.
struct ForwardCache {
  Mode mode = Mode::eval;
  std::vector<Matrix> inputs;
  std::vector<StageCache> stages;
  std::vector<ConvCache> output_conv;
  const GcnModel* model = nullptr;
  std::uint64_t revision = 0;
};

struct ForwardResult {
  std::vector<Matrix> outputs;
  ForwardCache cache;
};

/// Batched forward pass. Train mode uses batch statistics and dropout drawn
/// from `rng` (which may be null when dropout is zero).
ForwardResult forward(const GcnModel& model, std::span<const Matrix> features, Mode mode,
                      std::mt19937_64* rng = nullptr);
/// Single-sample convenience overload.
Matrix forward(const GcnModel& model, const Matrix& features, Mode mode,
               std::mt19937_64* rng = nullptr);

Gradients backward(const GcnModel& model, const ForwardCache& cache,
                   std::span<const Matrix> grad_outputs);

/// Blends the batch statistics from a train-mode forward into the running
/// statistics.
void update_running_stats(GcnModel& model, const ForwardCache& cache);

/// Layer-level primitives, exposed for testing.
Matrix graph_conv_forward(const GraphConv& layer, const Matrix& input, ConvCache* cache);
/// Accumulates into grad_{adjacency,weight,bias}; returns dL/dH.
Matrix graph_conv_backward(const GraphConv& layer, const ConvCache& cache,
                           const Matrix& grad_output, Matrix& grad_adjacency,
                           Matrix& grad_weight, Matrix& grad_bias);

/// Features for the network from a (normalized) sample's input window.
/// Velocity mode differences consecutive frames (first entry zero) before
/// padding. The basis length must equal input + output frames.
Matrix node_features(const MotionSample& sample, const DctBasis& basis, NodeMode mode,
                     InputRepr repr);
/// Reshapes between the two node layouts; values are identical.
Matrix to_joint_layout(const Matrix& features, std::size_t joints, std::size_t dims,
                       NodeMode from);
Matrix from_joint_layout(const Matrix& joint_features, std::size_t dims, NodeMode to);

/// Turns decoded network output (N frames, velocity or position) back into
/// positions over all N frames. Velocity mode integrates from the first
/// observed frame over the input window and from the last observed frame
/// over the forecast.
PoseSequence reconstruct_positions(const PoseSequence& decoded, const PoseSequence& input,
                                   InputRepr repr);
/// Adjoint of reconstruct_positions with respect to `decoded`.
PoseSequence reconstruct_positions_adjoint(const PoseSequence& grad_positions,
                                           std::size_t input_frames, InputRepr repr);

/// Full completed trajectory (input + forecast frames) for a normalized
/// sample, evaluated in eval mode.
PoseSequence complete_trajectory(const GcnModel& model, const MotionSample& sample,
                                 const DctBasis& basis, InputRepr repr);
/// Forecast frames only, in the sample's normalized coordinates, with all
/// joints visible.
PoseSequence predict(const GcnModel& model, const MotionSample& sample, const DctBasis& basis,
                     InputRepr repr);

inline constexpr int kCheckpointVersion = 1;

void save_model(const GcnModel& model, const std::filesystem::path& path);
GcnModel load_model(const std::filesystem::path& path);
/// Fails with a message naming the differing fields when the stored config
/// does not match `expected`.
GcnModel load_model(const std::filesystem::path& path, const GcnConfig& expected);

}  // namespace motionfc
