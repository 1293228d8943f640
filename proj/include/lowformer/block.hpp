#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lowformer/ops.hpp"

namespace lowformer {

// Position-wise linear layer over the channel axis (rows = n*h*w).
struct LinearSpec {
  int in_features = 0, out_features = 0;
  bool has_bias = true;
};

// Multi-head SDA; input channels are [q | k | v], `dim` each; output has `dim` channels.
struct SdaSpec {
  int dim = 0, heads = 1;
};

// ReLU-kernel linear attention; input channels are groups of [q | k | v] with
// `dim` channels each, output `channels/3` channels.
struct LinearAttentionSpec {
  int channels = 0, dim = 16;
  double epsilon = 1e-6;
};

struct PoolSpec {};
struct SkipPush {};  // save the current value for a later SkipAdd
struct SkipAdd {};   // add the most recently saved value

struct Layer;
// y = concat_channels(x, branch(x))
struct BranchConcat {
  std::shared_ptr<const std::vector<Layer>> layers;
};

using LayerOp = std::variant<ConvSpec, NormSpec, Activation, LinearSpec, SdaSpec, LinearAttentionSpec, PoolSpec,
                             SkipPush, SkipAdd, BranchConcat>;

struct Layer {
  std::string name;
  std::string role;  // e.g. "mbconv", "attention", "mlp", "head"; cost reports group on it
  LayerOp op;
};

struct BlockGraph {
  std::string name;
  std::string kind;
  int in_channels = 0;
  std::vector<Layer> layers;
};

// Output shape of one layer; throws ShapeError.
Shape layer_output_shape(const LayerOp& op, const Shape& in);
Shape block_output_shape(const BlockGraph& g, const Shape& in);

// ---- parameters ----

struct LayerParams {
  std::vector<float> weights, bias;
  NormParams<float> norm;
  std::vector<LayerParams> sub;  // BranchConcat
};

struct BlockParams {
  std::vector<LayerParams> layers;
};

// He-normal weights, zero biases, norms at (gamma 1, beta 0, mean 0, var 1).
BlockParams init_params(const BlockGraph& g, std::uint64_t seed);
// Zeroes weights and bias of the named layer; throws if absent.
void zero_layer(const BlockGraph& g, BlockParams& p, std::string_view name);

template <typename T>
TensorT<T> forward_block(const BlockGraph& g, const BlockParams& p, const TensorT<T>& x);

// Gradient of <forward_block(x), cotangent> with respect to x.
TensorD vjp_block_input(const BlockGraph& g, const BlockParams& p, const TensorD& x, const TensorD& cotangent);

// ---- builders ----

struct MBConvSpec {
  int in_channels = 0, out_channels = 0;
  int expansion = 4;
  int stride = 1;
  bool fused = false;
  // Off for the fixed-expansion probes; on for stage blocks.
  bool enforce_expansion_rule = true;
  bool has_residual() const { return stride == 1 && in_channels == out_channels; }
};

struct LowtentionSpec {
  int channels = 0;
  int head_dim = 32;
  int channel_compression = 2;  // 1 disables compression
  int resolution_reduction = 2;
  bool with_mlp = true;
  double mlp_ratio = 4.0;
};

enum class AttentionKind { mhsa, chcompr, conv_low, conv_low_chcompr, relu_linear };

std::string to_string(AttentionKind k);
AttentionKind attention_kind_from_string(std::string_view s);

struct MLPSpec {
  int channels = 0;
  double ratio = 4.0;
};

struct ClassifierHeadSpec {
  int in_channels = 0;
  int projection = 0;  // 1x1 conv width before pooling
  int hidden = 0;      // linear width after pooling
  int classes = 1000;
};

BlockGraph build_mbconv(const MBConvSpec& spec, std::string name = "mbconv");
BlockGraph build_lowtention(const LowtentionSpec& spec, std::string name = "lowtention");
// Plain attention adaptations (no residual, no MLP) at `dim` channels.
BlockGraph build_attention_variant(AttentionKind kind, int dim, int resolution, int head_dim = 32,
                                   std::string name = "attention");
BlockGraph build_mlp(const MLPSpec& spec, std::string name = "mlp");
// Residual attention adaptation, optionally followed by the LN + MLP residual.
BlockGraph build_attention_unit(AttentionKind kind, int dim, int resolution, int head_dim, bool with_mlp,
                                double mlp_ratio, std::string name = "attention");
BlockGraph build_classifier_head(const ClassifierHeadSpec& spec, std::string name = "head");
// Single-layer graph.
BlockGraph wrap_layer(Layer layer, int in_channels, std::string name);

int mlp_hidden(int channels, double ratio);

}  // namespace lowformer
