#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lowformer/block.hpp"

namespace lowformer {

enum class BaseVariant { B0, B1, B1_5, B2, B3 };
enum class Ablation { none, unfused_mbconv, relu_linear, original_mhsa, high_res_attention, no_channel_compression };
// mlpless = drop MLPs; mlpless_shallow = also two fewer layers in the attention stages;
// conv_shallow = additionally drop the attention blocks.
enum class EdgeKind { none, mlpless, mlpless_shallow, conv_shallow };

std::string to_string(BaseVariant v);
std::string to_string(Ablation a);
std::string to_string(EdgeKind e);
Ablation ablation_from_string(std::string_view s);
EdgeKind edge_kind_from_string(std::string_view s);

struct StagePlan {
  std::array<int, 5> layers{}, channels{};
};
StagePlan stage_plan(BaseVariant v);

// Classifier head widths: 1x1 conv to `projection` before pooling, then a `hidden` linear.
struct HeadWidths {
  int projection = 0, hidden = 0;
};
HeadWidths head_widths(BaseVariant v);

struct ModelVariant {
  BaseVariant base = BaseVariant::B1;
  Ablation ablation = Ablation::none;
  EdgeKind edge = EdgeKind::none;
  int resolution = 224;
};
// "B0", "B1", "B1_5", "B2", "B3", "B3_r192", "E1", "E2", "E3".
ModelVariant variant_from_name(std::string_view name);

// Composition constants fixed by cost calibration (see docs/calibration.md).
inline constexpr int kFuseBelowChannels = 256;  // stride-1 MBConvs fused iff input channels < this
inline constexpr double kMlpRatio = 4.0;
inline constexpr int kHeadDim = 32;
inline constexpr int kLocalExpansion = 4;
inline constexpr int kStridedExpansion = 6;
inline constexpr int kReluLinearDim = 16;
inline constexpr int kHeadStage = 5;

// Largest divisor of `dim` not above `preferred`.
int attention_head_dim(int dim, int preferred = kHeadDim);

struct ModelBlock {
  int stage = 0;  // 0..4 backbone stages (Table-style L0..L4 indexing), kHeadStage for the head
  BlockGraph graph;
};

struct ModelGraph {
  std::string name;
  int in_channels = 3;
  int resolution = 224;  // default input resolution
  bool classifier = false;
  std::vector<ModelBlock> blocks;

  Shape input_shape(int batch = 1, int res = 0) const;
  Shape output_shape(const Shape& in) const;
};

ModelGraph build_lowformer(const ModelVariant& variant);
ModelGraph build_ablation(Ablation kind, BaseVariant base = BaseVariant::B1);
ModelGraph build_edge(EdgeKind kind, BaseVariant base);

// ---- section-3 toy models ----

struct GroupingToy {
  int id = 0;
  std::array<int, 5> channels{};
  bool depthwise = false;
  double published_macs_m = 0;  // reference MAC total in millions
  std::array<int, 5> layers{};  // per-stage base counts; depthwise models run 2x per stage
};
const std::array<GroupingToy, 6>& grouping_toys();
// Total MACs of a grouping toy shape family for given per-stage counts (closed form).
long long grouping_toy_macs(const std::array<int, 5>& channels, bool depthwise, const std::array<int, 5>& layers);

ModelGraph build_grouping_toy(int id);
ModelGraph build_mbconv_probe(int channels, int resolution, bool fused, int depth = 1);
ModelGraph build_conv_stack(int channels, int resolution, int depth = 20);
ModelGraph build_attention_stack(AttentionKind kind, int resolution, int dim = 128, int depth = 4);

struct ConvStackPoint {
  int resolution = 0, channels = 0;
};
// Seven high-resolution/low-channel vs low-resolution/high-channel pairs.
const std::array<std::pair<ConvStackPoint, ConvStackPoint>, 7>& res_vs_chan_scenarios();
// (channels, resolution) grid of the fused vs unfused MBConv sweep.
std::vector<std::pair<int, int>> mbconv_sweep_grid();
inline constexpr std::array<int, 4> kAttentionResolutions{8, 16, 32, 64};
inline constexpr std::array<AttentionKind, 4> kAttentionStackKinds{AttentionKind::mhsa, AttentionKind::chcompr,
                                                                   AttentionKind::conv_low,
                                                                   AttentionKind::conv_low_chcompr};

// ---- materialized models ----

struct Model {
  std::shared_ptr<const ModelGraph> graph;
  std::vector<BlockParams> params;
};
Model materialize(std::shared_ptr<const ModelGraph> graph, std::uint64_t seed);

template <typename T>
TensorT<T> forward(const Model& m, const TensorT<T>& x);

}  // namespace lowformer
