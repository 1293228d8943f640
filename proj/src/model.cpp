#include "lowformer/model.hpp"

#include <stdexcept>

namespace lowformer {

std::string to_string(BaseVariant v) {
  switch (v) {
    case BaseVariant::B0: return "B0";
    case BaseVariant::B1: return "B1";
    case BaseVariant::B1_5: return "B1_5";
    case BaseVariant::B2: return "B2";
    case BaseVariant::B3: return "B3";
  }
  return "?";
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::unfused_mbconv: return "unfused_mbconv";
    case Ablation::relu_linear: return "relu_linear";
    case Ablation::original_mhsa: return "original_mhsa";
    case Ablation::high_res_attention: return "high_res_attention";
    case Ablation::no_channel_compression: return "no_channel_compression";
  }
  return "?";
}

std::string to_string(EdgeKind e) {
  switch (e) {
    case EdgeKind::none: return "none";
    case EdgeKind::mlpless: return "mlpless";
    case EdgeKind::mlpless_shallow: return "mlpless_shallow";
    case EdgeKind::conv_shallow: return "conv_shallow";
  }
  return "?";
}

Ablation ablation_from_string(std::string_view s) {
  for (auto a : {Ablation::none, Ablation::unfused_mbconv, Ablation::relu_linear, Ablation::original_mhsa,
                 Ablation::high_res_attention, Ablation::no_channel_compression})
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown ablation kind: " + std::string(s));
}

EdgeKind edge_kind_from_string(std::string_view s) {
  for (auto e : {EdgeKind::none, EdgeKind::mlpless, EdgeKind::mlpless_shallow, EdgeKind::conv_shallow})
    if (to_string(e) == s) return e;
  throw std::invalid_argument("unknown edge kind: " + std::string(s));
}

StagePlan stage_plan(BaseVariant v) {
  switch (v) {
    case BaseVariant::B0: return {{0, 0, 0, 3, 4}, {16, 32, 64, 128, 256}};
    case BaseVariant::B1: return {{0, 0, 0, 5, 5}, {16, 32, 64, 128, 256}};
    case BaseVariant::B1_5: return {{0, 0, 0, 6, 6}, {20, 40, 80, 160, 320}};
    case BaseVariant::B2: return {{0, 0, 0, 6, 6}, {24, 48, 96, 192, 384}};
    case BaseVariant::B3: return {{1, 1, 2, 6, 6}, {32, 64, 128, 256, 512}};
  }
  throw std::invalid_argument("unknown base variant");
}

// Projection widths follow the reference head family; hidden widths are
// calibrated so that total parameters land on the published counts.
HeadWidths head_widths(BaseVariant v) {
  switch (v) {
    case BaseVariant::B0: return {1536, 1874};
    case BaseVariant::B1: return {1536, 2114};
    case BaseVariant::B1_5: return {2304, 3177};
    case BaseVariant::B2: return {2304, 3485};
    case BaseVariant::B3: return {2304, 2744};
  }
  throw std::invalid_argument("unknown base variant");
}

ModelVariant variant_from_name(std::string_view name) {
  if (name == "B0") return {BaseVariant::B0};
  if (name == "B1") return {BaseVariant::B1};
  if (name == "B1_5") return {BaseVariant::B1_5};
  if (name == "B2") return {BaseVariant::B2};
  if (name == "B3") return {BaseVariant::B3};
  if (name == "B3_r192") return {BaseVariant::B3, Ablation::none, EdgeKind::none, 192};
  if (name == "E1") return {BaseVariant::B1_5, Ablation::none, EdgeKind::conv_shallow};
  if (name == "E2") return {BaseVariant::B3, Ablation::none, EdgeKind::conv_shallow};
  if (name == "E3") return {BaseVariant::B3, Ablation::none, EdgeKind::mlpless};
  throw std::invalid_argument("unknown model variant: " + std::string(name));
}

int attention_head_dim(int dim, int preferred) {
  if (dim <= 0 || preferred <= 0) throw std::invalid_argument("attention dims must be positive");
  for (int h = std::min(dim, preferred); h > 1; --h)
    if (dim % h == 0) return h;
  return 1;
}

Shape ModelGraph::input_shape(int batch, int res) const {
  const int r = res > 0 ? res : resolution;
  return {batch, in_channels, r, r};
}

Shape ModelGraph::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& b : blocks) s = block_output_shape(b.graph, s);
  return s;
}

namespace {

std::string stage_name(int stage, const std::string& what) { return "stage" + std::to_string(stage) + "." + what; }

}  // namespace

ModelGraph build_lowformer(const ModelVariant& v) {
  const StagePlan plan = stage_plan(v.base);
  const bool unfused = v.ablation == Ablation::unfused_mbconv;
  const bool shallow = v.edge == EdgeKind::mlpless_shallow || v.edge == EdgeKind::conv_shallow;
  const bool no_mlp = v.edge != EdgeKind::none;
  const bool no_attention = v.edge == EdgeKind::conv_shallow;
  if (v.resolution <= 0 || v.resolution % 32) throw std::invalid_argument("resolution must be a positive multiple of 32");

  ModelGraph g;
  g.name = "lowformer-" + to_string(v.base);
  if (v.ablation != Ablation::none) g.name += "-" + to_string(v.ablation);
  if (v.edge != EdgeKind::none) g.name += "-" + to_string(v.edge);
  g.resolution = v.resolution;
  g.classifier = true;

  const auto& C = plan.channels;
  auto fuse_local = [&](int c) { return !unfused && c < kFuseBelowChannels; };
  auto local_mbconv = [&](int stage, int c, int i) {
    g.blocks.push_back({stage, build_mbconv({c, c, kLocalExpansion, 1, fuse_local(c)},
                                            stage_name(stage, "layer" + std::to_string(i) + ".mbconv"))});
  };

  BlockGraph stem{"stage0.stem", "stem", 3, {}};
  stem.layers.push_back({"conv", "stem", ConvSpec::full(3, C[0], 3, 2)});
  stem.layers.push_back({"bn", "stem", NormSpec{NormKind::batch_inference, C[0], 1e-5}});
  stem.layers.push_back({"act", "stem", Activation::hardswish});
  g.blocks.push_back({0, std::move(stem)});
  for (int i = 0; i < plan.layers[0]; ++i) local_mbconv(0, C[0], i);

  int cin = C[0];
  for (int st = 1; st <= 4; ++st) {
    const int c = C[st];
    // The strided blocks opening the two attention stages are never fused.
    const bool fuse_down = !unfused && st <= 2 && cin < kFuseBelowChannels;
    g.blocks.push_back({st, build_mbconv({cin, c, kStridedExpansion, 2, fuse_down}, stage_name(st, "down"))});
    cin = c;
    if (st <= 2) {
      for (int i = 0; i < plan.layers[st]; ++i) local_mbconv(st, c, i);
      continue;
    }
    const int layers = plan.layers[st] - (shallow ? 2 : 0);
    const int res = v.resolution >> (st + 1);
    for (int i = 0; i < layers; ++i) {
      local_mbconv(st, c, i);
      const std::string prefix = "layer" + std::to_string(i) + ".";
      if (v.ablation == Ablation::relu_linear) {
        g.blocks.push_back({st, build_attention_unit(AttentionKind::relu_linear, c, res, kReluLinearDim, false, kMlpRatio,
                                                     stage_name(st, prefix + "relu_linear"))});
        continue;
      }
      if (no_attention) {
        if (!no_mlp) g.blocks.push_back({st, build_mlp({c, kMlpRatio}, stage_name(st, prefix + "mlp"))});
        continue;
      }
      if (v.ablation == Ablation::original_mhsa) {
        g.blocks.push_back({st, build_attention_unit(AttentionKind::mhsa, c, res, attention_head_dim(c), !no_mlp, kMlpRatio,
                                                     stage_name(st, prefix + "mhsa"))});
        continue;
      }
      LowtentionSpec s;
      s.channels = c;
      s.channel_compression = v.ablation == Ablation::no_channel_compression ? 1 : 2;
      s.resolution_reduction = (st == 3 && v.ablation != Ablation::high_res_attention) ? 2 : 1;
      s.head_dim = attention_head_dim(c / s.channel_compression);
      s.with_mlp = !no_mlp;
      s.mlp_ratio = kMlpRatio;
      g.blocks.push_back({st, build_lowtention(s, stage_name(st, prefix + "lowtention"))});
    }
  }
  const HeadWidths h = head_widths(v.base);
  g.blocks.push_back({kHeadStage, build_classifier_head({cin, h.projection, h.hidden, 1000}, "head")});
  return g;
}

ModelGraph build_ablation(Ablation kind, BaseVariant base) { return build_lowformer({base, kind}); }

ModelGraph build_edge(EdgeKind kind, BaseVariant base) { return build_lowformer({base, Ablation::none, kind}); }

// ---- toys ----

const std::array<GroupingToy, 6>& grouping_toys() {
  // Per-stage counts come from an exhaustive search over 1..6 per stage, shared by
  // each ungrouped/depthwise pair, minimizing the worse relative MAC error of the pair.
  static const std::array<GroupingToy, 6> toys{{
      {1, {15, 30, 60, 120, 240}, false, 463, {1, 6, 5, 6, 3}},
      {2, {30, 60, 120, 240, 480}, true, 42, {1, 6, 5, 6, 3}},
      {3, {30, 50, 100, 160, 160}, false, 956, {2, 4, 5, 5, 6}},
      {4, {60, 120, 240, 480, 480}, true, 82, {2, 4, 5, 5, 6}},
      {5, {30, 60, 150, 240, 240}, false, 1710, {1, 5, 5, 5, 3}},
      {6, {60, 180, 360, 720, 720}, true, 104, {1, 5, 5, 5, 3}},
  }};
  return toys;
}

long long grouping_toy_macs(const std::array<int, 5>& ch, bool depthwise, const std::array<int, 5>& layers) {
  long long total = 0;
  int cin = 3, r = 224;
  for (int s = 0; s < 5; ++s) {
    r /= 2;
    const int n = layers[s] * (depthwise ? 2 : 1);
    for (int i = 0; i < n; ++i) {
      const long long ci = i == 0 ? cin : ch[s];
      total += static_cast<long long>(r) * r * ch[s] * (depthwise ? 1 : ci) * 9;
    }
    cin = ch[s];
  }
  return total;
}

ModelGraph build_grouping_toy(int id) {
  if (id < 1 || id > 6) throw std::invalid_argument("grouping toy id must be in 1..6");
  const GroupingToy& t = grouping_toys()[id - 1];
  ModelGraph g;
  g.name = "toy-grouping-" + std::to_string(id);
  int cin = 3;
  for (int s = 0; s < 5; ++s) {
    const int c = t.channels[s];
    BlockGraph b{"stage" + std::to_string(s), t.depthwise ? "depthwise_stack" : "conv_stack", cin, {}};
    const int n = t.layers[s] * (t.depthwise ? 2 : 1);
    for (int i = 0; i < n; ++i) {
      const int ci = i == 0 ? cin : c;
      ConvSpec conv = ConvSpec::full(ci, c, 3, i == 0 ? 2 : 1);
      if (t.depthwise) {
        if (c % ci) throw std::logic_error("depthwise toy needs channel multiples");
        conv.groups = ci;
      }
      b.layers.push_back({"conv" + std::to_string(i), "conv", conv});
      b.layers.push_back({"act" + std::to_string(i), "conv", Activation::relu});
    }
    g.blocks.push_back({s, std::move(b)});
    cin = c;
  }
  return g;
}

ModelGraph build_mbconv_probe(int channels, int resolution, bool fused, int depth) {
  if (channels <= 0 || resolution <= 0 || depth <= 0) throw std::invalid_argument("mbconv probe arguments must be positive");
  ModelGraph g;
  g.name = std::string("toy-mbconv-") + (fused ? "fused" : "unfused") + "-c" + std::to_string(channels) + "-r" +
           std::to_string(resolution);
  g.in_channels = channels;
  g.resolution = resolution;
  for (int i = 0; i < depth; ++i) {
    MBConvSpec s{channels, channels, kLocalExpansion, 1, fused};
    s.enforce_expansion_rule = false;
    g.blocks.push_back({0, build_mbconv(s, "mbconv" + std::to_string(i))});
  }
  return g;
}

ModelGraph build_conv_stack(int channels, int resolution, int depth) {
  if (channels <= 0 || resolution <= 0 || depth <= 0) throw std::invalid_argument("conv stack arguments must be positive");
  ModelGraph g;
  g.name = "toy-convstack-r" + std::to_string(resolution) + "-c" + std::to_string(channels);
  g.in_channels = channels;
  g.resolution = resolution;
  BlockGraph b{"stack", "conv_stack", channels, {}};
  for (int i = 0; i < depth; ++i) b.layers.push_back({"conv" + std::to_string(i), "conv", ConvSpec::full(channels, channels, 3, 1)});
  g.blocks.push_back({0, std::move(b)});
  return g;
}

ModelGraph build_attention_stack(AttentionKind kind, int resolution, int dim, int depth) {
  if (kind == AttentionKind::relu_linear) throw std::invalid_argument("attention stacks cover the four MHSA variants");
  if (resolution <= 0 || depth <= 0) throw std::invalid_argument("attention stack arguments must be positive");
  ModelGraph g;
  g.name = "attn-stack-" + to_string(kind) + "-" + std::to_string(resolution);
  g.in_channels = dim;
  g.resolution = resolution;
  for (int i = 0; i < depth; ++i)
    g.blocks.push_back({0, build_attention_variant(kind, dim, resolution, kHeadDim, "attention" + std::to_string(i))});
  return g;
}

const std::array<std::pair<ConvStackPoint, ConvStackPoint>, 7>& res_vs_chan_scenarios() {
  static const std::array<std::pair<ConvStackPoint, ConvStackPoint>, 7> s{{
      {{224, 24}, {28, 196}},
      {{224, 48}, {112, 96}},
      {{224, 96}, {56, 384}},
      {{224, 48}, {56, 196}},
      {{112, 24}, {14, 196}},
      {{56, 96}, {14, 384}},
      {{112, 96}, {28, 384}},
  }};
  return s;
}

std::vector<std::pair<int, int>> mbconv_sweep_grid() {
  std::vector<std::pair<int, int>> grid;
  for (int c : {16, 32, 64, 128, 256, 512})
    for (int r : {7, 14, 28, 56, 112, 224})
      if (!(c <= 64 && r <= 28)) grid.emplace_back(c, r);
  return grid;
}

// ---- materialized ----

Model materialize(std::shared_ptr<const ModelGraph> graph, std::uint64_t seed) {
  if (!graph) throw std::invalid_argument("null model graph");
  Model m{std::move(graph), {}};
  for (std::size_t i = 0; i < m.graph->blocks.size(); ++i)
    m.params.push_back(init_params(m.graph->blocks[i].graph, seed * 1000003ULL + i));
  return m;
}

template <typename T>
TensorT<T> forward(const Model& m, const TensorT<T>& x) {
  if (m.params.size() != m.graph->blocks.size()) throw std::invalid_argument("model parameters do not match graph");
  TensorT<T> y = x;
  for (std::size_t i = 0; i < m.params.size(); ++i) y = forward_block(m.graph->blocks[i].graph, m.params[i], y);
  return y;
}

template TensorT<float> forward(const Model&, const TensorT<float>&);
template TensorT<double> forward(const Model&, const TensorT<double>&);

}  // namespace lowformer
