#include "lowformer/block.hpp"

#include <cmath>
#include <stack>
#include <stdexcept>

namespace lowformer {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Shape walk_shapes(const std::vector<Layer>& layers, Shape s) {
  std::vector<Shape> saved;
  for (const Layer& l : layers) {
    if (std::holds_alternative<SkipPush>(l.op)) {
      saved.push_back(s);
    } else if (std::holds_alternative<SkipAdd>(l.op)) {
      if (saved.empty()) throw ShapeError("residual add without saved input at " + l.name);
      if (!(saved.back() == s)) throw ShapeError("residual shape mismatch at " + l.name + ": " + saved.back().str() + " vs " + s.str());
      saved.pop_back();
    } else {
      s = layer_output_shape(l.op, s);
    }
  }
  if (!saved.empty()) throw ShapeError("unbalanced residual markers");
  return s;
}

}  // namespace

Shape layer_output_shape(const LayerOp& op, const Shape& in) {
  return std::visit(
      overloaded{
          [&](const ConvSpec& c) { return c.output_shape(in); },
          [&](const NormSpec& n) {
            if (n.num_features != in.c) throw ShapeError("norm features mismatch for " + in.str());
            return in;
          },
          [&](Activation) { return in; },
          [&](const LinearSpec& l) {
            if (l.in_features != in.c) throw ShapeError("linear in_features mismatch for " + in.str());
            return Shape{in.n, l.out_features, in.h, in.w};
          },
          [&](const SdaSpec& s) {
            if (in.c != 3 * s.dim) throw ShapeError("sda expects 3*dim channels, got " + in.str());
            if (s.heads <= 0 || s.dim % s.heads) throw std::invalid_argument("sda: dim not divisible by heads");
            return Shape{in.n, s.dim, in.h, in.w};
          },
          [&](const LinearAttentionSpec& s) {
            if (in.c != s.channels || s.channels % (3 * s.dim)) throw ShapeError("linear attention channel mismatch for " + in.str());
            return Shape{in.n, s.channels / 3, in.h, in.w};
          },
          [&](PoolSpec) { return Shape{in.n, in.c, 1, 1}; },
          [&](SkipPush) { return in; },
          [&](SkipAdd) { return in; },
          [&](const BranchConcat& b) {
            Shape o = walk_shapes(*b.layers, in);
            if (o.h != in.h || o.w != in.w || o.n != in.n) throw ShapeError("branch changes spatial shape");
            return Shape{in.n, in.c + o.c, in.h, in.w};
          },
      },
      op);
}

Shape block_output_shape(const BlockGraph& g, const Shape& in) {
  if (in.c != g.in_channels) throw ShapeError(g.name + " expects " + std::to_string(g.in_channels) + " channels, got " + in.str());
  return walk_shapes(g.layers, in);
}

// ---- parameters ----

namespace {

LayerParams init_layer(const LayerOp& op, std::uint64_t seed) {
  LayerParams p;
  std::visit(overloaded{
                 [&](const ConvSpec& c) {
                   p.weights.resize(c.weight_count());
                   const int fan_in = (c.in_channels / c.groups) * c.kernel * c.kernel;
                   fill_normal(p.weights, seed, std::sqrt(2.0 / fan_in));
                   if (c.has_bias) p.bias.assign(c.out_channels, 0.0f);
                 },
                 [&](const NormSpec& n) {
                   p.norm.gamma.assign(n.num_features, 1.0f);
                   p.norm.beta.assign(n.num_features, 0.0f);
                   if (n.kind == NormKind::batch_inference) {
                     p.norm.running_mean.assign(n.num_features, 0.0f);
                     p.norm.running_var.assign(n.num_features, 1.0f);
                   }
                 },
                 [&](const LinearSpec& l) {
                   p.weights.resize(static_cast<std::size_t>(l.in_features) * l.out_features);
                   fill_normal(p.weights, seed, std::sqrt(2.0 / l.in_features));
                   if (l.has_bias) p.bias.assign(l.out_features, 0.0f);
                 },
                 [&](const BranchConcat& b) {
                   std::uint64_t s = seed;
                   for (const Layer& l : *b.layers) p.sub.push_back(init_layer(l.op, s = mix(s)));
                 },
                 [](const auto&) {},
             },
             op);
  return p;
}

}  // namespace

BlockParams init_params(const BlockGraph& g, std::uint64_t seed) {
  BlockParams p;
  std::uint64_t s = mix(seed);
  for (const Layer& l : g.layers) p.layers.push_back(init_layer(l.op, s = mix(s)));
  return p;
}

void zero_layer(const BlockGraph& g, BlockParams& p, std::string_view name) {
  for (std::size_t i = 0; i < g.layers.size(); ++i)
    if (g.layers[i].name == name) {
      for (auto& w : p.layers[i].weights) w = 0.0f;
      for (auto& b : p.layers[i].bias) b = 0.0f;
      return;
    }
  throw std::invalid_argument("no layer named " + std::string(name) + " in " + g.name);
}

// ---- execution ----

namespace {

template <typename T>
std::vector<T> as(const std::vector<float>& v) {
  return std::vector<T>(v.begin(), v.end());
}

template <typename T>
NormParams<T> as(const NormParams<float>& p) {
  return {as<T>(p.gamma), as<T>(p.beta), as<T>(p.running_mean), as<T>(p.running_var)};
}

template <typename T>
TensorT<T> channel_slice(const TensorT<T>& x, int c0, int c) {
  TensorT<T> y(x.n(), c, x.h(), x.w());
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int ci = 0; ci < c; ++ci) std::copy(x.plane(n, c0 + ci), x.plane(n, c0 + ci) + plane, y.plane(n, ci));
  return y;
}

template <typename T>
void channel_write(TensorT<T>& dst, int c0, const TensorT<T>& src) {
  const std::size_t plane = static_cast<std::size_t>(src.h()) * src.w();
  for (int n = 0; n < src.n(); ++n)
    for (int ci = 0; ci < src.c(); ++ci) std::copy(src.plane(n, ci), src.plane(n, ci) + plane, dst.plane(n, c0 + ci));
}

template <typename T>
MatrixT<T> batch_tokens(const TensorT<T>& x, int n, int c0, int c) {
  const int hw = x.h() * x.w();
  MatrixT<T> m(hw, c);
  for (int ci = 0; ci < c; ++ci) {
    const T* p = x.plane(n, c0 + ci);
    for (int i = 0; i < hw; ++i) m(i, ci) = p[i];
  }
  return m;
}

template <typename T>
void write_tokens(TensorT<T>& y, int n, int c0, const MatrixT<T>& m) {
  const int hw = y.h() * y.w();
  for (int ci = 0; ci < m.cols; ++ci) {
    T* p = y.plane(n, c0 + ci);
    for (int i = 0; i < hw; ++i) p[i] = m(i, ci);
  }
}

template <typename T>
TensorT<T> run_layers(const std::vector<Layer>& layers, const std::vector<LayerParams>& params, TensorT<T> x);

template <typename T>
TensorT<T> linear_attention(const LinearAttentionSpec& s, const TensorT<T>& x) {
  const int d = s.dim, groups = s.channels / (3 * d), hw = x.h() * x.w();
  TensorT<T> y(x.n(), groups * d, x.h(), x.w());
  for (int n = 0; n < x.n(); ++n)
    for (int g = 0; g < groups; ++g) {
      const MatrixT<T> q = batch_tokens(x, n, g * 3 * d, d), k = batch_tokens(x, n, g * 3 * d + d, d),
                       v = batch_tokens(x, n, g * 3 * d + 2 * d, d);
      MatrixT<T> kv(d, d);
      std::vector<T> ksum(d, T(0));
      for (int t = 0; t < hw; ++t)
        for (int a = 0; a < d; ++a) {
          const T ka = std::max(k(t, a), T(0));
          ksum[a] += ka;
          for (int b = 0; b < d; ++b) kv(a, b) += ka * v(t, b);
        }
      MatrixT<T> o(hw, d);
      for (int t = 0; t < hw; ++t) {
        T den = 0;
        for (int a = 0; a < d; ++a) den += std::max(q(t, a), T(0)) * ksum[a];
        den += static_cast<T>(s.epsilon);
        for (int b = 0; b < d; ++b) {
          T acc = 0;
          for (int a = 0; a < d; ++a) acc += std::max(q(t, a), T(0)) * kv(a, b);
          o(t, b) = acc / den;
        }
      }
      write_tokens(y, n, g * d, o);
    }
  return y;
}

template <typename T>
TensorT<T> apply_layer(const Layer& layer, const LayerParams& p, const TensorT<T>& x) {
  return std::visit(
      overloaded{
          [&](const ConvSpec& c) {
            const auto w = as<T>(p.weights);
            const auto b = as<T>(p.bias);
            return c.transposed ? transposed_conv2d(x, c, w, b) : conv2d(x, c, w, b);
          },
          [&](const NormSpec& n) { return normalize(x, n, as<T>(p.norm)); },
          [&](Activation a) { return activation(x, a); },
          [&](const LinearSpec& l) {
            const MatrixT<T> W(l.out_features, l.in_features, as<T>(p.weights));
            return from_tokens(linear(to_tokens(x), W, as<T>(p.bias)), Shape{x.n(), l.out_features, x.h(), x.w()});
          },
          [&](const SdaSpec& s) {
            TensorT<T> y(layer_output_shape(s, x.shape()));
            for (int n = 0; n < x.n(); ++n)
              write_tokens(y, n, 0, sda(batch_tokens(x, n, 0, s.dim), batch_tokens(x, n, s.dim, s.dim),
                                        batch_tokens(x, n, 2 * s.dim, s.dim), s.heads));
            return y;
          },
          [&](const LinearAttentionSpec& s) {
            (void)layer_output_shape(s, x.shape());
            return linear_attention(s, x);
          },
          [&](PoolSpec) { return global_avg_pool(x); },
          [&](const BranchConcat& b) {
            const TensorT<T> br = run_layers(*b.layers, p.sub, x);
            TensorT<T> y(layer_output_shape(b, x.shape()));
            channel_write(y, 0, x);
            channel_write(y, x.c(), br);
            return y;
          },
          [&](const auto&) -> TensorT<T> { throw std::logic_error("residual marker applied as a layer"); },
      },
      layer.op);
}

template <typename T>
void add_into(TensorT<T>& a, const TensorT<T>& b) {
  if (!(a.shape() == b.shape())) throw ShapeError("residual shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
TensorT<T> run_layers(const std::vector<Layer>& layers, const std::vector<LayerParams>& params, TensorT<T> x) {
  if (params.size() != layers.size()) throw std::invalid_argument("parameter count does not match graph");
  std::vector<TensorT<T>> saved;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (std::holds_alternative<SkipPush>(l.op)) {
      saved.push_back(x);
    } else if (std::holds_alternative<SkipAdd>(l.op)) {
      if (saved.empty()) throw ShapeError("residual add without saved input at " + l.name);
      add_into(x, saved.back());
      saved.pop_back();
    } else {
      x = apply_layer(l, params[i], x);
    }
  }
  return x;
}

TensorD layer_vjp(const Layer& layer, const LayerParams& p, const TensorD& x, const TensorD& gy) {
  return std::visit(
      overloaded{
          [&](const ConvSpec& c) {
            const auto w = as<double>(p.weights);
            return c.transposed ? vjp_transposed_conv2d(x, c, w, gy).x : vjp_conv2d(x, c, w, gy).x;
          },
          [&](const NormSpec& n) { return vjp_normalize(x, n, as<double>(p.norm), gy).x; },
          [&](Activation a) { return vjp_activation(x, a, gy); },
          [&](const LinearSpec& l) {
            const MatrixD W(l.out_features, l.in_features, as<double>(p.weights));
            return from_tokens(vjp_linear(to_tokens(x), W, to_tokens(gy)).x, x.shape());
          },
          [&](const SdaSpec& s) {
            TensorD g(x.shape());
            for (int n = 0; n < x.n(); ++n) {
              auto r = vjp_sda(batch_tokens(x, n, 0, s.dim), batch_tokens(x, n, s.dim, s.dim),
                               batch_tokens(x, n, 2 * s.dim, s.dim), s.heads, batch_tokens(gy, n, 0, s.dim));
              write_tokens(g, n, 0, r.q);
              write_tokens(g, n, s.dim, r.k);
              write_tokens(g, n, 2 * s.dim, r.v);
            }
            return g;
          },
          [&](PoolSpec) { return vjp_global_avg_pool(x.shape(), gy); },
          [&](const auto&) -> TensorD { throw std::invalid_argument("vjp: unsupported op kind in layer " + layer.name); },
      },
      layer.op);
}

}  // namespace

template <typename T>
TensorT<T> forward_block(const BlockGraph& g, const BlockParams& p, const TensorT<T>& x) {
  if (x.c() != g.in_channels) throw ShapeError(g.name + " expects " + std::to_string(g.in_channels) + " channels, got " + x.shape().str());
  return run_layers(g.layers, p.layers, x);
}

TensorD vjp_block_input(const BlockGraph& g, const BlockParams& p, const TensorD& x, const TensorD& gy) {
  if (x.c() != g.in_channels) throw ShapeError(g.name + " input channel mismatch");
  if (p.layers.size() != g.layers.size()) throw std::invalid_argument("parameter count does not match graph");
  // Forward pass recording each layer input.
  std::vector<TensorD> inputs(g.layers.size());
  std::vector<TensorD> saved;
  TensorD cur = x;
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const Layer& l = g.layers[i];
    if (std::holds_alternative<SkipPush>(l.op)) {
      saved.push_back(cur);
    } else if (std::holds_alternative<SkipAdd>(l.op)) {
      add_into(cur, saved.back());
      saved.pop_back();
    } else {
      inputs[i] = cur;
      cur = apply_layer(l, p.layers[i], cur);
    }
  }
  if (!(gy.shape() == cur.shape())) throw ShapeError("block cotangent shape mismatch");
  // Reverse: a SkipAdd sends the gradient down both paths; the matching SkipPush collects it.
  TensorD grad = gy;
  std::vector<TensorD> pending;
  for (std::size_t i = g.layers.size(); i-- > 0;) {
    const Layer& l = g.layers[i];
    if (std::holds_alternative<SkipAdd>(l.op)) {
      pending.push_back(grad);
    } else if (std::holds_alternative<SkipPush>(l.op)) {
      add_into(grad, pending.back());
      pending.pop_back();
    } else {
      grad = layer_vjp(l, p.layers[i], inputs[i], grad);
    }
  }
  return grad;
}

template TensorT<float> forward_block(const BlockGraph&, const BlockParams&, const TensorT<float>&);
template TensorT<double> forward_block(const BlockGraph&, const BlockParams&, const TensorT<double>&);

// ---- builders ----

std::string to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::mhsa: return "mhsa";
    case AttentionKind::chcompr: return "chcompr";
    case AttentionKind::conv_low: return "conv_low";
    case AttentionKind::conv_low_chcompr: return "conv_low_chcompr";
    case AttentionKind::relu_linear: return "relu_linear";
  }
  return "?";
}

AttentionKind attention_kind_from_string(std::string_view s) {
  for (auto k : {AttentionKind::mhsa, AttentionKind::chcompr, AttentionKind::conv_low, AttentionKind::conv_low_chcompr,
                 AttentionKind::relu_linear})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown attention kind: " + std::string(s));
}

int mlp_hidden(int channels, double ratio) { return static_cast<int>(std::lround(channels * ratio)); }

namespace {

NormSpec bn(int c) { return {NormKind::batch_inference, c, 1e-5}; }
NormSpec ln(int c) { return {NormKind::layer, c, 1e-5}; }

ConvSpec with_bias(ConvSpec s) {
  s.has_bias = true;
  return s;
}

int heads_for(int dim, int head_dim) {
  if (head_dim <= 0 || dim % head_dim) throw std::invalid_argument("attention dim " + std::to_string(dim) + " not divisible by head_dim " + std::to_string(head_dim));
  return dim / head_dim;
}

void append_mlp(std::vector<Layer>& L, int c, double ratio) {
  const int h = mlp_hidden(c, ratio);
  if (h <= 0) throw std::invalid_argument("mlp hidden width must be positive");
  L.push_back({"mlp_skip", "mlp", SkipPush{}});
  L.push_back({"ln", "mlp", ln(c)});
  L.push_back({"fc1", "mlp", LinearSpec{c, h, true}});
  L.push_back({"gelu", "mlp", Activation::gelu});
  L.push_back({"fc2", "mlp", LinearSpec{h, c, true}});
  L.push_back({"mlp_add", "mlp", SkipAdd{}});
}

}  // namespace

BlockGraph build_mbconv(const MBConvSpec& s, std::string name) {
  if (s.in_channels <= 0 || s.out_channels <= 0) throw std::invalid_argument("mbconv channels must be positive");
  if (s.stride != 1 && s.stride != 2) throw std::invalid_argument("mbconv stride must be 1 or 2");
  if (s.expansion != 4 && s.expansion != 6) throw std::invalid_argument("mbconv expansion must be 4 or 6");
  if (s.enforce_expansion_rule && ((s.expansion == 6) != (s.stride == 2)))
    throw std::invalid_argument("invalid expansion/stride pair: expansion 6 iff stride 2");
  const int mid = s.in_channels * s.expansion;
  BlockGraph g{std::move(name), s.fused ? "fused_mbconv" : "mbconv", s.in_channels, {}};
  auto& L = g.layers;
  const bool res = s.has_residual();
  if (res) L.push_back({"skip", "mbconv", SkipPush{}});
  if (s.fused) {
    L.push_back({"conv1", "mbconv", ConvSpec::full(s.in_channels, mid, 3, s.stride)});
    L.push_back({"bn1", "mbconv", bn(mid)});
    L.push_back({"act1", "mbconv", Activation::hardswish});
  } else {
    L.push_back({"pw1", "mbconv", with_bias(ConvSpec::pointwise(s.in_channels, mid))});
    L.push_back({"act1", "mbconv", Activation::hardswish});
    L.push_back({"dw", "mbconv", with_bias(ConvSpec::depthwise(mid, 3, s.stride))});
    L.push_back({"act2", "mbconv", Activation::hardswish});
  }
  L.push_back({"pw2", "mbconv", ConvSpec::pointwise(mid, s.out_channels)});
  L.push_back({"bn2", "mbconv", bn(s.out_channels)});
  if (res) L.push_back({"add", "mbconv", SkipAdd{}});
  return g;
}

BlockGraph build_lowtention(const LowtentionSpec& s, std::string name) {
  if (s.channels <= 0 || s.channel_compression <= 0 || s.channels % s.channel_compression)
    throw std::invalid_argument("lowtention channels not divisible by compression");
  if (s.resolution_reduction != 1 && s.resolution_reduction != 2) throw std::invalid_argument("resolution_reduction must be 1 or 2");
  const int C = s.channels, d = C / s.channel_compression, n = s.resolution_reduction;
  const int heads = heads_for(d, s.head_dim);
  BlockGraph g{std::move(name), "lowtention", C, {}};
  auto& L = g.layers;
  L.push_back({"attn_skip", "attention", SkipPush{}});
  L.push_back({"dw_down", "attention", ConvSpec::depthwise(C, 3, n)});
  L.push_back({"bn_down", "attention", bn(C)});
  L.push_back({"qkv", "attention", ConvSpec::pointwise(C, 3 * d)});
  L.push_back({"sda", "attention", SdaSpec{d, heads}});
  // Depthwise upsampling fused with the output projection.
  L.push_back({"up", "attention", n == 2 ? ConvSpec::transposed_conv(d, C, 3, 2) : ConvSpec::full(d, C, 3, 1)});
  L.push_back({"attn_add", "attention", SkipAdd{}});
  if (s.with_mlp) append_mlp(L, C, s.mlp_ratio);
  return g;
}

BlockGraph build_attention_variant(AttentionKind kind, int dim, int resolution, int head_dim, std::string name) {
  if (dim <= 0 || dim % 2) throw std::invalid_argument("attention dim must be positive and even");
  const bool low = kind == AttentionKind::conv_low || kind == AttentionKind::conv_low_chcompr;
  if (low && resolution % 2) throw std::invalid_argument("conv_low kinds need an even resolution");
  BlockGraph g{std::move(name), to_string(kind), dim, {}};
  auto& L = g.layers;
  if (kind == AttentionKind::relu_linear) {
    const int qkv = 3 * dim;
    const int groups = 3 * (dim / head_dim);
    if (dim % head_dim) throw std::invalid_argument("relu_linear dim not divisible by head_dim");
    auto agg = std::make_shared<std::vector<Layer>>();
    agg->push_back({"agg_dw", "attention", ConvSpec::depthwise(qkv, 5)});
    ConvSpec gpw = ConvSpec::pointwise(qkv, qkv);
    gpw.groups = groups;
    agg->push_back({"agg_pw", "attention", gpw});
    L.push_back({"qkv", "attention", ConvSpec::pointwise(dim, qkv)});
    L.push_back({"aggregate", "attention", BranchConcat{agg}});
    L.push_back({"linear_attention", "attention", LinearAttentionSpec{2 * qkv, head_dim, 1e-6}});
    L.push_back({"proj", "attention", ConvSpec::pointwise(2 * dim, dim)});
    L.push_back({"proj_bn", "attention", bn(dim)});
    return g;
  }
  const bool compr = kind == AttentionKind::chcompr || kind == AttentionKind::conv_low_chcompr;
  const int d = compr ? dim / 2 : dim;
  const int heads = d % head_dim == 0 ? d / head_dim : 1;
  if (low) L.push_back({"dw_down", "attention", ConvSpec::depthwise(dim, 3, 2)});
  L.push_back({"qkv", "attention", with_bias(ConvSpec::pointwise(dim, 3 * d))});
  L.push_back({"sda", "attention", SdaSpec{d, heads}});
  L.push_back({"proj", "attention", with_bias(ConvSpec::pointwise(d, dim))});
  if (low) L.push_back({"dw_up", "attention", ConvSpec::transposed_conv(dim, dim, 3, 2, dim)});
  return g;
}

BlockGraph build_mlp(const MLPSpec& s, std::string name) {
  if (s.channels <= 0) throw std::invalid_argument("mlp channels must be positive");
  BlockGraph g{std::move(name), "mlp", s.channels, {}};
  append_mlp(g.layers, s.channels, s.ratio);
  return g;
}

BlockGraph build_attention_unit(AttentionKind kind, int dim, int resolution, int head_dim, bool with_mlp,
                                double mlp_ratio, std::string name) {
  BlockGraph g = build_attention_variant(kind, dim, resolution, head_dim, std::move(name));
  g.layers.insert(g.layers.begin(), Layer{"attn_skip", "attention", SkipPush{}});
  g.layers.push_back({"attn_add", "attention", SkipAdd{}});
  if (with_mlp) append_mlp(g.layers, dim, mlp_ratio);
  return g;
}

BlockGraph build_classifier_head(const ClassifierHeadSpec& s, std::string name) {
  if (s.in_channels <= 0 || s.projection <= 0 || s.hidden <= 0 || s.classes <= 0)
    throw std::invalid_argument("classifier head widths must be positive");
  BlockGraph g{std::move(name), "classifier_head", s.in_channels, {}};
  auto& L = g.layers;
  L.push_back({"conv", "head", ConvSpec::pointwise(s.in_channels, s.projection)});
  L.push_back({"bn", "head", bn(s.projection)});
  L.push_back({"act1", "head", Activation::hardswish});
  L.push_back({"pool", "head", PoolSpec{}});
  L.push_back({"fc1", "head", LinearSpec{s.projection, s.hidden, true}});
  L.push_back({"ln", "head", ln(s.hidden)});
  L.push_back({"act2", "head", Activation::hardswish});
  L.push_back({"fc2", "head", LinearSpec{s.hidden, s.classes, true}});
  return g;
}

BlockGraph wrap_layer(Layer layer, int in_channels, std::string name) {
  BlockGraph g{std::move(name), "layer", in_channels, {}};
  g.layers.push_back(std::move(layer));
  return g;
}

}  // namespace lowformer
