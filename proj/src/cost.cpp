#include "lowformer/cost.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lowformer {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using ll = long long;

std::string conv_kind(const ConvSpec& c) {
  if (c.transposed) return "tconv";
  return c.groups > 1 ? "dwconv" : "conv";
}

std::string op_kind(const LayerOp& op) {
  return std::visit(overloaded{
                        [](const ConvSpec& c) { return conv_kind(c); },
                        [](const NormSpec&) { return std::string("norm"); },
                        [](Activation) { return std::string("act"); },
                        [](const LinearSpec&) { return std::string("linear"); },
                        [](const SdaSpec&) { return std::string("sda"); },
                        [](const LinearAttentionSpec&) { return std::string("linear_attention"); },
                        [](PoolSpec) { return std::string("pool"); },
                        [](const BranchConcat&) { return std::string("branch"); },
                        [](const auto&) { return std::string("marker"); },
                    },
                    op);
}

bool is_marker(const LayerOp& op) { return std::holds_alternative<SkipPush>(op) || std::holds_alternative<SkipAdd>(op); }

// Shape propagation plus per-layer costs, flattening branches into their own entries.
Shape walk(const std::vector<Layer>& layers, Shape s, const std::string& prefix, const std::string& block_role, int stage,
           const CostPolicy& policy, std::vector<CostEntry>& out) {
  std::vector<Shape> saved;
  for (const Layer& l : layers) {
    if (std::holds_alternative<SkipPush>(l.op)) {
      saved.push_back(s);
      continue;
    }
    if (std::holds_alternative<SkipAdd>(l.op)) {
      if (saved.empty() || !(saved.back() == s)) throw ShapeError("residual mismatch at " + prefix + l.name);
      saved.pop_back();
      continue;
    }
    const std::string role = l.role.empty() ? block_role : l.role;
    if (const auto* b = std::get_if<BranchConcat>(&l.op)) {
      const Shape o = walk(*b->layers, s, prefix + l.name + ".", role, stage, policy, out);
      s = Shape{s.n, s.c + o.c, s.h, s.w};
      continue;
    }
    CostEntry e;
    e.name = prefix + l.name;
    e.role = role;
    e.kind = op_kind(l.op);
    e.stage = stage;
    e.macs = layer_macs(l.op, s, policy);
    e.params = layer_params(l.op, policy);
    s = layer_output_shape(l.op, s);
    e.out_shape = s;
    out.push_back(std::move(e));
  }
  if (!saved.empty()) throw ShapeError("unbalanced residual markers in " + prefix);
  return s;
}

}  // namespace

long long layer_macs(const LayerOp& op, const Shape& in, const CostPolicy& policy) {
  if (is_marker(op)) throw std::invalid_argument("residual markers carry no cost");
  const Shape out = layer_output_shape(op, in);
  return std::visit(
      overloaded{
          [&](const ConvSpec& c) -> ll {
            const Shape& px = (c.transposed && !policy.transposed_at_output) ? in : out;
            return static_cast<ll>(px.n) * px.h * px.w * c.out_channels * (c.in_channels / c.groups) * c.kernel * c.kernel;
          },
          [&](const NormSpec&) -> ll { return policy.count_normalization ? static_cast<ll>(in.numel()) : 0; },
          [&](Activation) -> ll { return 0; },
          [&](const LinearSpec& l) -> ll {
            return static_cast<ll>(in.n) * in.h * in.w * l.in_features * l.out_features;
          },
          [&](const SdaSpec& s) -> ll {
            if (!policy.count_attention_matmuls) return 0;
            const ll t = static_cast<ll>(in.h) * in.w;
            return static_cast<ll>(in.n) * 2 * t * t * s.dim;
          },
          [&](const LinearAttentionSpec& s) -> ll {
            if (!policy.count_attention_matmuls) return 0;
            const ll t = static_cast<ll>(in.h) * in.w;
            return static_cast<ll>(in.n) * 2 * t * s.dim * (s.channels / 3);
          },
          [&](PoolSpec) -> ll { return 0; },
          [&](const BranchConcat& b) -> ll {
            ll total = 0;
            Shape s = in;
            for (const Layer& l : *b.layers) {
              if (is_marker(l.op)) continue;
              total += layer_macs(l.op, s, policy);
              s = layer_output_shape(l.op, s);
            }
            return total;
          },
          [&](const auto&) -> ll { return 0; },
      },
      op);
}

long long layer_params(const LayerOp& op, const CostPolicy& policy) {
  if (is_marker(op)) throw std::invalid_argument("residual markers carry no cost");
  return std::visit(overloaded{
                        [&](const ConvSpec& c) -> ll {
                          return static_cast<ll>(c.weight_count()) + (c.has_bias && policy.count_bias ? c.out_channels : 0);
                        },
                        [&](const NormSpec& n) -> ll { return 2LL * n.num_features; },
                        [&](const LinearSpec& l) -> ll {
                          return static_cast<ll>(l.in_features) * l.out_features +
                                 (l.has_bias && policy.count_bias ? l.out_features : 0);
                        },
                        [&](const BranchConcat& b) -> ll {
                          ll total = 0;
                          for (const Layer& l : *b.layers)
                            if (!is_marker(l.op)) total += layer_params(l.op, policy);
                          return total;
                        },
                        [&](const auto&) -> ll { return 0; },
                    },
                    op);
}

long long CostReport::macs_where(const std::string& role, const std::string& kind) const {
  ll total = 0;
  for (const auto& e : entries)
    if ((role.empty() || e.role == role) && (kind.empty() || e.kind == kind)) total += e.macs;
  return total;
}

namespace {

void finish(CostReport& r) {
  r.total_macs = r.total_params = 0;
  for (const auto& e : r.entries) {
    r.total_macs += e.macs;
    r.total_params += e.params;
  }
}

}  // namespace

CostReport analyze(const ModelGraph& model, int resolution, const CostPolicy& policy) {
  CostReport r;
  r.model = model.name;
  r.resolution = resolution > 0 ? resolution : model.resolution;
  r.policy = policy;
  Shape s = model.input_shape(1, r.resolution);
  for (const auto& b : model.blocks) {
    if (s.c != b.graph.in_channels) throw ShapeError(b.graph.name + " expects " + std::to_string(b.graph.in_channels) + " channels, got " + s.str());
    s = walk(b.graph.layers, s, b.graph.name + "/", b.graph.kind, b.stage, policy, r.entries);
  }
  finish(r);
  return r;
}

CostReport analyze_block(const BlockGraph& block, const Shape& in, const CostPolicy& policy) {
  if (in.c != block.in_channels) throw ShapeError(block.name + " channel mismatch for " + in.str());
  CostReport r;
  r.model = block.name;
  r.resolution = in.h;
  r.batch = in.n;
  r.policy = policy;
  walk(block.layers, in, block.name + "/", block.kind, 0, policy, r.entries);
  finish(r);
  return r;
}

namespace {

nlohmann::json policy_json(const CostPolicy& p) {
  return {{"count_attention_matmuls", p.count_attention_matmuls},
          {"count_bias", p.count_bias},
          {"count_normalization", p.count_normalization},
          {"transposed_at_output", p.transposed_at_output}};
}

}  // namespace

std::string to_json(const CostReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["resolution"] = r.resolution;
  j["batch"] = r.batch;
  j["policy"] = policy_json(r.policy);
  j["totals"] = {{"macs", r.total_macs}, {"params", r.total_params}};
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"layer", e.name}, {"role", e.role}, {"kind", e.kind}, {"stage", e.stage},
                       {"out_shape", {e.out_shape.n, e.out_shape.c, e.out_shape.h, e.out_shape.w}},
                       {"macs", e.macs}, {"params", e.params}});
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

std::string to_csv(const CostReport& r) {
  std::ostringstream os;
  os << "layer,out_shape,macs,params\n";
  for (const auto& e : r.entries) os << e.name << ',' << e.out_shape.str() << ',' << e.macs << ',' << e.params << '\n';
  os << "total,," << r.total_macs << ',' << r.total_params << '\n';
  return os.str();
}

std::vector<RatioRow> relative_report(const CostReport& a, const CostReport& b) {
  auto row = [](std::string m, double x, double y) {
    if (y == 0) throw std::domain_error("relative_report: zero denominator for " + m);
    return RatioRow{std::move(m), x, y, x / y};
  };
  return {row("macs", static_cast<double>(a.total_macs), static_cast<double>(b.total_macs)),
          row("params", static_cast<double>(a.total_params), static_cast<double>(b.total_params))};
}

VerifyResult verify(const CostReport& r, const ExpectedCost& expected, double tolerance) {
  if (!(tolerance > 0)) throw std::invalid_argument("tolerance must be positive");
  VerifyResult v;
  auto check = [&](const char* field, double actual, const std::optional<double>& want) {
    if (!want) return;
    if (*want == 0) throw std::invalid_argument(std::string("expected ") + field + " must be nonzero");
    FieldCheck f{field, actual, *want, (actual - *want) / *want, false};
    f.pass = std::abs(f.delta) <= tolerance;
    v.pass = v.pass && f.pass;
    v.fields.push_back(f);
  };
  check("macs", static_cast<double>(r.total_macs), expected.macs);
  check("params", static_cast<double>(r.total_params), expected.params);
  return v;
}

}  // namespace lowformer
