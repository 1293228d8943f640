#include "lowformer/registry.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace lowformer {

namespace {

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::string join_suggestions(const std::string& id, const std::vector<std::string>& s) {
  std::string msg = "unknown model id '" + id + "'";
  if (!s.empty()) {
    msg += "; did you mean:";
    for (const auto& x : s) msg += " " + x;
  }
  return msg;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string attention_slug(AttentionKind k) {
  switch (k) {
    case AttentionKind::mhsa: return "mhsa";
    case AttentionKind::chcompr: return "chcompr";
    case AttentionKind::conv_low: return "convlow";
    case AttentionKind::conv_low_chcompr: return "convlow-chcompr";
    case AttentionKind::relu_linear: return "relu-linear";
  }
  return "?";
}

std::string ablation_slug(Ablation a) {
  switch (a) {
    case Ablation::none: return "";
    case Ablation::unfused_mbconv: return "unfused";
    case Ablation::relu_linear: return "relu-linear";
    case Ablation::original_mhsa: return "mhsa";
    case Ablation::high_res_attention: return "high-res";
    case Ablation::no_channel_compression: return "no-compr";
  }
  return "?";
}

std::string edge_slug(EdgeKind e) {
  switch (e) {
    case EdgeKind::none: return "";
    case EdgeKind::mlpless: return "mlpless";
    case EdgeKind::mlpless_shallow: return "mlpless-shallow";
    case EdgeKind::conv_shallow: return "conv-shallow";
  }
  return "?";
}

std::vector<RegistryEntry> make_registry() {
  std::vector<RegistryEntry> r;
  auto add = [&](std::string id, std::string desc, std::function<ModelGraph()> f) {
    auto build = [f, name = id] {
      ModelGraph g = f();
      g.name = name;
      return g;
    };
    r.push_back({std::move(id), std::move(desc), std::move(build)});
  };
  for (const char* n : {"B0", "B1", "B1_5", "B2", "B3", "B3_r192", "E1", "E2", "E3"}) {
    const ModelVariant v = variant_from_name(n);
    add(registry_id(n), std::string("LowFormer ") + n + " at " + std::to_string(v.resolution), [v] { return build_lowformer(v); });
  }
  for (auto a : {Ablation::unfused_mbconv, Ablation::relu_linear, Ablation::original_mhsa, Ablation::high_res_attention,
                 Ablation::no_channel_compression})
    add(registry_id(a), "B1 ablation: " + to_string(a), [a] { return build_ablation(a); });
  for (auto b : {BaseVariant::B0, BaseVariant::B1, BaseVariant::B1_5, BaseVariant::B2, BaseVariant::B3})
    for (auto e : {EdgeKind::mlpless, EdgeKind::mlpless_shallow, EdgeKind::conv_shallow})
      add(registry_id(e, b), to_string(b) + " edge study: " + to_string(e), [e, b] { return build_edge(e, b); });
  for (const auto& t : grouping_toys())
    add("toy-grouping-" + std::to_string(t.id),
        std::string("five-stage ") + (t.depthwise ? "depthwise" : "ungrouped") + " 3x3 stack",
        [id = t.id] { return build_grouping_toy(id); });
  for (auto [c, res] : mbconv_sweep_grid())
    for (bool fused : {true, false})
      add(mbconv_probe_id(c, res, fused), std::string(fused ? "fused" : "unfused") + " MBConv probe",
          [c = c, res = res, fused] { return build_mbconv_probe(c, res, fused); });
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : res_vs_chan_scenarios())
    for (const auto& p : {a, b})
      if (seen.insert({p.resolution, p.channels}).second)
        add(conv_stack_id(p.resolution, p.channels), "20 stacked 3x3 convs",
            [p] { return build_conv_stack(p.channels, p.resolution); });
  for (auto k : kAttentionStackKinds)
    for (int res : kAttentionResolutions)
      add(attention_stack_id(k, res), "4 stacked " + to_string(k) + " layers, dim 128",
          [k, res] { return build_attention_stack(k, res); });
  return r;
}

}  // namespace

UnknownModel::UnknownModel(const std::string& id, std::vector<std::string> s)
    : std::invalid_argument(join_suggestions(id, s)), suggestions(std::move(s)) {}

const std::vector<RegistryEntry>& registry() {
  static const std::vector<RegistryEntry> r = make_registry();
  return r;
}

std::vector<std::string> suggest_ids(std::string_view id, std::size_t count) {
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& e : registry()) scored.emplace_back(edit_distance(id, e.id), e.id);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(count, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

const RegistryEntry& registry_lookup(std::string_view id) {
  for (const auto& e : registry())
    if (e.id == id) return e;
  throw UnknownModel(std::string(id), suggest_ids(id));
}

ModelGraph build_model(std::string_view id) { return registry_lookup(id).build(); }

std::string registry_id(std::string_view variant_name) {
  std::string n = lower(std::string(variant_name));
  if (n == "b3_r192") return "lowformer-b3-r192";
  return "lowformer-" + n;
}

std::string registry_id(Ablation a, BaseVariant base) {
  if (a == Ablation::none) return registry_id(to_string(base));
  return registry_id(to_string(base)) + "-" + ablation_slug(a);
}

std::string registry_id(EdgeKind e, BaseVariant base) {
  if (e == EdgeKind::none) return registry_id(to_string(base));
  return registry_id(to_string(base)) + "-" + edge_slug(e);
}

std::string attention_stack_id(AttentionKind kind, int resolution) {
  return "attn-stack-" + attention_slug(kind) + "-" + std::to_string(resolution);
}

std::string mbconv_probe_id(int channels, int resolution, bool fused) {
  return std::string("toy-mbconv-") + (fused ? "fused" : "unfused") + "-c" + std::to_string(channels) + "-r" +
         std::to_string(resolution);
}

std::string conv_stack_id(int resolution, int channels) {
  return "toy-convstack-r" + std::to_string(resolution) + "-c" + std::to_string(channels);
}

}  // namespace lowformer
