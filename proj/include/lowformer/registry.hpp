#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lowformer/model.hpp"

namespace lowformer {

struct RegistryEntry {
  std::string id;
  std::string description;
  std::function<ModelGraph()> build;
};

struct UnknownModel : std::invalid_argument {
  UnknownModel(const std::string& id, std::vector<std::string> suggestions);
  std::vector<std::string> suggestions;
};

// Every addressable model, in a fixed order.
const std::vector<RegistryEntry>& registry();
// Throws UnknownModel with the closest ids.
const RegistryEntry& registry_lookup(std::string_view id);
ModelGraph build_model(std::string_view id);
std::vector<std::string> suggest_ids(std::string_view id, std::size_t count = 3);

// Registry id of a named variant ("B1_5" -> "lowformer-b1_5", "B3_r192" -> "lowformer-b3-r192").
std::string registry_id(std::string_view variant_name);
std::string registry_id(Ablation a, BaseVariant base = BaseVariant::B1);
std::string registry_id(EdgeKind e, BaseVariant base);
std::string attention_stack_id(AttentionKind kind, int resolution);
std::string mbconv_probe_id(int channels, int resolution, bool fused);
std::string conv_stack_id(int resolution, int channels);

}  // namespace lowformer
