#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lowformer/model.hpp"

namespace lowformer {

struct CostPolicy {
  bool count_attention_matmuls = true;  // SDA QK^T and AV, linear-attention products
  bool count_bias = false;              // bias parameters of convs and linears
  bool count_normalization = false;     // one MAC per normalized element
  bool transposed_at_output = true;     // transposed conv MACs over output pixels (else input pixels)
};

struct CostEntry {
  std::string name;  // "<block>/<layer>"
  std::string role;
  std::string kind;  // conv, dwconv, tconv, linear, norm, act, sda, linear_attention, pool
  int stage = 0;
  Shape out_shape;
  long long macs = 0, params = 0;
};

struct CostReport {
  std::string model;
  int resolution = 0;
  int batch = 1;
  CostPolicy policy;
  std::vector<CostEntry> entries;
  long long total_macs = 0, total_params = 0;

  long long macs_where(const std::string& role = "", const std::string& kind = "") const;
};

// Throws ShapeError if the op cannot run at `in`, std::invalid_argument for residual markers.
long long layer_macs(const LayerOp& op, const Shape& in, const CostPolicy& policy = {});
long long layer_params(const LayerOp& op, const CostPolicy& policy = {});

// Symbolic shape propagation; no tensors are allocated. resolution 0 = model default.
CostReport analyze(const ModelGraph& model, int resolution = 0, const CostPolicy& policy = {});
CostReport analyze_block(const BlockGraph& block, const Shape& in, const CostPolicy& policy = {});

std::string to_json(const CostReport& r);
std::string to_csv(const CostReport& r);

struct RatioRow {
  std::string metric;
  double a = 0, b = 0, ratio = 0;
};
// Elementwise a/b over MACs and params; throws std::domain_error on a zero denominator.
std::vector<RatioRow> relative_report(const CostReport& a, const CostReport& b);

struct ExpectedCost {
  std::optional<double> macs, params;  // raw units
};
struct FieldCheck {
  std::string field;
  double actual = 0, expected = 0, delta = 0;  // delta = (actual - expected) / expected
  bool pass = false;
};
struct VerifyResult {
  bool pass = true;
  std::vector<FieldCheck> fields;
};
// Throws std::invalid_argument unless tolerance > 0.
VerifyResult verify(const CostReport& r, const ExpectedCost& expected, double tolerance);

}  // namespace lowformer
