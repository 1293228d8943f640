#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lowformer/cost.hpp"

namespace lowformer {

struct GoldenError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GoldenRow {
  std::string model;  // registry id
  std::optional<double> params_m, macs_m;
  std::string citation;
};

struct Goldens {
  int version = 0;
  std::map<std::string, std::vector<GoldenRow>> suites;
};

std::string default_goldens_path();
// Throws GoldenError naming the offending suite, row and field.
Goldens parse_goldens(const std::string& json_text);
Goldens load_goldens(const std::string& path);

struct SuiteRowResult {
  GoldenRow row;
  long long macs = 0, params = 0;
  VerifyResult result;
};
struct SuiteResult {
  std::string suite;
  double tolerance = 0;
  bool pass = true;
  std::vector<SuiteRowResult> rows;
};
// Analyzes every row's model at its default resolution and checks it against the row.
SuiteResult verify_suite(const Goldens& g, const std::string& suite, double tolerance, const CostPolicy& policy = {});

}  // namespace lowformer
