#include "lowformer/goldens.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lowformer/registry.hpp"

namespace lowformer {

std::string default_goldens_path() { return std::string(LOWFORMER_DATA_DIR) + "/goldens.json"; }

namespace {

std::optional<double> positive_field(const nlohmann::json& row, const char* field, const std::string& where) {
  if (!row.contains(field) || row[field].is_null()) return std::nullopt;
  const auto& v = row[field];
  if (!v.is_number() || !(v.get<double>() > 0))
    throw GoldenError(where + ": field '" + field + "' must be a positive number");
  return v.get<double>();
}

}  // namespace

Goldens parse_goldens(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw GoldenError(std::string("golden file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer())
    throw GoldenError("golden file: field 'version' must be an integer");
  if (!j.contains("suites") || !j["suites"].is_object()) throw GoldenError("golden file: field 'suites' must be an object");
  Goldens g;
  g.version = j["version"].get<int>();
  for (const auto& [name, rows] : j["suites"].items()) {
    if (!rows.is_array()) throw GoldenError("suite " + name + ": must be an array of rows");
    auto& out = g.suites[name];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const std::string where = "suite " + name + " row " + std::to_string(i + 1);
      if (!r.is_object()) throw GoldenError(where + ": must be an object");
      if (!r.contains("model") || !r["model"].is_string()) throw GoldenError(where + ": field 'model' must be a string");
      GoldenRow row;
      row.model = r["model"].get<std::string>();
      try {
        (void)registry_lookup(row.model);
      } catch (const UnknownModel& e) {
        throw GoldenError(where + ": field 'model': " + e.what());
      }
      row.params_m = positive_field(r, "params_m", where);
      row.macs_m = positive_field(r, "macs_m", where);
      if (!row.params_m && !row.macs_m) throw GoldenError(where + ": needs 'params_m' or 'macs_m'");
      if (r.contains("citation")) {
        if (!r["citation"].is_string()) throw GoldenError(where + ": field 'citation' must be a string");
        row.citation = r["citation"].get<std::string>();
      }
      out.push_back(std::move(row));
    }
  }
  return g;
}

Goldens load_goldens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GoldenError("cannot open golden file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_goldens(ss.str());
}

SuiteResult verify_suite(const Goldens& g, const std::string& suite, double tolerance, const CostPolicy& policy) {
  const auto it = g.suites.find(suite);
  if (it == g.suites.end()) throw std::invalid_argument("unknown golden suite: " + suite);
  SuiteResult s{suite, tolerance, true, {}};
  for (const auto& row : it->second) {
    const CostReport r = analyze(build_model(row.model), 0, policy);
    ExpectedCost want;
    if (row.macs_m) want.macs = *row.macs_m * 1e6;
    if (row.params_m) want.params = *row.params_m * 1e6;
    SuiteRowResult out{row, r.total_macs, r.total_params, verify(r, want, tolerance)};
    s.pass = s.pass && out.result.pass;
    s.rows.push_back(std::move(out));
  }
  return s;
}

}  // namespace lowformer
