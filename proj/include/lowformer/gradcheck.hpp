#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lowformer {

inline constexpr double kGradcheckStep = 1e-4;
inline constexpr double kGradcheckTolerance = 1e-5;

struct GradcheckResult {
  std::string target;
  std::string shape;
  double max_relative_error = 0;
  bool pass() const { return max_relative_error <= kGradcheckTolerance; }
};

// Targets: lowtention, mbconv, sda, mlp. Compares the input vjp with central differences
// of <f(x), cotangent> in double precision. Throws std::invalid_argument for unknown targets.
GradcheckResult gradcheck(std::string_view target, std::uint64_t seed = 0);
const std::vector<std::string>& gradcheck_targets();

}  // namespace lowformer
