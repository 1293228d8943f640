#include "lowformer/gradcheck.hpp"

#include <stdexcept>

#include "lowformer/block.hpp"

namespace lowformer {

namespace {

double dot(const TensorD& a, const TensorD& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

GradcheckResult block_check(std::string target, const BlockGraph& g, const Shape& in, std::uint64_t seed) {
  const BlockParams p = init_params(g, seed);
  const TensorD x = random_tensor<double>(in, seed + 1);
  const TensorD cot = random_tensor<double>(block_output_shape(g, in), seed + 2);
  const TensorD analytic = vjp_block_input(g, p, x, cot);
  const TensorD numeric = finite_difference_gradient([&](const TensorD& z) { return dot(forward_block(g, p, z), cot); }, x,
                                                     kGradcheckStep);
  return {std::move(target), in.str(), gradient_relative_error(analytic.values(), numeric.values())};
}

GradcheckResult sda_check(std::uint64_t seed) {
  const int tokens = 2, dim = 4;
  const auto q = random_matrix<double>(tokens, dim, seed + 1), k = random_matrix<double>(tokens, dim, seed + 2),
             v = random_matrix<double>(tokens, dim, seed + 3), cot = random_matrix<double>(tokens, dim, seed + 4);
  const auto g = vjp_sda(q, k, v, 1, cot);
  std::vector<double> x, analytic;
  for (const auto* m : {&q, &k, &v}) x.insert(x.end(), m->data.begin(), m->data.end());
  for (const auto* m : {&g.q, &g.k, &g.v}) analytic.insert(analytic.end(), m->data.begin(), m->data.end());
  const std::size_t n = q.data.size();
  auto f = [&](const std::vector<double>& z) {
    auto part = [&](int i) {
      return MatrixD(tokens, dim, std::vector<double>(z.begin() + i * n, z.begin() + (i + 1) * n));
    };
    const auto y = sda(part(0), part(1), part(2), 1);
    double s = 0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * cot.data[i];
    return s;
  };
  return {"sda", "2 tokens x dim 4", gradient_relative_error(analytic, finite_difference_gradient(f, x, kGradcheckStep))};
}

}  // namespace

const std::vector<std::string>& gradcheck_targets() {
  static const std::vector<std::string> t{"lowtention", "mbconv", "sda", "mlp"};
  return t;
}

GradcheckResult gradcheck(std::string_view target, std::uint64_t seed) {
  if (target == "sda") return sda_check(seed);
  if (target == "lowtention") {
    LowtentionSpec s;
    s.channels = 32;
    s.head_dim = 8;
    s.resolution_reduction = 2;
    return block_check("lowtention", build_lowtention(s), {1, 32, 8, 8}, seed);
  }
  if (target == "mbconv") return block_check("mbconv", build_mbconv({8, 8, 4, 1, true}), {1, 8, 6, 6}, seed);
  if (target == "mlp") return block_check("mlp", build_mlp({16, 4.0}), {1, 16, 3, 3}, seed);
  throw std::invalid_argument("unknown gradcheck target: " + std::string(target));
}

}  // namespace lowformer
