#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lowformer/tensor.hpp"

namespace lowformer {

enum class Activation { identity, relu, gelu, hardswish };

std::string to_string(Activation a);

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int groups = 1;
  bool transposed = false;
  bool has_bias = false;
  // Transposed only: extra rows/cols on the bottom/right so stride 2 exactly doubles.
  int output_padding = 0;

  // "same" padding k/2 everywhere.
  static ConvSpec full(int in, int out, int k, int stride = 1);
  static ConvSpec pointwise(int in, int out);
  static ConvSpec depthwise(int channels, int k, int stride = 1);
  static ConvSpec transposed_conv(int in, int out, int k, int stride, int groups = 1);

  bool is_depthwise() const { return groups == in_channels && in_channels == out_channels; }
  bool is_ungrouped() const { return groups == 1; }
  void validate() const;
  // Throws ShapeError when x does not fit.
  Shape output_shape(const Shape& in) const;
  // Weight layout is (out, in/groups, k, k) for conv, (in, out/groups, k, k) for transposed.
  std::size_t weight_count() const;
};

enum class NormKind { batch_inference, layer };

struct NormSpec {
  NormKind kind = NormKind::batch_inference;
  int num_features = 0;
  double epsilon = 1e-5;
};

template <typename T>
struct NormParams {
  std::vector<T> gamma, beta;
  std::vector<T> running_mean, running_var;  // batch_inference only
};

// ---- forward kernels (fast path unless named *_reference) ----

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& weights,
                  const std::vector<T>& bias = {});
template <typename T>
TensorT<T> conv2d_reference(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& weights,
                            const std::vector<T>& bias = {});

template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& weights,
                             const std::vector<T>& bias = {});
template <typename T>
TensorT<T> transposed_conv2d_reference(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& weights,
                                       const std::vector<T>& bias = {});

template <typename T>
TensorT<T> normalize(const TensorT<T>& x, const NormSpec& spec, const NormParams<T>& params);

template <typename T>
T activation_scalar(T x, Activation kind);
template <typename T>
TensorT<T> activation(const TensorT<T>& x, Activation kind);

// x * W^T + b with W shaped (out, in).
template <typename T>
MatrixT<T> linear(const MatrixT<T>& x, const MatrixT<T>& W, const std::vector<T>& bias = {});

template <typename T>
MatrixT<T> softmax_rows(const MatrixT<T>& x);

// Multi-head scaled dot-product attention on (tokens, dim) matrices, scale 1/sqrt(dim/heads).
template <typename T>
MatrixT<T> sda(const MatrixT<T>& q, const MatrixT<T>& k, const MatrixT<T>& v, int heads);

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x);

// ---- vector-Jacobian products ----

template <typename T>
struct ConvGrads {
  TensorT<T> x;
  std::vector<T> weights, bias;
};

template <typename T>
ConvGrads<T> vjp_conv2d(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& weights,
                        const TensorT<T>& cotangent);
template <typename T>
ConvGrads<T> vjp_transposed_conv2d(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& weights,
                                   const TensorT<T>& cotangent);

template <typename T>
struct LinearGrads {
  MatrixT<T> x, W;
  std::vector<T> bias;
};

template <typename T>
LinearGrads<T> vjp_linear(const MatrixT<T>& x, const MatrixT<T>& W, const MatrixT<T>& cotangent);

template <typename T>
MatrixT<T> vjp_softmax_rows(const MatrixT<T>& x, const MatrixT<T>& cotangent);

template <typename T>
struct SdaGrads {
  MatrixT<T> q, k, v;
};

template <typename T>
SdaGrads<T> vjp_sda(const MatrixT<T>& q, const MatrixT<T>& k, const MatrixT<T>& v, int heads,
                    const MatrixT<T>& cotangent);

template <typename T>
struct NormGrads {
  TensorT<T> x;
  std::vector<T> gamma, beta;
};

template <typename T>
NormGrads<T> vjp_normalize(const TensorT<T>& x, const NormSpec& spec, const NormParams<T>& params,
                           const TensorT<T>& cotangent);

template <typename T>
TensorT<T> vjp_activation(const TensorT<T>& x, Activation kind, const TensorT<T>& cotangent);

template <typename T>
TensorT<T> vjp_global_avg_pool(const Shape& in, const TensorT<T>& cotangent);

// ---- finite differences ----

// Central differences (f(x+he_i) - f(x-he_i)) / 2h per coordinate. Throws std::domain_error
// on non-finite f values.
std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double step = 1e-4);
TensorD finite_difference_gradient(const std::function<double(const TensorD&)>& f, const TensorD& x,
                                   double step = 1e-4);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8);
// max_relative_error with the floor at kGradientScaleFloor * max |gradient|: central differences
// carry an O(h^2) absolute error, which swamps a pure relative test on near-zero components.
inline constexpr double kGradientScaleFloor = 1e-3;
double gradient_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

// NCHW <-> (n*h*w, c) token layout used by linear layers and attention.
template <typename T>
MatrixT<T> to_tokens(const TensorT<T>& x);
template <typename T>
TensorT<T> from_tokens(const MatrixT<T>& m, const Shape& shape);

}  // namespace lowformer
