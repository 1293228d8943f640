#include <algorithm>
#include <stdexcept>
#include <string>

#include "gemm.hpp"
#include "lowformer/ops.hpp"
#include "lowformer/parallel.hpp"

namespace lowformer {

ConvSpec ConvSpec::full(int in, int out, int k, int stride) {
  ConvSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = k;
  s.stride = stride;
  s.padding = k / 2;
  return s;
}

ConvSpec ConvSpec::pointwise(int in, int out) { return full(in, out, 1, 1); }

ConvSpec ConvSpec::depthwise(int channels, int k, int stride) {
  ConvSpec s = full(channels, channels, k, stride);
  s.groups = channels;
  return s;
}

ConvSpec ConvSpec::transposed_conv(int in, int out, int k, int stride, int groups) {
  ConvSpec s = full(in, out, k, stride);
  s.groups = groups;
  s.transposed = true;
  s.output_padding = stride - 1;
  return s;
}

void ConvSpec::validate() const {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || padding < 0 || groups <= 0)
    throw std::invalid_argument("conv spec has non-positive extent");
  if (in_channels % groups != 0 || out_channels % groups != 0)
    throw std::invalid_argument("groups (" + std::to_string(groups) + ") must divide channels " +
                                std::to_string(in_channels) + "->" + std::to_string(out_channels));
  if (output_padding < 0 || (output_padding > 0 && !transposed) || (transposed && output_padding >= stride))
    throw std::invalid_argument("invalid output_padding");
}

Shape ConvSpec::output_shape(const Shape& in) const {
  validate();
  if (in.c != in_channels)
    throw ShapeError("conv expects " + std::to_string(in_channels) + " channels, got " + in.str());
  int h, w;
  if (transposed) {
    h = (in.h - 1) * stride - 2 * padding + kernel + output_padding;
    w = (in.w - 1) * stride - 2 * padding + kernel + output_padding;
  } else {
    h = (in.h + 2 * padding - kernel) / stride + 1;
    w = (in.w + 2 * padding - kernel) / stride + 1;
    if (in.h + 2 * padding < kernel || in.w + 2 * padding < kernel) h = w = 0;
  }
  if (h <= 0 || w <= 0) throw ShapeError("conv produces empty output from " + in.str());
  return {in.n, out_channels, h, w};
}

std::size_t ConvSpec::weight_count() const {
  const std::size_t kk = static_cast<std::size_t>(kernel) * kernel;
  return transposed ? static_cast<std::size_t>(in_channels) * (out_channels / groups) * kk
                    : static_cast<std::size_t>(out_channels) * (in_channels / groups) * kk;
}

namespace {

// Geometry of a forward cross-correlation from `cin` to `cout` channels.
struct Geo {
  int cin, cout, k, s, p, g;
};

Geo geo_of(const ConvSpec& s) { return {s.in_channels, s.out_channels, s.kernel, s.stride, s.padding, s.groups}; }

template <typename T>
void check_params(const ConvSpec& spec, const std::vector<T>& w, const std::vector<T>& b) {
  if (w.size() != spec.weight_count())
    throw ShapeError("conv weights have " + std::to_string(w.size()) + " elements, expected " +
                     std::to_string(spec.weight_count()));
  if (!b.empty() && b.size() != static_cast<std::size_t>(spec.out_channels))
    throw ShapeError("conv bias length mismatch");
}

template <typename T>
void add_bias(TensorT<T>& y, const std::vector<T>& b) {
  if (b.empty()) return;
  const std::size_t plane = static_cast<std::size_t>(y.h()) * y.w();
  for (int n = 0; n < y.n(); ++n)
    for (int c = 0; c < y.c(); ++c) {
      T* p = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
    }
}

template <typename T>
void conv_reference_core(const TensorT<T>& x, const Geo& g, const T* w, TensorT<T>& y) {
  const int cin_g = g.cin / g.g, cout_g = g.cout / g.g;
  for (int n = 0; n < y.n(); ++n)
    for (int co = 0; co < g.cout; ++co) {
      const int grp = co / cout_g;
      for (int oh = 0; oh < y.h(); ++oh)
        for (int ow = 0; ow < y.w(); ++ow) {
          T acc = 0;
          for (int cl = 0; cl < cin_g; ++cl) {
            const int ci = grp * cin_g + cl;
            for (int kh = 0; kh < g.k; ++kh) {
              const int ih = oh * g.s - g.p + kh;
              if (ih < 0 || ih >= x.h()) continue;
              for (int kw = 0; kw < g.k; ++kw) {
                const int iw = ow * g.s - g.p + kw;
                if (iw < 0 || iw >= x.w()) continue;
                acc += x.at(n, ci, ih, iw) * w[((static_cast<std::size_t>(co) * cin_g + cl) * g.k + kh) * g.k + kw];
              }
            }
          }
          y.at(n, co, oh, ow) = acc;
        }
    }
}

// Depthwise (groups == cin, optional channel multiplier): direct loops, same
// summation order as the reference.
template <typename T>
void conv_depthwise_core(const TensorT<T>& x, const Geo& g, const T* w, TensorT<T>& y) {
  const int mult = g.cout / g.cin;
  const int N = y.n(), C = g.cout, Ho = y.h(), Wo = y.w(), H = x.h(), W = x.w();
  const int threads = std::min(num_threads(), std::max(1, N * C));
#pragma omp parallel for num_threads(threads) schedule(static)
  for (int idx = 0; idx < N * C; ++idx) {
    const int n = idx / C, co = idx % C, ci = co / mult;
    const T* src = x.plane(n, ci);
    const T* wk = w + static_cast<std::size_t>(co) * g.k * g.k;
    T* dst = y.plane(n, co);
    for (int oh = 0; oh < Ho; ++oh) {
      for (int ow = 0; ow < Wo; ++ow) {
        T acc = 0;
        for (int kh = 0; kh < g.k; ++kh) {
          const int ih = oh * g.s - g.p + kh;
          if (ih < 0 || ih >= H) continue;
          const T* row = src + static_cast<std::size_t>(ih) * W;
          for (int kw = 0; kw < g.k; ++kw) {
            const int iw = ow * g.s - g.p + kw;
            if (iw < 0 || iw >= W) continue;
            acc += row[iw] * wk[kh * g.k + kw];
          }
        }
        dst[static_cast<std::size_t>(oh) * Wo + ow] = acc;
      }
    }
  }
}

template <typename T>
void im2col(const T* x, int cin_g, int H, int W, const Geo& g, int Ho, int Wo, T* col) {
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo;
  for (int cl = 0; cl < cin_g; ++cl)
    for (int kh = 0; kh < g.k; ++kh)
      for (int kw = 0; kw < g.k; ++kw) {
        T* dst = col + (static_cast<std::size_t>(cl * g.k + kh) * g.k + kw) * P;
        const T* src = x + static_cast<std::size_t>(cl) * H * W;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * g.s - g.p + kh;
          T* d = dst + static_cast<std::size_t>(oh) * Wo;
          if (ih < 0 || ih >= H) {
            std::fill(d, d + Wo, T(0));
            continue;
          }
          const T* r = src + static_cast<std::size_t>(ih) * W;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * g.s - g.p + kw;
            d[ow] = (iw < 0 || iw >= W) ? T(0) : r[iw];
          }
        }
      }
}

template <typename T>
void conv_fast_core(const TensorT<T>& x, const Geo& g, const T* w, TensorT<T>& y) {
  if (g.g == g.cin && g.g > 1) return conv_depthwise_core(x, g, w, y);
  const int cin_g = g.cin / g.g, cout_g = g.cout / g.g;
  const int H = x.h(), W = x.w(), Ho = y.h(), Wo = y.w();
  const int K = cin_g * g.k * g.k, P = Ho * Wo;
  const bool direct = g.k == 1 && g.s == 1 && g.p == 0;
  std::vector<T> col(direct ? 0 : static_cast<std::size_t>(K) * P);
  for (int n = 0; n < x.n(); ++n)
    for (int grp = 0; grp < g.g; ++grp) {
      const T* src = x.plane(n, grp * cin_g);
      const T* B = src;
      if (!direct) {
        im2col(src, cin_g, H, W, g, Ho, Wo, col.data());
        B = col.data();
      }
      detail::gemm<T>(cout_g, P, K, w + static_cast<std::size_t>(grp) * cout_g * K, B, y.plane(n, grp * cout_g), false);
    }
}

// Adjoint of conv_*_core: scatters `x` (shaped like the conv output, g.cout
// channels) back to an input-shaped tensor `y` (g.cin channels).
template <typename T>
void conv_adjoint_reference(const TensorT<T>& x, const Geo& g, const T* w, TensorT<T>& y) {
  const int cin_g = g.cin / g.g, cout_g = g.cout / g.g;
  std::fill(y.values().begin(), y.values().end(), T(0));
  for (int n = 0; n < x.n(); ++n)
    for (int co = 0; co < g.cout; ++co) {
      const int grp = co / cout_g;
      for (int oh = 0; oh < x.h(); ++oh)
        for (int ow = 0; ow < x.w(); ++ow) {
          const T v = x.at(n, co, oh, ow);
          for (int cl = 0; cl < cin_g; ++cl) {
            const int ci = grp * cin_g + cl;
            for (int kh = 0; kh < g.k; ++kh) {
              const int ih = oh * g.s - g.p + kh;
              if (ih < 0 || ih >= y.h()) continue;
              for (int kw = 0; kw < g.k; ++kw) {
                const int iw = ow * g.s - g.p + kw;
                if (iw < 0 || iw >= y.w()) continue;
                y.at(n, ci, ih, iw) += v * w[((static_cast<std::size_t>(co) * cin_g + cl) * g.k + kh) * g.k + kw];
              }
            }
          }
        }
    }
}

template <typename T>
void conv_adjoint_fast(const TensorT<T>& x, const Geo& g, const T* w, TensorT<T>& y) {
  const int cin_g = g.cin / g.g, cout_g = g.cout / g.g;
  const int H = y.h(), W = y.w(), Hs = x.h(), Ws = x.w();
  const int K = cin_g * g.k * g.k, P = Hs * Ws;
  std::fill(y.values().begin(), y.values().end(), T(0));
  std::vector<T> wt(static_cast<std::size_t>(K) * cout_g), col(static_cast<std::size_t>(K) * P);
  for (int grp = 0; grp < g.g; ++grp) {
    // W_g is (cout_g, K); col = W_g^T x_g.
    detail::transpose(cout_g, K, w + static_cast<std::size_t>(grp) * cout_g * K, wt.data());
    for (int n = 0; n < x.n(); ++n) {
      detail::gemm<T>(K, P, cout_g, wt.data(), x.plane(n, grp * cout_g), col.data(), false);
      const int threads = std::min(num_threads(), cin_g);
#pragma omp parallel for num_threads(threads) schedule(static)
      for (int cl = 0; cl < cin_g; ++cl) {
        T* dst = y.plane(n, grp * cin_g + cl);
        for (int kh = 0; kh < g.k; ++kh)
          for (int kw = 0; kw < g.k; ++kw) {
            const T* c = col.data() + (static_cast<std::size_t>(cl * g.k + kh) * g.k + kw) * P;
            for (int oh = 0; oh < Hs; ++oh) {
              const int ih = oh * g.s - g.p + kh;
              if (ih < 0 || ih >= H) continue;
              T* row = dst + static_cast<std::size_t>(ih) * W;
              const T* cr = c + static_cast<std::size_t>(oh) * Ws;
              for (int ow = 0; ow < Ws; ++ow) {
                const int iw = ow * g.s - g.p + kw;
                if (iw >= 0 && iw < W) row[iw] += cr[ow];
              }
            }
          }
      }
    }
  }
}

// Gradient of the conv weights: dW[co, cl, kh, kw] = sum gy[co, o] * x[ci, o*s-p+k].
template <typename T>
std::vector<T> conv_weight_grad(const TensorT<T>& x, const Geo& g, const TensorT<T>& gy) {
  const int cin_g = g.cin / g.g, cout_g = g.cout / g.g;
  std::vector<T> gw(static_cast<std::size_t>(g.cout) * cin_g * g.k * g.k, T(0));
  for (int n = 0; n < x.n(); ++n)
    for (int co = 0; co < g.cout; ++co) {
      const int grp = co / cout_g;
      for (int cl = 0; cl < cin_g; ++cl) {
        const int ci = grp * cin_g + cl;
        for (int kh = 0; kh < g.k; ++kh)
          for (int kw = 0; kw < g.k; ++kw) {
            T acc = 0;
            for (int oh = 0; oh < gy.h(); ++oh) {
              const int ih = oh * g.s - g.p + kh;
              if (ih < 0 || ih >= x.h()) continue;
              for (int ow = 0; ow < gy.w(); ++ow) {
                const int iw = ow * g.s - g.p + kw;
                if (iw < 0 || iw >= x.w()) continue;
                acc += gy.at(n, co, oh, ow) * x.at(n, ci, ih, iw);
              }
            }
            gw[((static_cast<std::size_t>(co) * cin_g + cl) * g.k + kh) * g.k + kw] += acc;
          }
      }
    }
  return gw;
}

template <typename T>
std::vector<T> channel_sums(const TensorT<T>& t) {
  std::vector<T> s(t.c(), T(0));
  const std::size_t plane = static_cast<std::size_t>(t.h()) * t.w();
  for (int n = 0; n < t.n(); ++n)
    for (int c = 0; c < t.c(); ++c) {
      const T* p = t.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) s[c] += p[i];
    }
  return s;
}

template <typename T>
TensorT<T> conv_impl(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& w, const std::vector<T>& b,
                     bool reference) {
  if (spec.transposed) throw std::invalid_argument("conv2d called with a transposed spec");
  check_params(spec, w, b);
  TensorT<T> y(spec.output_shape(x.shape()));
  const Geo g = geo_of(spec);
  if (reference)
    conv_reference_core(x, g, w.data(), y);
  else
    conv_fast_core(x, g, w.data(), y);
  add_bias(y, b);
  return y;
}

// The transposed conv from `in` to `out` channels is the adjoint of a forward
// conv from `out` to `in` channels sharing the same weight array.
Geo adjoint_geo(const ConvSpec& s) { return {s.out_channels, s.in_channels, s.kernel, s.stride, s.padding, s.groups}; }

template <typename T>
TensorT<T> tconv_impl(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& w, const std::vector<T>& b,
                      bool reference) {
  if (!spec.transposed) throw std::invalid_argument("transposed_conv2d called with a forward spec");
  check_params(spec, w, b);
  TensorT<T> y(spec.output_shape(x.shape()));
  const Geo g = adjoint_geo(spec);
  if (reference)
    conv_adjoint_reference(x, g, w.data(), y);
  else
    conv_adjoint_fast(x, g, w.data(), y);
  add_bias(y, b);
  return y;
}

}  // namespace

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& w, const std::vector<T>& b) {
  return conv_impl(x, spec, w, b, false);
}

template <typename T>
TensorT<T> conv2d_reference(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& w,
                            const std::vector<T>& b) {
  return conv_impl(x, spec, w, b, true);
}

template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& w,
                             const std::vector<T>& b) {
  return tconv_impl(x, spec, w, b, false);
}

template <typename T>
TensorT<T> transposed_conv2d_reference(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& w,
                                       const std::vector<T>& b) {
  return tconv_impl(x, spec, w, b, true);
}

template <typename T>
ConvGrads<T> vjp_conv2d(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& w,
                        const TensorT<T>& gy) {
  if (spec.transposed) throw std::invalid_argument("vjp_conv2d called with a transposed spec");
  check_params(spec, w, std::vector<T>{});
  if (!(gy.shape() == spec.output_shape(x.shape()))) throw ShapeError("conv cotangent shape mismatch");
  const Geo g = geo_of(spec);
  ConvGrads<T> out{TensorT<T>(x.shape()), {}, {}};
  conv_adjoint_fast(gy, g, w.data(), out.x);
  out.weights = conv_weight_grad(x, g, gy);
  if (spec.has_bias) out.bias = channel_sums(gy);
  return out;
}

template <typename T>
ConvGrads<T> vjp_transposed_conv2d(const TensorT<T>& x, const ConvSpec& spec, const std::vector<T>& w,
                                   const TensorT<T>& gy) {
  if (!spec.transposed) throw std::invalid_argument("vjp_transposed_conv2d called with a forward spec");
  check_params(spec, w, std::vector<T>{});
  if (!(gy.shape() == spec.output_shape(x.shape()))) throw ShapeError("transposed conv cotangent shape mismatch");
  const Geo g = adjoint_geo(spec);
  ConvGrads<T> out{TensorT<T>(x.shape()), {}, {}};
  conv_fast_core(gy, g, w.data(), out.x);
  // y = A^T x with A the forward conv of weights W: dW = grad of <A^T x, gy> = weight grad of A at input gy.
  out.weights = conv_weight_grad(gy, g, x);
  if (spec.has_bias) out.bias = channel_sums(gy);
  return out;
}

#define LOWFORMER_INSTANTIATE_CONV(T)                                                                         \
  template TensorT<T> conv2d(const TensorT<T>&, const ConvSpec&, const std::vector<T>&, const std::vector<T>&); \
  template TensorT<T> conv2d_reference(const TensorT<T>&, const ConvSpec&, const std::vector<T>&,                \
                                       const std::vector<T>&);                                                  \
  template TensorT<T> transposed_conv2d(const TensorT<T>&, const ConvSpec&, const std::vector<T>&,              \
                                        const std::vector<T>&);                                                 \
  template TensorT<T> transposed_conv2d_reference(const TensorT<T>&, const ConvSpec&, const std::vector<T>&,    \
                                                  const std::vector<T>&);                                       \
  template ConvGrads<T> vjp_conv2d(const TensorT<T>&, const ConvSpec&, const std::vector<T>&, const TensorT<T>&); \
  template ConvGrads<T> vjp_transposed_conv2d(const TensorT<T>&, const ConvSpec&, const std::vector<T>&,        \
                                              const TensorT<T>&);

LOWFORMER_INSTANTIATE_CONV(float)
LOWFORMER_INSTANTIATE_CONV(double)

}  // namespace lowformer
