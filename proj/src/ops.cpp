#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gemm.hpp"
#include "lowformer/ops.hpp"

namespace lowformer {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
    case Activation::hardswish: return "hardswish";
  }
  return "?";
}

// ---- normalization ----

template <typename T>
TensorT<T> normalize(const TensorT<T>& x, const NormSpec& spec, const NormParams<T>& p) {
  if (!(spec.epsilon > 0)) throw std::invalid_argument("norm epsilon must be positive");
  if (spec.num_features != x.c())
    throw ShapeError("norm over " + std::to_string(spec.num_features) + " features, input " + x.shape().str());
  const int C = x.c();
  if (p.gamma.size() != static_cast<std::size_t>(C) || p.beta.size() != static_cast<std::size_t>(C))
    throw ShapeError("norm affine parameter length mismatch");
  TensorT<T> y(x.shape());
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  if (spec.kind == NormKind::batch_inference) {
    if (p.running_mean.size() != static_cast<std::size_t>(C) || p.running_var.size() != static_cast<std::size_t>(C))
      throw std::invalid_argument("batch-inference norm requires running statistics");
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < C; ++c) {
        const T scale = p.gamma[c] / std::sqrt(p.running_var[c] + static_cast<T>(spec.epsilon));
        const T shift = p.beta[c] - p.running_mean[c] * scale;
        const T* s = x.plane(n, c);
        T* d = y.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) d[i] = s[i] * scale + shift;
      }
    return y;
  }
  // Layer norm: per spatial position over the channel axis.
  for (int n = 0; n < x.n(); ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const T* base = x.plane(n, 0) + i;
      T mean = 0;
      for (int c = 0; c < C; ++c) mean += base[c * plane];
      mean /= C;
      T var = 0;
      for (int c = 0; c < C; ++c) {
        const T d = base[c * plane] - mean;
        var += d * d;
      }
      var /= C;
      const T inv = T(1) / std::sqrt(var + static_cast<T>(spec.epsilon));
      T* out = y.plane(n, 0) + i;
      for (int c = 0; c < C; ++c) out[c * plane] = (base[c * plane] - mean) * inv * p.gamma[c] + p.beta[c];
    }
  return y;
}

template <typename T>
NormGrads<T> vjp_normalize(const TensorT<T>& x, const NormSpec& spec, const NormParams<T>& p, const TensorT<T>& gy) {
  if (!(gy.shape() == x.shape())) throw ShapeError("norm cotangent shape mismatch");
  (void)normalize(x, spec, p);  // validates
  const int C = x.c();
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  NormGrads<T> g{TensorT<T>(x.shape()), std::vector<T>(C, T(0)), std::vector<T>(C, T(0))};
  if (spec.kind == NormKind::batch_inference) {
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < C; ++c) {
        const T inv = T(1) / std::sqrt(p.running_var[c] + static_cast<T>(spec.epsilon));
        const T* s = x.plane(n, c);
        const T* gs = gy.plane(n, c);
        T* d = g.x.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) {
          d[i] = gs[i] * p.gamma[c] * inv;
          g.gamma[c] += gs[i] * (s[i] - p.running_mean[c]) * inv;
          g.beta[c] += gs[i];
        }
      }
    return g;
  }
  std::vector<T> xhat(C), gxhat(C);
  for (int n = 0; n < x.n(); ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const T* base = x.plane(n, 0) + i;
      const T* gb = gy.plane(n, 0) + i;
      T mean = 0;
      for (int c = 0; c < C; ++c) mean += base[c * plane];
      mean /= C;
      T var = 0;
      for (int c = 0; c < C; ++c) var += (base[c * plane] - mean) * (base[c * plane] - mean);
      var /= C;
      const T inv = T(1) / std::sqrt(var + static_cast<T>(spec.epsilon));
      T m1 = 0, m2 = 0;
      for (int c = 0; c < C; ++c) {
        xhat[c] = (base[c * plane] - mean) * inv;
        gxhat[c] = gb[c * plane] * p.gamma[c];
        m1 += gxhat[c];
        m2 += gxhat[c] * xhat[c];
        g.gamma[c] += gb[c * plane] * xhat[c];
        g.beta[c] += gb[c * plane];
      }
      m1 /= C;
      m2 /= C;
      T* out = g.x.plane(n, 0) + i;
      for (int c = 0; c < C; ++c) out[c * plane] = inv * (gxhat[c] - m1 - xhat[c] * m2);
    }
  return g;
}

// ---- activations ----

template <typename T>
T activation_scalar(T x, Activation kind) {
  switch (kind) {
    case Activation::identity: return x;
    case Activation::relu: return x > T(0) ? x : T(0);
    case Activation::gelu: return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
    case Activation::hardswish: return x * std::clamp(x + T(3), T(0), T(6)) / T(6);
  }
  return x;
}

template <typename T>
TensorT<T> activation(const TensorT<T>& x, Activation kind) {
  TensorT<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activation_scalar(x[i], kind);
  return y;
}

template <typename T>
TensorT<T> vjp_activation(const TensorT<T>& x, Activation kind, const TensorT<T>& gy) {
  if (!(gy.shape() == x.shape())) throw ShapeError("activation cotangent shape mismatch");
  TensorT<T> g(x.shape());
  const T inv_sqrt2pi = T(0.3989422804014327);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    T d = 1;
    switch (kind) {
      case Activation::identity: d = 1; break;
      case Activation::relu: d = v > T(0) ? T(1) : T(0); break;
      case Activation::gelu:
        d = T(0.5) * (T(1) + std::erf(v / std::sqrt(T(2)))) + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v);
        break;
      case Activation::hardswish:
        d = v < T(-3) ? T(0) : (v > T(3) ? T(1) : (T(2) * v + T(3)) / T(6));
        break;
    }
    g[i] = gy[i] * d;
  }
  return g;
}

// ---- linear ----

template <typename T>
MatrixT<T> linear(const MatrixT<T>& x, const MatrixT<T>& W, const std::vector<T>& b) {
  if (x.cols != W.cols) throw ShapeError("linear: input dim " + std::to_string(x.cols) + " vs weight in-dim " + std::to_string(W.cols));
  if (!b.empty() && b.size() != static_cast<std::size_t>(W.rows)) throw ShapeError("linear: bias length mismatch");
  MatrixT<T> wt(W.cols, W.rows);
  detail::transpose(W.rows, W.cols, W.data.data(), wt.data.data());
  MatrixT<T> y(x.rows, W.rows);
  detail::gemm<T>(x.rows, W.rows, x.cols, x.data.data(), wt.data.data(), y.data.data(), false);
  if (!b.empty())
    for (int r = 0; r < y.rows; ++r)
      for (int c = 0; c < y.cols; ++c) y(r, c) += b[c];
  return y;
}

template <typename T>
LinearGrads<T> vjp_linear(const MatrixT<T>& x, const MatrixT<T>& W, const MatrixT<T>& gy) {
  if (x.cols != W.cols || gy.rows != x.rows || gy.cols != W.rows) throw ShapeError("linear vjp shape mismatch");
  LinearGrads<T> g{MatrixT<T>(x.rows, x.cols), MatrixT<T>(W.rows, W.cols), std::vector<T>(W.rows, T(0))};
  detail::gemm<T>(x.rows, x.cols, W.rows, gy.data.data(), W.data.data(), g.x.data.data(), false);
  MatrixT<T> gyt(gy.cols, gy.rows);
  detail::transpose(gy.rows, gy.cols, gy.data.data(), gyt.data.data());
  detail::gemm<T>(W.rows, W.cols, x.rows, gyt.data.data(), x.data.data(), g.W.data.data(), false);
  for (int r = 0; r < gy.rows; ++r)
    for (int c = 0; c < gy.cols; ++c) g.bias[c] += gy(r, c);
  return g;
}

// ---- softmax ----

template <typename T>
MatrixT<T> softmax_rows(const MatrixT<T>& x) {
  MatrixT<T> y(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    const T* s = x.row(r);
    T* d = y.row(r);
    const T mx = x.cols ? *std::max_element(s, s + x.cols) : T(0);
    T sum = 0;
    for (int c = 0; c < x.cols; ++c) {
      d[c] = std::exp(s[c] - mx);
      sum += d[c];
    }
    for (int c = 0; c < x.cols; ++c) d[c] /= sum;
  }
  return y;
}

namespace {
template <typename T>
MatrixT<T> softmax_vjp_from_output(const MatrixT<T>& y, const MatrixT<T>& gy) {
  MatrixT<T> g(y.rows, y.cols);
  for (int r = 0; r < y.rows; ++r) {
    T dot = 0;
    for (int c = 0; c < y.cols; ++c) dot += gy(r, c) * y(r, c);
    for (int c = 0; c < y.cols; ++c) g(r, c) = y(r, c) * (gy(r, c) - dot);
  }
  return g;
}
}  // namespace

template <typename T>
MatrixT<T> vjp_softmax_rows(const MatrixT<T>& x, const MatrixT<T>& gy) {
  if (gy.rows != x.rows || gy.cols != x.cols) throw ShapeError("softmax cotangent shape mismatch");
  return softmax_vjp_from_output(softmax_rows(x), gy);
}

// ---- attention ----

namespace {

void check_sda(int qr, int qc, int kr, int kc, int vr, int vc, int heads) {
  if (heads <= 0 || qc % heads != 0) throw std::invalid_argument("sda: dim not divisible by heads");
  if (qc != kc || qc != vc || kr != vr || qr <= 0 || kr <= 0) throw ShapeError("sda: q/k/v shape mismatch");
}

// Slice columns [c0, c0+w) of m into a dense (rows, w) buffer.
template <typename T>
std::vector<T> slice_cols(const MatrixT<T>& m, int c0, int w, const std::vector<int>* order = nullptr) {
  std::vector<T> out(static_cast<std::size_t>(m.rows) * w);
  for (int r = 0; r < m.rows; ++r) {
    const int src = order ? (*order)[r] : r;
    std::copy(m.row(src) + c0, m.row(src) + c0 + w, out.begin() + static_cast<std::size_t>(r) * w);
  }
  return out;
}

}  // namespace

// Keys/values are visited in a canonical order (sorted by content), so every
// reduction over tokens is independent of the input token order and permuting
// q, k, v jointly permutes the output exactly.
template <typename T>
MatrixT<T> sda(const MatrixT<T>& q, const MatrixT<T>& k, const MatrixT<T>& v, int heads) {
  check_sda(q.rows, q.cols, k.rows, k.cols, v.rows, v.cols, heads);
  const int tq = q.rows, tk = k.rows, dh = q.cols / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  MatrixT<T> out(tq, v.cols);
  std::vector<int> order(tk);
  std::vector<T> kt(static_cast<std::size_t>(dh) * tk), s(static_cast<std::size_t>(tq) * tk), o(static_cast<std::size_t>(tq) * dh);
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * dh;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const T* ka = k.row(a) + c0;
      const T* kb = k.row(b) + c0;
      for (int c = 0; c < dh; ++c)
        if (ka[c] != kb[c]) return ka[c] < kb[c];
      const T* va = v.row(a) + c0;
      const T* vb = v.row(b) + c0;
      for (int c = 0; c < dh; ++c)
        if (va[c] != vb[c]) return va[c] < vb[c];
      return false;
    });
    const std::vector<T> qh = slice_cols(q, c0, dh);
    const std::vector<T> kh = slice_cols(k, c0, dh, &order);
    const std::vector<T> vh = slice_cols(v, c0, dh, &order);
    detail::transpose(tk, dh, kh.data(), kt.data());
    detail::gemm<T>(tq, tk, dh, qh.data(), kt.data(), s.data(), false);
    for (int r = 0; r < tq; ++r) {
      T* row = s.data() + static_cast<std::size_t>(r) * tk;
      T mx = row[0] * scale;
      for (int c = 0; c < tk; ++c) {
        row[c] *= scale;
        mx = std::max(mx, row[c]);
      }
      T sum = 0;
      for (int c = 0; c < tk; ++c) {
        row[c] = std::exp(row[c] - mx);
        sum += row[c];
      }
      for (int c = 0; c < tk; ++c) row[c] /= sum;
    }
    detail::gemm<T>(tq, dh, tk, s.data(), vh.data(), o.data(), false);
    for (int r = 0; r < tq; ++r) std::copy(o.begin() + static_cast<std::size_t>(r) * dh, o.begin() + static_cast<std::size_t>(r + 1) * dh, out.row(r) + c0);
  }
  return out;
}

template <typename T>
SdaGrads<T> vjp_sda(const MatrixT<T>& q, const MatrixT<T>& k, const MatrixT<T>& v, int heads, const MatrixT<T>& gy) {
  check_sda(q.rows, q.cols, k.rows, k.cols, v.rows, v.cols, heads);
  if (gy.rows != q.rows || gy.cols != v.cols) throw ShapeError("sda cotangent shape mismatch");
  const int tq = q.rows, tk = k.rows, dh = q.cols / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  SdaGrads<T> g{MatrixT<T>(tq, q.cols), MatrixT<T>(tk, k.cols), MatrixT<T>(tk, v.cols)};
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * dh;
    MatrixT<T> sc(tq, tk);
    for (int i = 0; i < tq; ++i)
      for (int j = 0; j < tk; ++j) {
        T acc = 0;
        for (int c = 0; c < dh; ++c) acc += q(i, c0 + c) * k(j, c0 + c);
        sc(i, j) = acc * scale;
      }
    const MatrixT<T> p = softmax_rows(sc);
    MatrixT<T> gp(tq, tk);
    for (int i = 0; i < tq; ++i)
      for (int j = 0; j < tk; ++j) {
        T acc = 0;
        for (int c = 0; c < dh; ++c) acc += gy(i, c0 + c) * v(j, c0 + c);
        gp(i, j) = acc;
      }
    for (int j = 0; j < tk; ++j)
      for (int c = 0; c < dh; ++c) {
        T acc = 0;
        for (int i = 0; i < tq; ++i) acc += p(i, j) * gy(i, c0 + c);
        g.v(j, c0 + c) = acc;
      }
    const MatrixT<T> gs = softmax_vjp_from_output(p, gp);
    for (int i = 0; i < tq; ++i)
      for (int c = 0; c < dh; ++c) {
        T acc = 0;
        for (int j = 0; j < tk; ++j) acc += gs(i, j) * k(j, c0 + c);
        g.q(i, c0 + c) = acc * scale;
      }
    for (int j = 0; j < tk; ++j)
      for (int c = 0; c < dh; ++c) {
        T acc = 0;
        for (int i = 0; i < tq; ++i) acc += gs(i, j) * q(i, c0 + c);
        g.k(j, c0 + c) = acc * scale;
      }
  }
  return g;
}

// ---- pooling ----

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  TensorT<T> y(x.n(), x.c(), 1, 1);
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      T s = 0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      y.at(n, c, 0, 0) = s / static_cast<T>(plane);
    }
  return y;
}

template <typename T>
TensorT<T> vjp_global_avg_pool(const Shape& in, const TensorT<T>& gy) {
  if (!(gy.shape() == Shape{in.n, in.c, 1, 1})) throw ShapeError("pool cotangent shape mismatch");
  TensorT<T> g(in);
  const std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c) {
      T* p = g.plane(n, c);
      const T v = gy.at(n, c, 0, 0) / static_cast<T>(plane);
      for (std::size_t i = 0; i < plane; ++i) p[i] = v;
    }
  return g;
}

// ---- layout ----

template <typename T>
MatrixT<T> to_tokens(const TensorT<T>& x) {
  const int hw = x.h() * x.w();
  MatrixT<T> m(x.n() * hw, x.c());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      for (int i = 0; i < hw; ++i) m(n * hw + i, c) = p[i];
    }
  return m;
}

template <typename T>
TensorT<T> from_tokens(const MatrixT<T>& m, const Shape& s) {
  const int hw = s.h * s.w;
  if (m.rows != s.n * hw || m.cols != s.c) throw ShapeError("token matrix does not match " + s.str());
  TensorT<T> x(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      T* p = x.plane(n, c);
      for (int i = 0; i < hw; ++i) p[i] = m(n * hw + i, c);
    }
  return x;
}

// ---- finite differences ----

std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double step) {
  if (!(step > 0)) throw std::invalid_argument("finite difference step must be positive");
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(x);
    x[i] = orig - step;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw std::domain_error("non-finite function value in finite differences");
    g[i] = (fp - fm) / (2 * step);
  }
  return g;
}

TensorD finite_difference_gradient(const std::function<double(const TensorD&)>& f, const TensorD& x, double step) {
  TensorD probe = x;
  auto flat = [&](const std::vector<double>& v) {
    probe.values() = v;
    return f(probe);
  };
  return TensorD(x.shape(), finite_difference_gradient(flat, x.values(), step));
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: size mismatch");
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

double gradient_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double scale = 0;
  for (double v : analytic) scale = std::max(scale, std::abs(v));
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  return max_relative_error(analytic, numeric, std::max(kGradientScaleFloor * scale, 1e-8));
}

#define LOWFORMER_INSTANTIATE_OPS(T)                                                                          \
  template TensorT<T> normalize(const TensorT<T>&, const NormSpec&, const NormParams<T>&);                     \
  template NormGrads<T> vjp_normalize(const TensorT<T>&, const NormSpec&, const NormParams<T>&, const TensorT<T>&); \
  template T activation_scalar(T, Activation);                                                                \
  template TensorT<T> activation(const TensorT<T>&, Activation);                                              \
  template TensorT<T> vjp_activation(const TensorT<T>&, Activation, const TensorT<T>&);                       \
  template MatrixT<T> linear(const MatrixT<T>&, const MatrixT<T>&, const std::vector<T>&);                    \
  template LinearGrads<T> vjp_linear(const MatrixT<T>&, const MatrixT<T>&, const MatrixT<T>&);                \
  template MatrixT<T> softmax_rows(const MatrixT<T>&);                                                        \
  template MatrixT<T> vjp_softmax_rows(const MatrixT<T>&, const MatrixT<T>&);                                 \
  template MatrixT<T> sda(const MatrixT<T>&, const MatrixT<T>&, const MatrixT<T>&, int);                      \
  template SdaGrads<T> vjp_sda(const MatrixT<T>&, const MatrixT<T>&, const MatrixT<T>&, int, const MatrixT<T>&); \
  template TensorT<T> global_avg_pool(const TensorT<T>&);                                                     \
  template TensorT<T> vjp_global_avg_pool(const Shape&, const TensorT<T>&);                                   \
  template MatrixT<T> to_tokens(const TensorT<T>&);                                                           \
  template TensorT<T> from_tokens(const MatrixT<T>&, const Shape&);

LOWFORMER_INSTANTIATE_OPS(float)
LOWFORMER_INSTANTIATE_OPS(double)

}  // namespace lowformer
