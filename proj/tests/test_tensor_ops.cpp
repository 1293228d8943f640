#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lowformer/ops.hpp"
#include "lowformer/parallel.hpp"
#include "oracles.hpp"

using namespace lowformer;

namespace {

double inner(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

template <typename T>
std::vector<double> dvec(const TensorT<T>& t) {
  return oracle::as_double(t.values());
}

}  // namespace

TEST_CASE("tensor element count and index") {
  Tensor t(2, 3, 4, 5);
  CHECK(t.size() == 120);
  CHECK(t.index(1, 2, 3, 4) == 119);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST_CASE("conv2d examples") {
  SUBCASE("1x1 weight 2 scales") {
    Tensor x(1, 1, 2, 2, 1.0f);
    auto y = conv2d(x, ConvSpec::pointwise(1, 1), std::vector<float>{2.0f});
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    for (float v : y.values()) CHECK(v == 2.0f);
  }
  SUBCASE("3x3 ones over 1..9") {
    Tensor x(Shape{1, 1, 3, 3}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8, 9});
    ConvSpec s = ConvSpec::full(1, 1, 3);
    s.padding = 0;
    auto y = conv2d(x, s, std::vector<float>(9, 1.0f));
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 45.0f);
  }
  SUBCASE("depthwise stride 2 matches nested-loop oracle, frozen") {
    auto x = random_tensor<float>({1, 2, 4, 4}, 7);
    std::vector<float> w(18);
    fill_uniform(w, 11);
    auto y = conv2d(x, ConvSpec::depthwise(2, 3, 2), w);
    REQUIRE(y.shape() == Shape{1, 2, 2, 2});
    const std::vector<double> expect{-1.13528979, 0.267140687, -0.0278392974, 0.302621692,
                                     -0.336135477, 2.13932896, 0.337722361, 1.42073107};
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-6));
  }
}

TEST_CASE("conv2d errors") {
  Tensor x(1, 3, 4, 4);
  CHECK_THROWS_AS(conv2d(x, ConvSpec::pointwise(2, 4), std::vector<float>(8)), ShapeError);
  ConvSpec bad = ConvSpec::full(3, 4, 3);
  bad.groups = 2;
  CHECK_THROWS_AS(conv2d(x, bad, std::vector<float>(1)), std::invalid_argument);
}

TEST_CASE("ungrouped conv equals oracle on all small shapes") {
  std::uint64_t seed = 100;
  for (int n : {1, 2})
    for (int cin : {1, 2, 3, 4})
      for (int cout : {1, 3})
        for (int hw : {3, 5, 8})
          for (int k : {1, 3})
            for (int s : {1, 2}) {
              ConvSpec spec = ConvSpec::full(cin, cout, k, s);
              auto x = random_tensor<float>({n, cin, hw, hw}, ++seed);
              std::vector<float> w(spec.weight_count());
              fill_uniform(w, ++seed);
              Shape os;
              auto ref = oracle::conv(dvec(x), x.shape(), spec, oracle::as_double(w), &os);
              auto fast = conv2d(x, spec, w);
              auto loop = conv2d_reference(x, spec, w);
              REQUIRE(fast.shape() == os);
              CHECK(oracle::max_abs_diff(dvec(loop), ref) <= 1e-5);
              CHECK(oracle::max_abs_diff(dvec(fast), ref) <= 1e-5);
              CHECK(oracle::max_abs_diff(dvec(fast), dvec(loop)) <= 1e-4);
            }
}

TEST_CASE("fast path agrees with reference for grouped and strided shapes") {
  std::uint64_t seed = 900;
  const ConvSpec specs[] = {ConvSpec::depthwise(8, 3, 1), ConvSpec::depthwise(8, 3, 2), ConvSpec::depthwise(6, 5, 1),
                            [] { auto s = ConvSpec::full(8, 12, 3, 2); s.groups = 4; return s; }(),
                            [] { auto s = ConvSpec::full(3, 12, 3, 2); s.groups = 3; return s; }(),
                            ConvSpec::full(16, 24, 3, 1), ConvSpec::pointwise(40, 17)};
  for (const auto& spec : specs) {
    auto x = random_tensor<float>({2, spec.in_channels, 13, 11}, ++seed);
    std::vector<float> w(spec.weight_count()), b(spec.out_channels);
    fill_uniform(w, ++seed);
    fill_uniform(b, ++seed);
    auto fast = conv2d(x, spec, w, b);
    auto ref = conv2d_reference(x, spec, w, b);
    CHECK(oracle::max_abs_diff(dvec(fast), dvec(ref)) <= 1e-4);
  }
}

TEST_CASE("depthwise conv isolates channels") {
  const int C = 4;
  auto x = random_tensor<float>({1, C, 6, 6}, 3);
  std::vector<float> w(C * 9);
  fill_uniform(w, 4);
  for (int j = 0; j < C; ++j) {
    Tensor xz = x;
    std::fill(xz.plane(0, j), xz.plane(0, j) + 36, 0.0f);
    auto y = conv2d(xz, ConvSpec::depthwise(C, 3), w);
    auto y0 = conv2d(x, ConvSpec::depthwise(C, 3), w);
    for (int c = 0; c < C; ++c) {
      bool zero = true, same = true;
      for (int i = 0; i < 36; ++i) {
        zero &= y.plane(0, c)[i] == 0.0f;
        same &= y.plane(0, c)[i] == y0.plane(0, c)[i];
      }
      if (c == j)
        CHECK(zero);
      else
        CHECK(same);
    }
  }
}

TEST_CASE("transposed conv examples") {
  SUBCASE("1x1 weight 3") {
    Tensor x(1, 1, 1, 1, 1.0f);
    auto y = transposed_conv2d(x, ConvSpec::transposed_conv(1, 1, 1, 1), std::vector<float>{3.0f});
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 3.0f);
  }
  SUBCASE("2x2 -> 4x4 equals explicit Jacobian transpose, frozen") {
    auto x = random_tensor<float>({1, 1, 2, 2}, 3);
    std::vector<float> w(9);
    fill_uniform(w, 5);
    auto spec = ConvSpec::transposed_conv(1, 1, 3, 2);
    auto y = transposed_conv2d(x, spec, w);
    REQUIRE(y.shape() == Shape{1, 1, 4, 4});
    Shape os;
    auto J = oracle::conv_jacobian({1, 1, 4, 4}, ConvSpec::full(1, 1, 3, 2), oracle::as_double(w), &os);
    auto ref = oracle::apply_transpose(J, dvec(x));
    CHECK(oracle::max_abs_diff(dvec(y), ref) <= 1e-6);
    const std::vector<double> frozen{-0.0962899774, -0.308985114, 0.498500913,  0.491229057,
                                     -0.122447215,  0.31407088,   0.0550894067, -0.188934296,
                                     -0.147863239,  -0.253820896, 0.251729518,  0.248057425,
                                     0.0677817166,  0.333595812,  -0.115394868, -0.18065469};
    for (std::size_t i = 0; i < frozen.size(); ++i) CHECK(y[i] == doctest::Approx(frozen[i]).epsilon(1e-6));
    CHECK(oracle::max_abs_diff(dvec(transposed_conv2d_reference(x, spec, w)), ref) <= 1e-6);
  }
  SUBCASE("depthwise transposed keeps channels apart") {
    auto x = random_tensor<float>({1, 2, 3, 3}, 9);
    for (int i = 0; i < 9; ++i) x.plane(0, 0)[i] = 0.0f;
    std::vector<float> w(18);
    fill_uniform(w, 10);
    auto y = transposed_conv2d(x, ConvSpec::transposed_conv(2, 2, 3, 2, 2), w);
    REQUIRE(y.shape() == Shape{1, 2, 6, 6});
    for (int i = 0; i < 36; ++i) CHECK(y.plane(0, 0)[i] == 0.0f);
    bool any = false;
    for (int i = 0; i < 36; ++i) any |= y.plane(0, 1)[i] != 0.0f;
    CHECK(any);
  }
}

TEST_CASE("transposed conv is the adjoint of conv") {
  std::uint64_t seed = 500;
  struct Case {
    int cin, cout, k, s, g, hw;
  };
  for (const Case& c : {Case{1, 1, 3, 2, 1, 4}, Case{3, 5, 3, 2, 1, 8}, Case{4, 4, 3, 1, 4, 7},
                        Case{6, 4, 3, 2, 2, 6}, Case{2, 6, 1, 1, 1, 5}, Case{8, 8, 3, 2, 8, 10}}) {
    ConvSpec fwd = ConvSpec::full(c.cin, c.cout, c.k, c.s);
    fwd.groups = c.g;
    auto x = random_tensor<double>({2, c.cin, c.hw, c.hw}, ++seed);
    std::vector<double> w(fwd.weight_count());
    fill_uniform(w, ++seed);
    auto cx = conv2d(x, fwd, w);
    auto y = random_tensor<double>(cx.shape(), ++seed);
    ConvSpec adj = ConvSpec::transposed_conv(c.cout, c.cin, c.k, c.s, c.g);
    adj.output_padding = c.hw - ((cx.h() - 1) * c.s - 2 * adj.padding + c.k);
    auto ty = transposed_conv2d(y, adj, w);
    REQUIRE(ty.shape() == x.shape());
    const double lhs = inner(dvec(cx), dvec(y)), rhs = inner(dvec(x), dvec(ty));
    CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("stride-2 transposed conv doubles spatial size") {
  for (int hw : {1, 2, 7, 14}) {
    auto s = ConvSpec::transposed_conv(4, 8, 3, 2);
    CHECK(s.output_shape({1, 4, hw, hw}) == Shape{1, 8, 2 * hw, 2 * hw});
  }
}

TEST_CASE("normalize") {
  auto x = random_tensor<float>({2, 3, 4, 4}, 1);
  SUBCASE("batch inference identity parameters") {
    NormParams<float> p{{1, 1, 1}, {0, 0, 0}, {0, 0, 0}, {1, 1, 1}};
    NormSpec s{NormKind::batch_inference, 3, 1e-12};
    auto y = normalize(x, s, p);
    CHECK(oracle::max_abs_diff(dvec(y), dvec(x)) <= 1e-6);
  }
  SUBCASE("missing running statistics") {
    NormParams<float> p{{1, 1, 1}, {0, 0, 0}, {}, {}};
    CHECK_THROWS_AS(normalize(x, NormSpec{NormKind::batch_inference, 3, 1e-5}, p), std::invalid_argument);
  }
  SUBCASE("layer norm two-point") {
    Tensor t(Shape{1, 2, 1, 1}, std::vector<float>{1.0f, 3.0f});
    NormParams<float> p{{1, 1}, {0, 0}, {}, {}};
    auto y = normalize(t, NormSpec{NormKind::layer, 2, 1e-6}, p);
    CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-5));
  }
  SUBCASE("layer norm moments") {
    auto xd = random_tensor<double>({2, 16, 5, 5}, 77, -3, 5);
    NormParams<double> p{std::vector<double>(16, 1.0), std::vector<double>(16, 0.0), {}, {}};
    auto y = normalize(xd, NormSpec{NormKind::layer, 16, 1e-5}, p);
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 25; ++i) {
        double m = 0, v = 0;
        for (int c = 0; c < 16; ++c) m += y.plane(n, c)[i];
        m /= 16;
        for (int c = 0; c < 16; ++c) v += (y.plane(n, c)[i] - m) * (y.plane(n, c)[i] - m);
        v /= 16;
        CHECK(std::abs(m) <= 1e-6);
        CHECK(std::abs(v - 1.0) <= 1e-4);
      }
  }
  SUBCASE("epsilon must be positive") {
    NormParams<float> p{{1, 1, 1}, {0, 0, 0}, {}, {}};
    CHECK_THROWS(normalize(x, NormSpec{NormKind::layer, 3, 0.0}, p));
  }
}

TEST_CASE("activations") {
  CHECK(activation_scalar(3.0f, Activation::hardswish) == 3.0f);
  CHECK(activation_scalar(-3.0f, Activation::hardswish) == 0.0f);
  CHECK(activation_scalar(0.0f, Activation::gelu) == 0.0f);
  CHECK(activation_scalar(1.0, Activation::gelu) == doctest::Approx(0.8413447460685429));
  Tensor x(Shape{1, 2, 1, 1}, std::vector<float>{-2.0f, 5.0f});
  auto y = activation(x, Activation::relu);
  CHECK(y[0] == 0.0f);
  CHECK(y[1] == 5.0f);
  CHECK(activation_scalar(1.5f, Activation::identity) == 1.5f);
}

TEST_CASE("linear") {
  SUBCASE("identity") {
    auto x = random_matrix<float>(3, 4, 2);
    Matrix I(4, 4);
    for (int i = 0; i < 4; ++i) I(i, i) = 1;
    auto y = linear(x, I, std::vector<float>(4, 0.0f));
    CHECK(y.data == x.data);
  }
  SUBCASE("hand arithmetic") {
    Matrix x(1, 2, std::vector<float>{1, 2});
    Matrix W(2, 2, std::vector<float>{1, 1, 0, 1});
    auto y = linear(x, W);
    CHECK(y(0, 0) == 3.0f);
    CHECK(y(0, 1) == 2.0f);
  }
  SUBCASE("random 4x8 vs triple loop") {
    auto x = random_matrix<float>(4, 8, 31);
    auto W = random_matrix<float>(5, 8, 32);
    std::vector<float> b(5);
    fill_uniform(b, 33);
    auto y = linear(x, W, b);
    std::vector<double> wt(8 * 5);
    for (int o = 0; o < 5; ++o)
      for (int i = 0; i < 8; ++i) wt[i * 5 + o] = W(o, i);
    auto ref = oracle::matmul(oracle::as_double(x.data), wt, 4, 8, 5);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 5; ++c) ref[r * 5 + c] += b[c];
    CHECK(oracle::max_abs_diff(oracle::as_double(y.data), ref) <= 1e-6);
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(linear(Matrix(2, 3), Matrix(2, 4)), ShapeError); }
}

TEST_CASE("softmax_rows") {
  Matrix a(1, 2, std::vector<float>{0, 0});
  auto y = softmax_rows(a);
  CHECK(y(0, 0) == doctest::Approx(0.5));
  CHECK(y(0, 1) == doctest::Approx(0.5));
  Matrix big(1, 2, std::vector<float>{1000, 0});
  auto yb = softmax_rows(big);
  CHECK(yb(0, 0) == 1.0f);
  CHECK(yb(0, 1) == doctest::Approx(0.0).epsilon(1e-30));
  CHECK(std::isfinite(yb(0, 1)));
  MatrixD r(1, 3, std::vector<double>{1, 2, 3});
  auto yr = softmax_rows(r);
  auto ref = oracle::softmax({1, 2, 3});
  for (int i = 0; i < 3; ++i) CHECK(std::abs(yr(0, i) - ref[i]) <= 1e-7);

  auto m = random_matrix<float>(6, 9, 8, -4, 4);
  auto sm = softmax_rows(m);
  auto shifted = m;
  for (int c = 0; c < 9; ++c) shifted(2, c) += 7.5f;
  auto ss = softmax_rows(shifted);
  for (int rr = 0; rr < 6; ++rr) {
    double s = 0;
    for (int c = 0; c < 9; ++c) {
      CHECK(sm(rr, c) >= 0.0f);
      s += sm(rr, c);
      CHECK(std::abs(sm(rr, c) - ss(rr, c)) <= 1e-6);
    }
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }
}

TEST_CASE("sda") {
  SUBCASE("single token returns v") {
    auto q = random_matrix<float>(1, 4, 1), k = random_matrix<float>(1, 4, 2), v = random_matrix<float>(1, 4, 3);
    auto o = sda(q, k, v, 2);
    for (int c = 0; c < 4; ++c) CHECK(o(0, c) == doctest::Approx(v(0, c)));
  }
  SUBCASE("identical keys give column mean of v") {
    auto q = random_matrix<double>(5, 4, 4);
    MatrixD k(5, 4);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 4; ++c) k(r, c) = 0.3 * c - 0.1;
    auto v = random_matrix<double>(5, 4, 5);
    auto o = sda(q, k, v, 1);
    for (int c = 0; c < 4; ++c) {
      double m = 0;
      for (int r = 0; r < 5; ++r) m += v(r, c);
      m /= 5;
      for (int r = 0; r < 5; ++r) CHECK(std::abs(o(r, c) - m) <= 1e-12);
    }
  }
  SUBCASE("2 tokens dim 2 vs hand-rolled oracle, frozen") {
    auto q = random_matrix<double>(2, 2, 21), k = random_matrix<double>(2, 2, 22), v = random_matrix<double>(2, 2, 23);
    auto o = sda(q, k, v, 1);
    auto ref = oracle::attention(q.data, k.data, v.data, 2, 2);
    CHECK(oracle::max_abs_diff(o.data, ref) <= 1e-6);
    const std::vector<double> frozen{-0.14312497660523524, 0.37521447597828733, -0.23025187552169776, 0.29212633671454324};
    CHECK(oracle::max_abs_diff(o.data, frozen) <= 1e-12);
  }
  SUBCASE("multi-head equals per-head oracle") {
    const int t = 7, d = 12, heads = 3, dh = 4;
    auto q = random_matrix<double>(t, d, 41), k = random_matrix<double>(t, d, 42), v = random_matrix<double>(t, d, 43);
    auto o = sda(q, k, v, heads);
    for (int h = 0; h < heads; ++h) {
      std::vector<double> qh, kh, vh;
      for (int r = 0; r < t; ++r)
        for (int c = 0; c < dh; ++c) {
          qh.push_back(q(r, h * dh + c));
          kh.push_back(k(r, h * dh + c));
          vh.push_back(v(r, h * dh + c));
        }
      auto ref = oracle::attention(qh, kh, vh, t, dh);
      for (int r = 0; r < t; ++r)
        for (int c = 0; c < dh; ++c) CHECK(std::abs(o(r, h * dh + c) - ref[r * dh + c]) <= 1e-12);
    }
  }
  SUBCASE("heads must divide dim") {
    Matrix q(2, 6);
    CHECK_THROWS_AS(sda(q, q, q, 4), std::invalid_argument);
  }
  SUBCASE("permutation equivariance is bit-exact single-threaded") {
    ThreadScope one(1);
    const int t = 49, d = 64;
    auto q = random_matrix<float>(t, d, 51), k = random_matrix<float>(t, d, 52), v = random_matrix<float>(t, d, 53);
    std::vector<int> perm(t);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937 rng(3);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix qp(t, d), kp(t, d), vp(t, d);
    for (int r = 0; r < t; ++r)
      for (int c = 0; c < d; ++c) {
        qp(r, c) = q(perm[r], c);
        kp(r, c) = k(perm[r], c);
        vp(r, c) = v(perm[r], c);
      }
    auto o = sda(q, k, v, 2), op = sda(qp, kp, vp, 2);
    bool equal = true;
    for (int r = 0; r < t; ++r)
      for (int c = 0; c < d; ++c) equal &= op(r, c) == o(perm[r], c);
    CHECK(equal);
  }
}

TEST_CASE("global_avg_pool") {
  Tensor c(1, 3, 4, 4, 5.0f);
  auto p = global_avg_pool(c);
  CHECK(p.shape() == Shape{1, 3, 1, 1});
  for (float v : p.values()) CHECK(v == 5.0f);
  Tensor m(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  CHECK(global_avg_pool(m)[0] == 2.5f);
  auto x = random_tensor<double>({1, 6, 5, 7}, 12);
  auto px = global_avg_pool(x);
  const double mean_in = std::accumulate(x.values().begin(), x.values().end(), 0.0) / x.size();
  const double mean_out = std::accumulate(px.values().begin(), px.values().end(), 0.0) / px.size();
  CHECK(std::abs(mean_in - mean_out) <= 1e-6);
}

TEST_CASE("single-threaded fixed-seed execution is bit-reproducible") {
  auto run = [] {
    ThreadScope one(1);
    auto x = random_tensor<float>({1, 16, 14, 14}, 1234);
    std::vector<float> w(32 * 16 * 9);
    fill_uniform(w, 99);
    auto y = conv2d(x, ConvSpec::full(16, 32, 3, 2), w);
    auto tk = to_tokens(y);
    auto o = sda(tk, tk, tk, 2);
    return o.data;
  };
  CHECK(run() == run());
}

TEST_CASE("thread count does not change results") {
  auto x = random_tensor<float>({2, 24, 20, 20}, 19);
  std::vector<float> w(48 * 24 * 9);
  fill_uniform(w, 20);
  Tensor a, b;
  {
    ThreadScope t(1);
    a = conv2d(x, ConvSpec::full(24, 48, 3, 1), w);
  }
  {
    ThreadScope t(4);
    b = conv2d(x, ConvSpec::full(24, 48, 3, 1), w);
  }
  CHECK(a.values() == b.values());
}
