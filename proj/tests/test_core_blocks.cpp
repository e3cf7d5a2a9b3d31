#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "pacsr/attention.hpp"
#include "pacsr/errors.hpp"
#include "pacsr/grad_check.hpp"
#include "pacsr/sfi.hpp"
#include "pacsr/shuffle.hpp"
#include "pacsr/wavelet.hpp"

using namespace pacsr;

namespace {

Tensor<double> random_tensor(const Shape& s, std::mt19937_64& rng, double scale = 1.0) {
  Tensor<double> t(s);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

void randomize(ConvLayer<double>& c, std::mt19937_64& rng, double scale) {
  c.weight.mutable_value() = random_tensor(c.weight.shape(), rng, scale);
  if (c.bias.defined()) c.bias.mutable_value() = random_tensor(c.bias.shape(), rng, scale);
}

oracle::Vec bias_of(const ConvLayer<double>& c) {
  return c.bias.defined() ? oracle::to_vec(c.bias.value()) : oracle::Vec{};
}

}  // namespace

TEST_SUITE("core_blocks") {

TEST_CASE("haar of a constant map") {
  Tensor<double> f({1, 4, 4}, 1.0);
  const auto w = dwt2(f);
  CHECK(w.ll.shape() == Shape{1, 2, 2});
  for (double v : w.ll.values()) CHECK(v == doctest::Approx(2.0));
  for (const auto* t : {&w.lh, &w.hl, &w.hh})
    for (double v : t->values()) CHECK(v == 0.0);
  const auto back = idwt2(w);
  for (double v : back.values()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("haar on one 2x2 block") {
  Tensor<double> f({1, 2, 2}, std::vector<double>{3, 5, -2, 7});
  const auto w = dwt2(f);
  CHECK(w.ll[0] == doctest::Approx((3 + 5 - 2 + 7) / 2.0));
  CHECK(w.lh[0] == doctest::Approx((3 + 5 + 2 - 7) / 2.0));
  CHECK(w.hl[0] == doctest::Approx((3 - 5 - 2 - 7) / 2.0));
  CHECK(w.hh[0] == doctest::Approx((3 - 5 + 2 + 7) / 2.0));
}

TEST_CASE("haar round trip and energy") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 1 + trial % 3, h = 2 * (1 + trial % 5), w = 2 * (1 + (trial * 3) % 7);
    const auto f = random_tensor({c, h, w}, rng);
    const auto co = dwt2(f);
    CHECK(max_abs_diff(idwt2(co), f) < 1e-12);
    double ef = 0, ew = 0;
    for (double v : f.values()) ef += v * v;
    for (const auto* t : {&co.ll, &co.lh, &co.hl, &co.hh})
      for (double v : t->values()) ew += v * v;
    CHECK(std::abs(ef - ew) / ef < 1e-12);
  }
  Tensor<float> ff({3, 8, 8});
  std::uniform_real_distribution<float> u(-1, 1);
  for (auto& v : ff.values()) v = u(rng);
  CHECK(max_abs_diff(idwt2(dwt2(ff)), ff) < 1e-6f);
}

TEST_CASE("haar zero subbands and shape errors") {
  WaveletCoeffs<double> z{Tensor<double>({2, 3, 3}), Tensor<double>({2, 3, 3}), Tensor<double>({2, 3, 3}),
                          Tensor<double>({2, 3, 3})};
  const auto f = idwt2(z);
  CHECK(f.shape() == Shape{2, 6, 6});
  for (double v : f.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(dwt2(Tensor<double>({1, 3, 4})), DimensionError);
  CHECK_THROWS_AS(dwt2(Tensor<double>({1, 4, 5})), DimensionError);
  z.hh = Tensor<double>({2, 3, 2});
  CHECK_THROWS_AS(idwt2(z), DimensionError);
}

TEST_CASE("batched haar matches the oracle layout") {
  std::mt19937_64 rng(2);
  const auto x = random_tensor({2, 3, 4, 6}, rng);
  const auto e = ag::dwt2(ag::Var<double>(x));
  CHECK(e.shape() == Shape{2, 12, 2, 3});
  for (int n = 0; n < 2; ++n) {
    const oracle::Vec xn(x.data() + n * 72, x.data() + (n + 1) * 72);
    const auto ref = oracle::haar(xn, 3, 4, 6);
    const oracle::Vec got(e.value().data() + n * 72, e.value().data() + (n + 1) * 72);
    CHECK(oracle::max_abs_diff(ref, got) < 1e-12);
  }
  CHECK(max_abs_diff(ag::idwt2(e).value(), x) < 1e-12);
}

TEST_CASE("sfi with zero weights collapses to zero") {
  std::mt19937_64 rng(3);
  const auto f = random_tensor({4, 8, 8}, rng);
  const auto t = sfi_forward(f, SFIParams<double>::zeros(4));
  for (double v : t.values()) CHECK(v == 0.0);
}

TEST_CASE("sfi identity path through perfect reconstruction") {
  // conv1 = conv2 = conv3 = 0 and agg averaging its two halves: (idwt(dwt f) + f) / 2 = f.
  const int c = 3;
  std::mt19937_64 rng(4);
  auto p = SFIParams<double>::zeros(c);
  for (int o = 0; o < c; ++o) {
    p.agg.weight.mutable_value().at(o, o, 1, 1) = 0.5;
    p.agg.weight.mutable_value().at(o, c + o, 1, 1) = 0.5;
  }
  const auto f = random_tensor({c, 6, 8}, rng);
  CHECK(max_abs_diff(sfi_forward(f, p), f) < 1e-12);
}

TEST_CASE("sfi matches a scalar re-implementation") {
  const int c = 8, h = 16, w = 16;
  std::mt19937_64 rng(5);
  auto p = SFIParams<double>::zeros(c);
  randomize(p.conv1, rng, 0.2);
  randomize(p.conv2, rng, 0.2);
  randomize(p.conv3, rng, 0.2);
  randomize(p.agg, rng, 0.2);
  const auto f = random_tensor({c, h, w}, rng);

  const auto fv = oracle::to_vec(f);
  const auto e = oracle::haar(fv, c, h, w);
  const auto z = oracle::conv(fv, c, h, w, oracle::to_vec(p.conv1.weight.value()), bias_of(p.conv1), c, 3);
  auto g = oracle::conv(e, 4 * c, h / 2, w / 2, oracle::to_vec(p.conv2.weight.value()), bias_of(p.conv2), 4 * c, 1);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += e[i];
  auto hh = oracle::conv(z, c, h, w, oracle::to_vec(p.conv3.weight.value()), bias_of(p.conv3), c, 1);
  for (std::size_t i = 0; i < hh.size(); ++i) hh[i] += fv[i];
  auto cat = oracle::ihaar(g, c, h, w);
  cat.insert(cat.end(), hh.begin(), hh.end());
  const auto t = oracle::conv(cat, 2 * c, h, w, oracle::to_vec(p.agg.weight.value()), bias_of(p.agg), c, 3);

  CHECK(oracle::max_abs_diff(t, oracle::to_vec(sfi_forward(f, p))) < 1e-5);

  // Single precision stays within the same bound.
  SFIParams<float> pf{{ag::Var<float>(p.conv1.weight.value().cast<float>()), ag::Var<float>(p.conv1.bias.value().cast<float>())},
                      {ag::Var<float>(p.conv2.weight.value().cast<float>()), ag::Var<float>(p.conv2.bias.value().cast<float>())},
                      {ag::Var<float>(p.conv3.weight.value().cast<float>()), ag::Var<float>(p.conv3.bias.value().cast<float>())},
                      {ag::Var<float>(p.agg.weight.value().cast<float>()), ag::Var<float>(p.agg.bias.value().cast<float>())}};
  CHECK(oracle::max_abs_diff(t, oracle::to_vec(sfi_forward(f.cast<float>(), pf))) < 1e-5);
}

TEST_CASE("sfi rejects mismatched channels") {
  CHECK_THROWS_AS(sfi_forward(Tensor<double>({3, 8, 8}), SFIParams<double>::zeros(4)), DimensionError);
  CHECK_THROWS_AS(sfi_forward(Tensor<double>({4, 7, 8}), SFIParams<double>::zeros(4)), DimensionError);
}

TEST_CASE("shuffle layout and round trips") {
  Tensor<double> f({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto rev = shuffle(f, Permutation{3, 2, 1, 0}, 4);
  CHECK(rev.tokens.shape() == Shape{1, 4, 1});
  CHECK(std::vector<double>(rev.tokens.values().begin(), rev.tokens.values().end()) ==
        std::vector<double>{4, 3, 2, 1});

  std::mt19937_64 rng(6);
  const auto g = random_tensor({3, 4, 6}, rng);
  const auto id = shuffle(g, identity_permutation(24), 24);
  for (int i = 0; i < 24; ++i)
    for (int c = 0; c < 3; ++c) CHECK(id.tokens[i * 3 + c] == g[c * 24 + i]);

  for (int trial = 0; trial < 100; ++trial) {
    const auto perm = random_permutation(24, rng);
    CHECK(is_permutation(perm, 24));
    const auto t = shuffle(g, perm, 6);
    CHECK(t.num_tokens() == 4);
    CHECK(inverse_shuffle(t) == g);
  }
}

TEST_CASE("shuffle argument errors") {
  Tensor<double> f({2, 2, 2});
  CHECK_THROWS_AS(shuffle(f, Permutation{0, 1, 2, 2}, 2), ArgumentError);
  CHECK_THROWS_AS(shuffle(f, Permutation{0, 1, 2}, 1), ArgumentError);
  CHECK_THROWS_AS(shuffle(f, identity_permutation(4), 3), ArgumentError);
  auto t = shuffle(f, identity_permutation(4), 2);
  t.permutation[0] = 7;
  CHECK_THROWS_AS(inverse_shuffle(t), ArgumentError);
}

TEST_CASE("dense attention against the scalar oracle") {
  std::mt19937_64 rng(7);
  const int p = 4, d = 8;
  const auto q = random_tensor({p, d}, rng, 2.0), k = random_tensor({p, d}, rng, 2.0);
  const auto a = dense_attention(q, k);
  CHECK(oracle::max_abs_diff(oracle::to_vec(a), oracle::dense_softmax(oracle::to_vec(q), oracle::to_vec(k), p, d)) <
        1e-9);
  for (int i = 0; i < p; ++i) {
    double s = 0;
    for (int j = 0; j < p; ++j) {
      CHECK(a[i * p + j] > 0.0);
      CHECK(a[i * p + j] < 1.0);
      s += a[i * p + j];
    }
    CHECK(std::abs(s - 1) < 1e-6);
  }
}

TEST_CASE("dense attention special cases") {
  const auto u = dense_attention(Tensor<double>({5, 3}), Tensor<double>({5, 3}));
  for (double v : u.values()) CHECK(v == doctest::Approx(0.2));
  std::mt19937_64 rng(8);
  const auto one = dense_attention(random_tensor({1, 4}, rng), random_tensor({1, 4}, rng));
  CHECK(one.shape() == Shape{1, 1});
  CHECK(one[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(dense_attention(Tensor<double>({3, 0}), Tensor<double>({3, 0})), ArgumentError);
  CHECK_THROWS_AS(dense_attention(Tensor<double>({3, 2}), Tensor<double>({4, 2})), DimensionError);
}

TEST_CASE("sparse attention against the scalar oracle") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 2 + trial % 7, d = 1 + trial % 5;
    const auto q = random_tensor({p, d}, rng, 2.0), k = random_tensor({p, d}, rng, 2.0);
    const auto qv = oracle::to_vec(q), kv = oracle::to_vec(k);
    const auto s = sparse_attention(q, k);
    CHECK(oracle::max_abs_diff(oracle::to_vec(s), oracle::sparse_softmax(qv, kv, p, d)) < 1e-9);
    for (int i = 0; i < p; ++i) {
      std::vector<double> dots(p, 0.0);
      for (int j = 0; j < p; ++j)
        for (int t = 0; t < d; ++t) dots[j] += qv[i * d + t] * kv[j * d + t];
      const bool any_nonneg = std::any_of(dots.begin(), dots.end(), [](double v) { return v >= 0; });
      double sum = 0;
      for (int j = 0; j < p; ++j) {
        sum += s[i * p + j];
        if (any_nonneg && dots[j] < 0) CHECK(s[i * p + j] == 0.0);
      }
      CHECK(std::abs(sum - 1) < 1e-9);
    }
  }
}

TEST_CASE("sparse attention hand-computed row") {
  // With d = 1 and q = 1 the scaled logits equal k: [2, -1, 1].
  Tensor<double> q({3, 1}, std::vector<double>{1, 1, 1});
  Tensor<double> k({3, 1}, std::vector<double>{2, -1, 1});
  const auto s = sparse_attention(q, k);
  const double e2 = std::exp(2.0), e1 = std::exp(1.0);
  CHECK(s[0] == doctest::Approx(e2 / (e2 + e1)).epsilon(1e-12));
  CHECK(s[1] == 0.0);
  CHECK(s[2] == doctest::Approx(e1 / (e2 + e1)).epsilon(1e-12));

  // Non-negative similarities everywhere: identical to dense.
  std::mt19937_64 rng(10);
  Tensor<double> qp({4, 3}), kp({4, 3});
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : qp.values()) v = u(rng);
  for (auto& v : kp.values()) v = u(rng);
  CHECK(max_abs_diff(sparse_attention(qp, kp), dense_attention(qp, kp)) < 1e-15);

  // All-negative row: one-hot at the first maximum.
  Tensor<double> qn({3, 1}, std::vector<double>{-1, -1, -1});
  Tensor<double> kn({3, 1}, std::vector<double>{3, 1, 1});
  const auto sn = sparse_attention(qn, kn);
  for (int i = 0; i < 3; ++i) {
    CHECK(sn[i * 3 + 0] == 0.0);
    CHECK(sn[i * 3 + 1] == 1.0);
    CHECK(sn[i * 3 + 2] == 0.0);
  }
}

namespace {

DSLAParams<double> random_dsla(int c, int heads, std::mt19937_64& rng) {
  auto p = DSLAParams<double>::zeros(c, heads);
  randomize(p.wq, rng, 0.6);
  randomize(p.wk, rng, 0.6);
  randomize(p.wv, rng, 0.6);
  randomize(p.proj_out, rng, 0.6);
  p.omega1.mutable_value() = random_tensor({heads}, rng);
  p.omega2.mutable_value() = random_tensor({heads}, rng);
  return p;
}

TokenBatch<double> random_tokens(int ntok, int len, int c, std::mt19937_64& rng) {
  const int n = ntok * len;
  return {random_tensor({ntok, len, c}, rng), identity_permutation(n), 1, n};
}

}  // namespace

TEST_CASE("dsla matches a scalar re-implementation") {
  std::mt19937_64 rng(11);
  const auto p = random_dsla(8, 2, rng);
  const auto t = random_tokens(3, 4, 8, rng);
  const auto y = dsla_forward(t, p);
  CHECK(y.tokens.shape() == t.tokens.shape());
  CHECK(y.permutation == t.permutation);
  CHECK(oracle::max_abs_diff(oracle::to_vec(y.tokens), oracle::dsla(t.tokens, p)) < 1e-5);
}

TEST_CASE("dsla with omega2 = 0 is dense attention") {
  std::mt19937_64 rng(12);
  auto p = random_dsla(8, 4, rng);
  p.omega1.mutable_value() = Tensor<double>({4}, 1.0);
  p.omega2.mutable_value() = Tensor<double>({4});
  const auto t = random_tokens(2, 8, 8, rng);
  const auto y = dsla_forward(t, p);
  CHECK(oracle::max_abs_diff(oracle::to_vec(y.tokens), oracle::dsla(t.tokens, p)) < 1e-6);

  // Both weights zero: attention output is zero, so only the proj_out bias remains.
  p.omega1.mutable_value() = Tensor<double>({4});
  const auto z = dsla_forward(t, p);
  for (int i = 0; i < 16; ++i)
    for (int c = 0; c < 8; ++c) CHECK(std::abs(z.tokens[i * 8 + c] - p.proj_out.bias.value()[c]) < 1e-12);
}

TEST_CASE("dsla is permutation equivariant within a token") {
  std::mt19937_64 rng(13);
  const auto p = random_dsla(8, 2, rng);
  const auto t = random_tokens(2, 8, 8, rng);
  const auto perm = random_permutation(8, rng);
  auto shuffled = t;
  for (int i = 0; i < 8; ++i)
    for (int c = 0; c < 8; ++c) shuffled.tokens[(8 + i) * 8 + c] = t.tokens[(8 + perm[i]) * 8 + c];
  const auto y = dsla_forward(t, p), ys = dsla_forward(shuffled, p);
  double err = 0;
  for (int i = 0; i < 8; ++i)
    for (int c = 0; c < 8; ++c) {
      err = std::max(err, std::abs(ys.tokens[(8 + i) * 8 + c] - y.tokens[(8 + perm[i]) * 8 + c]));
      err = std::max(err, std::abs(ys.tokens[i * 8 + c] - y.tokens[i * 8 + c]));
    }
  CHECK(err < 1e-6);
}

TEST_CASE("dsla rejects mismatched channels") {
  std::mt19937_64 rng(14);
  const auto p = random_dsla(8, 2, rng);
  CHECK_THROWS_AS(dsla_forward(random_tokens(2, 4, 6, rng), p), DimensionError);
  CHECK_THROWS_AS(DSLAParams<double>::zeros(6, 4).validate(), DimensionError);
}

TEST_CASE("block gradients match central differences") {
  const auto sfi = check_sfi_gradients(0);
  INFO("sfi max rel err " << sfi.max_rel_error);
  CHECK(sfi.entries.size() > 900);
  CHECK(sfi.passed());
  const auto dsla = check_dsla_gradients(0);
  INFO("dsla max rel err " << dsla.max_rel_error);
  CHECK(dsla.entries.size() > 500);
  CHECK(dsla.passed());
}

}  // TEST_SUITE
