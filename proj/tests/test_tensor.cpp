#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "pfkd/ops.hpp"

using namespace pfkd;
using test::gradcheck;
using test::keep_off_zero;
using test::rand_tensor;

namespace {

Tensor<double> shuffled_grid(Shape shape, RngStream& rng, double step = 0.07) {
  Tensor<double> t(shape);
  std::vector<double> vals(static_cast<std::size_t>(t.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(i) * step;
  rng.shuffle(vals);
  std::copy(vals.begin(), vals.end(), t.data());
  return t;
}

}  // namespace

TEST_CASE("elementwise ops and gradients") {
  RngStream rng(7, "test/elementwise");
  for (int trial = 0; trial < 5; ++trial) {
    auto a = rand_tensor({3, 4}, rng);
    auto b = rand_tensor({4}, rng);
    CHECK(gradcheck([&] { return sum(mul(add(a, b), sub(a, b))); }, {a, b}) < 1e-4);

    auto x = rand_tensor({2, 5}, rng, 0.2, 2.0);
    CHECK(gradcheck([&] { return mean(mul(log(x), exp(affine(x, 0.5, -0.1)))); }, {x}) < 1e-4);
    CHECK(gradcheck([&] { return sum(pow_scalar(x, 2.7)); }, {x}) < 1e-4);
    CHECK(gradcheck([&] { return sum(gelu(x)); }, {x}) < 1e-4);
  }

  auto c = Tensor<double>::from({3}, {-1.0, 0.5, 2.0});
  auto clamped = clamp_min(c, 0.1);
  CHECK(clamped.at({0}) == doctest::Approx(0.1));
  CHECK(clamped.at({1}) == doctest::Approx(0.5));

  CHECK_THROWS_AS(add(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2})),
                  std::invalid_argument);
}

TEST_CASE("matmul and bmm match finite differences") {
  RngStream rng(11, "test/matmul");
  for (int trial = 0; trial < 5; ++trial) {
    auto a = rand_tensor({3, 4}, rng);
    auto b = rand_tensor({4, 2}, rng);
    CHECK(gradcheck([&] { return sum(matmul(a, b)); }, {a, b}) < 1e-4);

    auto ba = rand_tensor({2, 3, 4}, rng);
    auto bb = rand_tensor({2, 4, 5}, rng);
    CHECK(gradcheck([&] { return sum(bmm(ba, bb)); }, {ba, bb}) < 1e-4);
    auto bt = rand_tensor({2, 5, 4}, rng);
    CHECK(gradcheck([&] { return sum(bmm(ba, bt, true)); }, {ba, bt}) < 1e-4);
  }
  CHECK_THROWS_AS(matmul(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2, 3})),
                  std::invalid_argument);
}

TEST_CASE("layout ops round-trip gradients") {
  RngStream rng(13, "test/layout");
  auto x = rand_tensor({2, 3, 6}, rng);
  auto y = rand_tensor({2, 1, 6}, rng);
  CHECK(gradcheck([&] { return sum(mul(concat(y, x, 1), concat(y, x, 1))); }, {x, y}) < 1e-4);
  CHECK(gradcheck([&] { return sum(slice(x, 2, 1, 3)); }, {x}) < 1e-4);
  CHECK(gradcheck([&] { return sum(reshape(x, {6, 6})); }, {x}) < 1e-4);

  auto one = rand_tensor({3, 6}, rng);
  CHECK(gradcheck([&] { return sum(mul(broadcast_leading(one, 4), broadcast_leading(one, 4))); },
                  {one}) < 1e-4);

  // split/merge are inverses
  auto h = rand_tensor({2, 5, 6}, rng);
  auto rt = merge_heads(split_heads(h, 3), 3);
  for (std::int64_t i = 0; i < h.size(); ++i) CHECK(rt.data()[i] == h.data()[i]);
  CHECK(gradcheck([&] { return sum(pow_scalar(split_heads(h, 2), 2.0)); }, {h}) < 1e-4);

  auto p = rand_tensor({4, 3}, rng, 0.1, 1.0);
  std::vector<std::int64_t> idx{2, 0, 1, 2};
  CHECK(gradcheck([&] { return sum(log(gather_rows(p, idx))); }, {p}) < 1e-4);
}

TEST_CASE("softmax family") {
  auto s = softmax(Tensor<double>::from({2}, {0.0, 0.0}));
  CHECK(s.at({0}) == doctest::Approx(0.5));
  CHECK(s.at({1}) == doctest::Approx(0.5));

  auto s2 = softmax(Tensor<double>::from({2}, {1.0, 0.0}));
  CHECK(s2.at({0}) == doctest::Approx(0.731059).epsilon(1e-5));
  CHECK(s2.at({1}) == doctest::Approx(0.268941).epsilon(1e-5));

  RngStream rng(17, "test/softmax");
  auto x = rand_tensor({4, 6}, rng, -3.0, 3.0);
  auto sm = softmax(x, -1);
  for (std::int64_t r = 0; r < 4; ++r) {
    double row = 0.0;
    for (std::int64_t c = 0; c < 6; ++c) row += sm.at({r, c});
    CHECK(std::abs(row - 1.0) < 1e-12);
  }

  // shift invariance
  auto shifted = softmax(affine(x, 1.0, 17.5), -1);
  for (std::int64_t i = 0; i < x.size(); ++i)
    CHECK(std::abs(shifted.data()[i] - sm.data()[i]) < 1e-12);

  // exp(log_softmax) equals softmax
  auto ls = log_softmax(x, -1);
  for (std::int64_t i = 0; i < x.size(); ++i)
    CHECK(std::abs(std::exp(ls.data()[i]) - sm.data()[i]) < 1e-12);

  // axis 0 as well
  auto sm0 = softmax(x, 0);
  for (std::int64_t c = 0; c < 6; ++c) {
    double col = 0.0;
    for (std::int64_t r = 0; r < 4; ++r) col += sm0.at({r, c});
    CHECK(std::abs(col - 1.0) < 1e-12);
  }

  for (int trial = 0; trial < 5; ++trial) {
    auto z = rand_tensor({3, 5}, rng, -2.0, 2.0);
    auto w = rand_tensor({3, 5}, rng);
    CHECK(gradcheck([&] { return sum(mul(softmax(z, -1), w)); }, {z}) < 1e-4);
    CHECK(gradcheck([&] { return sum(mul(log_softmax(z, -1), w)); }, {z}) < 1e-4);
  }

  auto bad = Tensor<double>::from({2}, {std::nan(""), 0.0});
  CHECK_THROWS_AS(softmax(bad), NumericError);
  CHECK_THROWS_AS(log_softmax(bad), NumericError);
}

TEST_CASE("prelu matches its closed form and finite differences") {
  auto alpha = Tensor<double>::from({1}, {0.1});
  auto x = Tensor<double>::from({1, 1, 1, 2}, {-2.0, 3.0});
  auto y = prelu(x, alpha, 1);
  CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(-0.2));
  CHECK(y.at({0, 0, 0, 1}) == doctest::Approx(3.0));

  // d(prelu)/d(alpha) at x = -2 is -2
  Tape<double> tape;
  alpha.set_requires_grad(true);
  alpha.zero_grad();
  {
    TapeScope<double> scope(tape);
    auto out = prelu(Tensor<double>::from({1, 1, 1, 1}, {-2.0}), alpha, 1);
    tape.backward(sum(out));
  }
  CHECK(alpha.grad()[0] == doctest::Approx(-2.0));

  RngStream rng(19, "test/prelu");
  for (int trial = 0; trial < 5; ++trial) {
    auto xt = rand_tensor({2, 3, 2, 4}, rng);
    keep_off_zero(xt);
    auto at = rand_tensor({3}, rng, 0.05, 0.5);
    CHECK(gradcheck([&] { return sum(pow_scalar(prelu(xt, at, 1), 2.0)); }, {xt, at}) < 1e-4);
  }

  CHECK_THROWS_AS(prelu(Tensor<double>::zeros({1, 3, 2, 2}), Tensor<double>::zeros({4}), 1),
                  std::invalid_argument);
}

TEST_CASE("conv2d: hand-convolved fixtures") {
  auto x = Tensor<double>::full({1, 1, 5, 5}, 1.0);
  auto k = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto b = Tensor<double>::zeros({1});
  auto y = conv2d(x, k, b);
  CHECK(y.shape() == Shape{1, 1, 5, 5});
  CHECK(y.at({0, 0, 2, 2}) == doctest::Approx(9.0));  // interior
  CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(4.0));  // corner
  CHECK(y.at({0, 0, 0, 2}) == doctest::Approx(6.0));  // edge

  RngStream rng(23, "test/conv");
  auto xr = rand_tensor({2, 2, 4, 5}, rng);
  auto zero_k = Tensor<double>::zeros({3, 2, 3, 3});
  auto z = conv2d(xr, zero_k, Tensor<double>::zeros({3}));
  for (std::int64_t i = 0; i < z.size(); ++i) CHECK(z.data()[i] == 0.0);

  // delta kernel reproduces the input
  auto delta = Tensor<double>::zeros({1, 1, 3, 3});
  delta.at({0, 0, 1, 1}) = 1.0;
  auto xi = rand_tensor({1, 1, 6, 7}, rng);
  auto id = conv2d(xi, delta, Tensor<double>::zeros({1}));
  for (std::int64_t i = 0; i < xi.size(); ++i) CHECK(id.data()[i] == doctest::Approx(xi.data()[i]));

  CHECK_THROWS_AS(conv2d(Tensor<double>::zeros({1, 2, 4, 4}), Tensor<double>::zeros({3, 3, 3, 3}),
                         Tensor<double>::zeros({3})),
                  std::invalid_argument);
}

TEST_CASE("conv2d: linearity and gradients") {
  RngStream rng(29, "test/conv_lin");
  auto k = rand_tensor({3, 2, 3, 3}, rng);
  auto zb = Tensor<double>::zeros({3});
  auto x1 = rand_tensor({2, 2, 5, 4}, rng);
  auto x2 = rand_tensor({2, 2, 5, 4}, rng);
  const double a = 0.7, c = -1.3;
  Tensor<double> mix(x1.shape());
  for (std::int64_t i = 0; i < mix.size(); ++i)
    mix.data()[i] = a * x1.data()[i] + c * x2.data()[i];
  auto lhs = conv2d(mix, k, zb);
  auto r1 = conv2d(x1, k, zb);
  auto r2 = conv2d(x2, k, zb);
  for (std::int64_t i = 0; i < lhs.size(); ++i)
    CHECK(std::abs(lhs.data()[i] - (a * r1.data()[i] + c * r2.data()[i])) < 1e-10);

  for (int trial = 0; trial < 3; ++trial) {
    auto x = rand_tensor({2, 2, 4, 4}, rng);
    auto kr = rand_tensor({2, 2, 3, 3}, rng);
    auto br = rand_tensor({2}, rng);
    CHECK(gradcheck([&] { return sum(pow_scalar(conv2d(x, kr, br), 2.0)); }, {x, kr, br}) < 1e-4);
  }
}

TEST_CASE("maxpool2d") {
  auto row = Tensor<double>::from({1, 1, 1, 4}, {1.0, 3.0, 2.0, 5.0});
  auto pooled = maxpool2d(row, 1, 2);
  CHECK(pooled.shape() == Shape{1, 1, 1, 2});
  CHECK(pooled.at({0, 0, 0, 0}) == doctest::Approx(3.0));
  CHECK(pooled.at({0, 0, 0, 1}) == doctest::Approx(5.0));

  // floor semantics: extent 9 pools to 4
  auto nine = Tensor<double>::zeros({1, 1, 1, 9});
  CHECK(maxpool2d(nine, 1, 2).shape() == Shape{1, 1, 1, 4});

  auto flat = Tensor<double>::full({1, 2, 3, 8}, 4.2);
  auto cpool = maxpool2d(flat, 1, 2);
  for (std::int64_t i = 0; i < cpool.size(); ++i) CHECK(cpool.data()[i] == doctest::Approx(4.2));

  RngStream rng(31, "test/pool");
  for (int trial = 0; trial < 5; ++trial) {
    auto x = shuffled_grid({2, 2, 3, 6}, rng);
    CHECK(gradcheck([&] { return sum(pow_scalar(maxpool2d(x, 1, 2), 2.0)); }, {x}) < 1e-4);
  }

  CHECK_THROWS_AS(maxpool2d(Tensor<double>::zeros({1, 1, 1, 1}), 1, 2), std::invalid_argument);
}

TEST_CASE("batch_norm") {
  auto gamma = Tensor<double>::full({1}, 1.0);
  auto beta = Tensor<double>::zeros({1});
  auto rmean = Tensor<double>::zeros({1});
  auto rvar = Tensor<double>::full({1}, 1.0);

  auto x = Tensor<double>::from({2, 1, 1, 1}, {-1.0, 1.0});
  auto y = batch_norm(x, gamma, beta, rmean, rvar, true);
  CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(y.at({1, 0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(rmean.at({0}) == doctest::Approx(0.0));
  CHECK(rvar.at({0}) == doctest::Approx(0.9 + 0.1 * 1.0));

  // eval mode with unit running stats is the identity up to eps
  auto rm0 = Tensor<double>::zeros({1});
  auto rv1 = Tensor<double>::full({1}, 1.0);
  auto xe = Tensor<double>::from({1, 1, 1, 3}, {0.3, -0.7, 2.0});
  auto ye = batch_norm(xe, gamma, beta, rm0, rv1, false);
  for (std::int64_t i = 0; i < xe.size(); ++i)
    CHECK(ye.data()[i] == doctest::Approx(xe.data()[i]).epsilon(1e-4));

  // training-mode output statistics per channel
  RngStream rng(37, "test/bn");
  auto xr = rand_tensor({4, 3, 2, 5}, rng, -2.0, 5.0);
  auto g3 = Tensor<double>::full({3}, 1.0);
  auto b3 = Tensor<double>::zeros({3});
  auto rm3 = Tensor<double>::zeros({3});
  auto rv3 = Tensor<double>::full({3}, 1.0);
  auto yn = batch_norm(xr, g3, b3, rm3, rv3, true);
  for (std::int64_t c = 0; c < 3; ++c) {
    double s = 0.0, sq = 0.0;
    std::int64_t m = 0;
    for (std::int64_t n = 0; n < 4; ++n)
      for (std::int64_t h = 0; h < 2; ++h)
        for (std::int64_t w = 0; w < 5; ++w) {
          const double v = yn.at({n, c, h, w});
          s += v;
          ++m;
        }
    const double mu = s / static_cast<double>(m);
    for (std::int64_t n = 0; n < 4; ++n)
      for (std::int64_t h = 0; h < 2; ++h)
        for (std::int64_t w = 0; w < 5; ++w) sq += std::pow(yn.at({n, c, h, w}) - mu, 2);
    CHECK(std::abs(mu) < 1e-10);
    CHECK(std::abs(sq / static_cast<double>(m) - 1.0) < 1e-4);
  }

  CHECK_THROWS_AS(batch_norm(Tensor<double>::zeros({1, 1, 2, 2}), gamma, beta, rmean, rvar, true),
                  std::invalid_argument);

  for (int trial = 0; trial < 3; ++trial) {
    auto xt = rand_tensor({3, 2, 2, 3}, rng);
    auto gt = rand_tensor({2}, rng, 0.5, 1.5);
    auto bt = rand_tensor({2}, rng);
    auto rm = Tensor<double>::zeros({2});
    auto rv = Tensor<double>::full({2}, 1.0);
    CHECK(gradcheck(
              [&] { return sum(pow_scalar(batch_norm(xt, gt, bt, rm, rv, true), 2.0)); },
              {xt, gt, bt}) < 1e-4);
    auto rme = rand_tensor({2}, rng, -0.5, 0.5);
    auto rve = rand_tensor({2}, rng, 0.5, 2.0);
    CHECK(gradcheck(
              [&] { return sum(pow_scalar(batch_norm(xt, gt, bt, rme, rve, false), 2.0)); },
              {xt, gt, bt}) < 1e-4);
  }
}

TEST_CASE("layer_norm") {
  auto gamma = Tensor<double>::full({2}, 1.0);
  auto beta = Tensor<double>::zeros({2});

  auto tok = layer_norm(Tensor<double>::from({1, 2}, {1.0, -1.0}), gamma, beta);
  CHECK(tok.at({0, 0}) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(tok.at({0, 1}) == doctest::Approx(-1.0).epsilon(1e-4));

  // constant token collapses to beta
  auto flat = layer_norm(Tensor<double>::from({1, 2}, {3.3, 3.3}), gamma, beta);
  CHECK(std::abs(flat.at({0, 0})) < 1e-9);

  RngStream rng(41, "test/ln");
  auto g = rand_tensor({6}, rng, 0.5, 1.5);
  auto b = rand_tensor({6}, rng);
  auto x = rand_tensor({3, 4, 6}, rng);
  auto base = layer_norm(x, g, b);
  auto shifted = layer_norm(affine(x, 1.0, 5.0), g, b);
  for (std::int64_t i = 0; i < base.size(); ++i)
    CHECK(std::abs(base.data()[i] - shifted.data()[i]) < 1e-9);

  for (int trial = 0; trial < 5; ++trial) {
    auto xt = rand_tensor({2, 3, 4}, rng);
    auto gt = rand_tensor({4}, rng, 0.5, 1.5);
    auto bt = rand_tensor({4}, rng);
    CHECK(gradcheck([&] { return sum(pow_scalar(layer_norm(xt, gt, bt), 2.0)); }, {xt, gt, bt}) <
          1e-4);
  }
}

TEST_CASE("dropout") {
  RngStream rng(43, "test/dropout");
  auto x = rand_tensor({10}, rng);

  auto same = dropout(x, 0.0, true, rng);
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(same.data()[i] == x.data()[i]);
  auto evald = dropout(x, 0.9, false, rng);
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(evald.data()[i] == x.data()[i]);

  // Monte Carlo: zero fraction and mean preservation at rate 0.1
  const std::int64_t n = 1'000'000;
  Tensor<double> big({n});
  for (std::int64_t i = 0; i < n; ++i) big.data()[i] = 2.0;
  RngStream mc(97, "test/dropout_mc");
  auto dropped = dropout(big, 0.1, true, mc);
  std::int64_t zeros = 0;
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (dropped.data()[i] == 0.0) ++zeros;
    total += dropped.data()[i];
  }
  const double zero_frac = static_cast<double>(zeros) / static_cast<double>(n);
  CHECK(std::abs(zero_frac - 0.1) < 0.002);
  CHECK(std::abs(total / static_cast<double>(n) - 2.0) < 0.02);

  // gradient with a replayed mask
  auto xt = rand_tensor({4, 5}, rng);
  CHECK(gradcheck(
            [&] {
              RngStream fixed(5, "test/dropout_fd");
              return sum(pow_scalar(dropout(xt, 0.3, true, fixed), 2.0));
            },
            {xt}) < 1e-4);

  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), std::invalid_argument);
}

TEST_CASE("multi_head_attention") {
  RngStream rng(47, "test/mha");
  const std::int64_t d = 6, dh_total = 6, heads = 2;
  AttentionParams<double> p;
  p.wq = rand_tensor({d, dh_total}, rng);
  p.bq = rand_tensor({dh_total}, rng);
  p.wk = rand_tensor({d, dh_total}, rng);
  p.bk = rand_tensor({dh_total}, rng);
  p.wv = rand_tensor({d, dh_total}, rng);
  p.bv = rand_tensor({dh_total}, rng);
  p.wo = rand_tensor({dh_total, d}, rng);
  p.bo = rand_tensor({d}, rng);

  // T = 1: the single token attends only to itself, so the output is the
  // out-projection of its value projection.
  auto x1 = rand_tensor({2, 1, d}, rng);
  auto out1 = multi_head_attention(x1, p, heads);
  auto v1 = add(matmul(reshape(x1, {2, d}), p.wv), p.bv);
  auto expect = add(matmul(v1, p.wo), p.bo);
  for (std::int64_t i = 0; i < out1.size(); ++i)
    CHECK(out1.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-10));

  // Two tokens with identical keys: weights are [0.5, 0.5], so each output
  // token is the out-projection of the mean value row.
  auto x2 = rand_tensor({1, 2, d}, rng);
  auto pk = p;
  pk.wk = Tensor<double>::zeros({d, dh_total});
  pk.bk = Tensor<double>::zeros({dh_total});
  auto out2 = multi_head_attention(x2, pk, heads);
  auto v2 = add(matmul(reshape(x2, {2, d}), pk.wv), pk.bv);
  Tensor<double> vmean({1, dh_total});
  for (std::int64_t j = 0; j < dh_total; ++j)
    vmean.at({0, j}) = 0.5 * (v2.at({0, j}) + v2.at({1, j}));
  auto mixed = add(matmul(vmean, pk.wo), pk.bo);
  for (std::int64_t tkn = 0; tkn < 2; ++tkn)
    for (std::int64_t j = 0; j < d; ++j)
      CHECK(out2.at({0, tkn, j}) == doctest::Approx(mixed.at({0, j})).epsilon(1e-10));

  for (int trial = 0; trial < 3; ++trial) {
    auto x = rand_tensor({2, 3, d}, rng);
    CHECK(gradcheck([&] { return sum(pow_scalar(multi_head_attention(x, p, heads), 2.0)); },
                    {x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv, p.wo, p.bo}) < 1e-4);
  }

  CHECK_THROWS_AS(multi_head_attention(rand_tensor({1, 1, 5}, rng), p, 4),
                  std::invalid_argument);
}

TEST_CASE("backward semantics") {
  // f(x) = x^2 at x = 3 has gradient 6; a second backward accumulates to 12.
  auto x = Tensor<double>::scalar(3.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    auto loss = sum(mul(x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(12.0));
    x.zero_grad();
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
  }

  // backward rejects non-scalar losses and empty tapes
  Tape<double> t2;
  {
    TapeScope<double> scope(t2);
    auto v = Tensor<double>::from({2}, {1.0, 2.0});
    v.set_requires_grad(true);
    auto y = mul(v, v);
    CHECK_THROWS_AS(t2.backward(y), std::invalid_argument);
  }
  Tape<double> t3;
  CHECK_THROWS_AS(t3.backward(Tensor<double>::scalar(1.0)), std::invalid_argument);
}

TEST_CASE("tape determinism: identical seeds replay bitwise") {
  auto run = [](std::uint64_t seed) {
    RngStream rng(seed, "det");
    auto x = rand_tensor({4, 6}, rng);
    x.set_requires_grad(true);
    auto w = rand_tensor({6, 3}, rng);
    w.set_requires_grad(true);
    Tape<double> tape;
    TapeScope<double> scope(tape);
    RngStream drop(seed, "det/drop");
    auto h = dropout(gelu(matmul(x, w)), 0.25, true, drop);
    auto loss = mean(pow_scalar(softmax(h, -1), 2.0));
    tape.backward(loss);
    std::vector<double> out;
    out.push_back(loss.item());
    for (auto v : x.grad()) out.push_back(v);
    for (auto v : w.grad()) out.push_back(v);
    return out;
  };
  auto a = run(123), b = run(123), c = run(124);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("no-grad scope skips recording") {
  auto x = Tensor<double>::scalar(2.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  {
    NoGradScope<double> ng;
    auto y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(tape.num_recorded() == 0);
}
