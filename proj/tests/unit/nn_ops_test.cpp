#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "ecechain/errors.hpp"
#include "ecechain/nn/grad_check.hpp"
#include "ecechain/nn/ops.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ecechain;
using nn::Tensor;
using fixtures::random_tensor;

namespace {

void expect_grad_ok(const std::function<Tensor<double>()>& loss, std::vector<nn::NamedTensor> inputs) {
  const auto report = nn::grad_check(loss, std::move(inputs));
  EXPECT_TRUE(report.passed) << report.summary();
}

// Contracting against fixed random weights makes every output coordinate matter.
Tensor<double> probe(const Tensor<double>& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  auto w = random_tensor({1, y.numel()}, rng, -1.0, 1.0, false);
  return nn::sum(nn::linear(nn::reshape(y, {1, y.numel()}), w));
}

}  // namespace

TEST(Softmax, RowsSumToOne) {
  Rng rng(1);
  for (double spread : {1.0, 30.0, 300.0}) {
    auto x = random_tensor<float>({16, 37}, rng, -spread, spread, false);
    auto p = nn::softmax(x);
    for (std::size_t r = 0; r < 16; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 37; ++c) total += p.at(r, c);
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Softmax, MatchesLongDoubleOracle) {
  Rng rng(2);
  auto x = random_tensor({5, 9}, rng, -8.0, 8.0, false);
  auto p = nn::softmax(x);
  for (std::size_t r = 0; r < 5; ++r) {
    oracle::Row row(x.values().begin() + r * 9, x.values().begin() + (r + 1) * 9);
    const auto want = oracle::softmax(row);
    for (std::size_t c = 0; c < 9; ++c) EXPECT_NEAR(p.at(r, c), double(want[c]), 1e-15);
  }
}

TEST(Softmax, NegativeInfinityMaskExcludesPositions) {
  Rng rng(3);
  auto x = random_tensor({2, 3, 3}, rng, -1.0, 1.0, false);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> mask = {0, -inf, 0, 0, 0, -inf, -inf, 0, 0};
  auto p = nn::softmax(x, mask);
  for (std::size_t g = 0; g < 2; ++g) {
    EXPECT_EQ(p.at(g, 0, 1), 0.0);
    EXPECT_EQ(p.at(g, 1, 2), 0.0);
    EXPECT_EQ(p.at(g, 2, 0), 0.0);
    EXPECT_NEAR(p.at(g, 0, 0) + p.at(g, 0, 2), 1.0, 1e-15);
  }
}

TEST(LayerNorm, StandardisesRows) {
  Rng rng(4);
  auto x = random_tensor<float>({12, 64}, rng, -5.0, 9.0, false);
  auto y = nn::layer_norm(x, Tensor<float>::full({64}, 1.0f), Tensor<float>::zeros({64}));
  for (std::size_t r = 0; r < 12; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 64; ++c) mean += y.at(r, c);
    mean /= 64.0;
    for (std::size_t c = 0; c < 64; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean);
    var /= 64.0;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(LayerNorm, MatchesTwoPassOracle) {
  Rng rng(5);
  auto x = random_tensor({3, 10}, rng, -3.0, 3.0, false);
  auto gain = random_tensor({10}, rng, 0.5, 1.5, false);
  auto bias = random_tensor({10}, rng, -0.5, 0.5, false);
  auto y = nn::layer_norm(x, gain, bias, 1e-5);
  const oracle::Row g(gain.values().begin(), gain.values().end()), b(bias.values().begin(), bias.values().end());
  for (std::size_t r = 0; r < 3; ++r) {
    const oracle::Row row(x.values().begin() + r * 10, x.values().begin() + (r + 1) * 10);
    const auto want = oracle::layer_norm(row, g, b, 1e-5L);
    for (std::size_t c = 0; c < 10; ++c) EXPECT_NEAR(y.at(r, c), double(want[c]), 1e-13);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogN) {
  for (std::size_t n : {2u, 7u, 20u, 365u}) {
    auto logits = Tensor<double>::full({n}, 0.37);
    EXPECT_NEAR(nn::cross_entropy(logits, n / 2).item(), std::log(double(n)), 1e-9);
  }
}

TEST(CrossEntropy, WeightedBatchMatchesOracle) {
  Rng rng(6);
  auto logits = random_tensor({4, 6}, rng, -4.0, 4.0, false);
  const std::vector<std::size_t> targets = {0, 5, 2, 2};
  const std::vector<double> weights = {1.0, 0.0, 2.5, 1.0};
  long double want = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    const oracle::Row row(logits.values().begin() + b * 6, logits.values().begin() + (b + 1) * 6);
    want += weights[b] * oracle::cross_entropy(row, targets[b]);
  }
  EXPECT_NEAR(nn::cross_entropy<double>(logits, targets, weights).item(), double(want), 1e-13);
}

TEST(Gelu, ZeroIsExactlyZero) {
  EXPECT_EQ(nn::gelu_scalar(0.0), 0.0);
  EXPECT_EQ(nn::gelu(Tensor<double>::zeros({3})).values()[1], 0.0);
  EXPECT_EQ(nn::gelu(Tensor<float>::zeros({3})).values()[2], 0.0f);
}

TEST(Gelu, MatchesQuadratureOracle) {
  for (double x : {-6.0, -2.5, -1.0, -0.1, 0.3, 1.0, 2.0, 4.5}) {
    EXPECT_NEAR(nn::gelu_scalar(x), double(oracle::gelu(x)), 1e-12) << "x=" << x;
  }
}

TEST(Gradients, AffineAndProducts) {
  Rng rng(7);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
  expect_grad_ok([&] { return probe(nn::matmul(a, b)); }, {{"a", a}, {"b", b}});

  auto x = random_tensor({2, 3, 4}, rng), y = random_tensor({2, 5, 4}, rng);
  expect_grad_ok([&] { return probe(nn::batched_matmul(x, y, true)); }, {{"x", x}, {"y", y}});
  auto z = random_tensor({2, 4, 3}, rng);
  expect_grad_ok([&] { return probe(nn::batched_matmul(x, z)); }, {{"x", x}, {"z", z}});

  auto w = random_tensor({6, 4}, rng), bias = random_tensor({6}, rng);
  expect_grad_ok([&] { return probe(nn::linear(x, w, bias)); }, {{"x", x}, {"w", w}, {"bias", bias}});
  expect_grad_ok([&] { return probe(nn::linear(x, w)); }, {{"x", x}, {"w", w}});
}

TEST(Gradients, ShapeOperations) {
  Rng rng(8);
  auto x = random_tensor({2, 3, 4}, rng), row = random_tensor({4}, rng), block = random_tensor({3, 4}, rng);
  expect_grad_ok([&] { return probe(nn::add(x, row)); }, {{"x", x}, {"row", row}});
  expect_grad_ok([&] { return probe(nn::add(x, block)); }, {{"x", x}, {"block", block}});
  expect_grad_ok([&] { return probe(nn::transpose(x)); }, {{"x", x}});
  expect_grad_ok([&] { return probe(nn::scale(nn::reshape(x, {6, 4}), -1.7)); }, {{"x", x}});

  auto table = random_tensor({5, 3}, rng);
  const std::vector<std::size_t> ids = {4, 0, 4, 2};
  expect_grad_ok([&] { return probe(nn::embedding_lookup<double>(table, ids)); }, {{"table", table}});

  auto m = random_tensor({4, 3}, rng), n = random_tensor({2, 3}, rng);
  expect_grad_ok([&] { return probe(nn::concat_rows(m, n)); }, {{"m", m}, {"n", n}});
  expect_grad_ok([&] { return probe(nn::slice_rows(m, 1, 3)); }, {{"m", m}});
  expect_grad_ok([&] { return probe(nn::mean_over_rows(m)); }, {{"m", m}});

  const std::vector<std::uint8_t> keep = {1, 0, 1, 1, 1, 0};
  expect_grad_ok([&] { return probe(nn::masked_mean_rows<double>(x, std::span(keep).first(6))); }, {{"x", x}});

  auto flat = random_tensor({2 * 4, 6}, rng);
  expect_grad_ok([&] { return probe(nn::split_heads(flat, 2, 4, 3)); }, {{"flat", flat}});
  auto heads = random_tensor({6, 4, 2}, rng);
  expect_grad_ok([&] { return probe(nn::merge_heads(heads, 2, 3)); }, {{"heads", heads}});
}

TEST(Gradients, Nonlinearities) {
  Rng rng(9);
  auto x = random_tensor({2, 3, 5}, rng, -2.0, 2.0);
  expect_grad_ok([&] { return probe(nn::softmax(x)); }, {{"x", x}});
  const double inf = std::numeric_limits<double>::infinity();
  auto sq = random_tensor({2, 3, 3}, rng);
  std::vector<double> sq_mask(9, 0.0);
  sq_mask[2] = -inf;
  expect_grad_ok([&] { return probe(nn::softmax(sq, sq_mask)); }, {{"sq", sq}});

  auto gain = random_tensor({5}, rng, 0.5, 1.5), bias = random_tensor({5}, rng);
  expect_grad_ok([&] { return probe(nn::layer_norm(x, gain, bias)); }, {{"x", x}, {"gain", gain}, {"bias", bias}});
  expect_grad_ok([&] { return probe(nn::gelu(x)); }, {{"x", x}});

  auto logits = random_tensor({3, 4}, rng, -3.0, 3.0);
  const std::vector<std::size_t> targets = {1, 3, 0};
  const std::vector<double> weights = {1.0, 0.5, 0.0};
  expect_grad_ok([&] { return nn::cross_entropy<double>(logits, targets, weights); }, {{"logits", logits}});
  auto single = random_tensor({7}, rng);
  expect_grad_ok([&] { return nn::cross_entropy(single, 4); }, {{"single", single}});
}

TEST(Errors, ShapeAndIndexViolations) {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({2, 3});
  EXPECT_THROW(nn::matmul(a, b), DimensionError);
  EXPECT_THROW(nn::add(a, Tensor<double>::zeros({2})), DimensionError);
  const std::vector<std::size_t> ids = {0, 2};
  EXPECT_THROW(nn::embedding_lookup<double>(a, ids), IndexError);
  EXPECT_THROW(nn::slice_rows(a, 1, 3), Error);
}

TEST(Errors, NonFiniteResultRaisesNumericError) {
  auto a = Tensor<double>::full({2}, 1e300);
  EXPECT_THROW(nn::scale(a, 1e300), NumericError);
}

TEST(Autograd, BackwardNeedsScalar) {
  auto a = Tensor<double>::full({3}, 1.0, true);
  EXPECT_THROW(nn::scale(a, 2.0).backward(), ContractError);
}

TEST(Autograd, GradientsAccumulateThroughSharedInputs) {
  auto a = Tensor<double>::full({2}, 3.0, true);
  auto y = nn::sum(nn::add(a, a));
  y.backward();
  EXPECT_EQ(a.grad()[0], 2.0);
  EXPECT_EQ(a.grad()[1], 2.0);
}

TEST(Autograd, NoGradGuardSkipsGraph) {
  auto a = Tensor<double>::full({2}, 3.0, true);
  nn::NoGradGuard guard;
  auto y = nn::scale(a, 2.0);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_FALSE(nn::grad_enabled());
}
