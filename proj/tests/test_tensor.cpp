#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cxr/errors.hpp"
#include "cxr/ops.hpp"
#include "cxr/tape.hpp"
#include "oracles.hpp"

using cxr::Shape;
using cxr::Tape;
using cxr::Tensor;
using cxr::Var;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(std::move(shape));
  for (double& v : t.values()) v = d(gen);
  return t;
}

std::vector<double> as_vector(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

// Scalar probe: sum(r * y) for a fixed random r, so every output element
// contributes a distinct weight to the gradient.
Var probe(Tape<double>& tape, Var y, const Tensor<double>& r) {
  const Tensor<double>& v = tape.value(y);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * r[i];
  return tape.record("probe", Tensor<double>({1}, s), {y}, [y, r](Tape<double>& t, const Tensor<double>& g) {
    Tensor<double>& gy = t.grad_buffer(y);
    for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += g[0] * r[i];
  });
}

// Finite-difference check of d probe(f(x)) / dx for every input coordinate.
using Builder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

double max_grad_error(std::vector<Tensor<double>> inputs, const Builder& f, std::mt19937_64& gen) {
  Tensor<double> r;
  auto eval = [&](std::vector<double>* grads) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.parameter(x));
    const Var y = f(tape, vars);
    if (r.empty()) r = random_tensor(tape.value(y).shape(), gen);
    const Var loss = probe(tape, y, r);
    if (grads) {
      tape.backward(loss);
      grads->clear();
      for (Var v : vars) {
        const auto& g = tape.grad(v);
        grads->insert(grads->end(), g.values().begin(), g.values().end());
      }
    }
    return tape.value(loss)[0];
  };
  std::vector<double> analytic;
  eval(&analytic);
  double worst = 0.0;
  std::size_t flat = 0;
  const double h = 1e-6;
  for (auto& x : inputs) {
    for (std::size_t i = 0; i < x.size(); ++i, ++flat) {
      const double saved = x[i];
      x[i] = saved + h;
      const double up = eval(nullptr);
      x[i] = saved - h;
      const double down = eval(nullptr);
      x[i] = saved;
      double rel = 0.0;
      if (!oracle::within(analytic[flat], (up - down) / (2 * h), 0.0, 1e-8, rel)) worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

TEST(Tensor, SizeMatchesProductOfExtents) {
  const Tensor<float> t({2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.rank(), 4u);
  EXPECT_THROW(Tensor<float>({2, 0, 3}), cxr::ShapeError);
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), cxr::ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
  Tensor<float> t({1, 2, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  EXPECT_EQ(t.at(0, 1, 0, 2), 8.0f);
  EXPECT_EQ(t.at(0, 0, 1, 1), 4.0f);
}

// ---------------------------------------------------------------------------
// conv2d

TEST(Conv2d, IdentityKernel) {
  const auto y = cxr::conv2d(Tensor<double>({1, 1, 1, 1}, {5.0}), Tensor<double>({1, 1, 1, 1}, {1.0}), {1, 0});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y[0], 5.0);
}

TEST(Conv2d, AllOnesSumsNine) {
  const auto y = cxr::conv2d(Tensor<double>({1, 1, 3, 3}, 1.0), Tensor<double>({1, 1, 3, 3}, 1.0), {1, 0});
  EXPECT_EQ(y.size(), 1u);
  EXPECT_DOUBLE_EQ(y[0], 9.0);
}

TEST(Conv2d, StemShape) {
  EXPECT_EQ(cxr::output_extent(320, 7, 2, 3), 160u);
  const auto y = cxr::conv2d(Tensor<float>({1, 3, 64, 64}, 0.5f), Tensor<float>({8, 3, 7, 7}, 0.1f), {2, 3});
  EXPECT_EQ(y.shape(), (Shape{1, 8, 32, 32}));
}

TEST(Conv2d, BiasIsAddedPerChannel) {
  std::mt19937_64 gen(3);
  const auto x = random_tensor({2, 2, 5, 5}, gen);
  const auto k = random_tensor({3, 2, 3, 3}, gen);
  const Tensor<double> b({3}, {1.0, -2.0, 0.5});
  const auto y0 = cxr::conv2d(x, k, {1, 1});
  const auto y1 = cxr::conv2d(x, k, b, {1, 1});
  for (std::size_t i = 0; i < y0.size(); ++i) EXPECT_NEAR(y1[i] - y0[i], b[(i / 25) % 3], 1e-12);
}

TEST(Conv2d, MatchesDirectLoopsOnRandomShapes) {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<std::size_t> dim(1, 4), side(1, 9), win(1, 4), st(1, 3), pd(0, 2);
  int cases = 0;
  while (cases < 60) {
    const std::size_t n = dim(gen), c = dim(gen), h = side(gen), w = side(gen), oc = dim(gen);
    const std::size_t kh = win(gen), kw = win(gen), s = st(gen), p = pd(gen);
    if (h + 2 * p < kh || w + 2 * p < kw) {
      EXPECT_THROW(cxr::conv2d(Tensor<double>({n, c, h, w}), Tensor<double>({oc, c, kh, kw}), {s, p}), cxr::ShapeError);
      continue;
    }
    const auto x = random_tensor({n, c, h, w}, gen);
    const auto k = random_tensor({oc, c, kh, kw}, gen);
    std::size_t oh = 0, ow = 0;
    const auto expect = oracle::conv2d(as_vector(x), n, c, h, w, as_vector(k), oc, kh, kw, s, p, oh, ow);
    const auto y = cxr::conv2d(x, k, {s, p});
    ASSERT_EQ(y.shape(), (Shape{n, oc, oh, ow}));
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], expect[i], 1e-12);
    ++cases;
  }
}

TEST(Conv2d, RejectsChannelMismatch) {
  EXPECT_THROW(cxr::conv2d(Tensor<float>({1, 2, 4, 4}), Tensor<float>({1, 3, 3, 3}), {1, 0}), cxr::ShapeError);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  for (auto [s, p, kside] : {std::tuple{1, 1, 3}, {2, 3, 7}, {1, 0, 1}, {2, 0, 2}}) {
    const double err = max_grad_error(
        {random_tensor({2, 3, 6, 6}, gen), random_tensor({4, 3, std::size_t(kside), std::size_t(kside)}, gen)},
        [=](Tape<double>& t, const std::vector<Var>& v) {
          return cxr::conv2d(t, v[0], v[1], {std::size_t(s), std::size_t(p)});
        },
        gen);
    EXPECT_LT(err, 1e-6) << "stride " << s << " pad " << p << " kernel " << kside;
  }
}

// ---------------------------------------------------------------------------
// batch_norm

TEST(BatchNorm, StandardizedInputPassesThrough) {
  // Per channel values {-1, 1}: mean 0, biased variance 1.
  const Tensor<double> x({2, 1, 1, 2}, {-1.0, 1.0, 1.0, -1.0});
  const cxr::ChannelStats<double> running{Tensor<double>({1}, 0.0), Tensor<double>({1}, 1.0)};
  const auto r = cxr::batch_norm(x, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), running, cxr::Mode::train, {});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(r.output[i], x[i], 1e-5);
}

TEST(BatchNorm, ConstantChannelMapsToBeta) {
  const Tensor<double> x({3, 2, 2, 2}, 4.25);
  const cxr::ChannelStats<double> running{Tensor<double>({2}, 0.0), Tensor<double>({2}, 1.0)};
  const auto r = cxr::batch_norm(x, Tensor<double>({2}, 1.0), Tensor<double>({2}, 0.7), running, cxr::Mode::train, {});
  for (double v : r.output.values()) EXPECT_NEAR(v, 0.7, 1e-9);
}

TEST(BatchNorm, EvalUsesRunningStatistics) {
  const Tensor<double> x({1, 2, 1, 2}, {1.0, 2.0, -3.0, 0.5});
  const Tensor<double> gamma({2}, {2.0, 0.5}), beta({2}, {0.1, -0.2});
  const cxr::ChannelStats<double> running{Tensor<double>({2}, {0.5, -1.0}), Tensor<double>({2}, {4.0, 0.25})};
  const auto r = cxr::batch_norm(x, gamma, beta, running, cxr::Mode::eval, {1e-5, 0.9});
  const double expect[4] = {2.0 * (1.0 - 0.5) / std::sqrt(4.0 + 1e-5) + 0.1, 2.0 * (2.0 - 0.5) / std::sqrt(4.0 + 1e-5) + 0.1,
                            0.5 * (-3.0 + 1.0) / std::sqrt(0.25 + 1e-5) - 0.2,
                            0.5 * (0.5 + 1.0) / std::sqrt(0.25 + 1e-5) - 0.2};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.output[i], expect[i], 1e-12);
  EXPECT_EQ(r.running.mean, running.mean);
  EXPECT_EQ(r.running.var, running.var);
}

TEST(BatchNorm, TrainModeReturnsMovingAverage) {
  const Tensor<double> x({2, 1, 1, 1}, {1.0, 3.0});  // mean 2, biased variance 1
  const cxr::ChannelStats<double> running{Tensor<double>({1}, 0.0), Tensor<double>({1}, 1.0)};
  const auto r = cxr::batch_norm(x, Tensor<double>({1}, 1.0), Tensor<double>({1}, 0.0), running, cxr::Mode::train, {});
  EXPECT_NEAR(r.running.mean[0], 0.9 * 0.0 + 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(r.running.var[0], 0.9 * 1.0 + 0.1 * 1.0, 1e-15);
  EXPECT_EQ(running.mean[0], 0.0);
}

TEST(BatchNorm, RejectsBadArguments) {
  const Tensor<double> x({1, 2, 2, 2}, 1.0);
  const cxr::ChannelStats<double> running{Tensor<double>({2}, 0.0), Tensor<double>({2}, 1.0)};
  EXPECT_THROW(cxr::batch_norm(x, Tensor<double>({3}, 1.0), Tensor<double>({2}, 0.0), running, cxr::Mode::eval, {}),
               cxr::ShapeError);
  EXPECT_THROW(cxr::batch_norm(x, Tensor<double>({2}, 1.0), Tensor<double>({2}, 0.0), running, cxr::Mode::eval,
                               {0.0, 0.9}),
               cxr::ConfigError);
}

TEST(BatchNorm, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(8);
  const cxr::ChannelStats<double> running{Tensor<double>({3}, 0.1), Tensor<double>({3}, 0.9)};
  for (auto mode : {cxr::Mode::train, cxr::Mode::eval}) {
    const double err = max_grad_error(
        {random_tensor({3, 3, 2, 3}, gen), random_tensor({3}, gen, 0.5, 1.5), random_tensor({3}, gen)},
        [&](Tape<double>& t, const std::vector<Var>& v) {
          return cxr::batch_norm(t, v[0], v[1], v[2], running, mode, {}).output;
        },
        gen);
    EXPECT_LT(err, 1e-5) << (mode == cxr::Mode::train ? "train" : "eval");
  }
}

// ---------------------------------------------------------------------------
// relu

TEST(Relu, Examples) {
  const auto y = cxr::relu(Tensor<double>({3}, {-1.0, 0.0, 3.2}));
  EXPECT_EQ(y.values()[0], 0.0);
  EXPECT_EQ(y.values()[1], 0.0);
  EXPECT_EQ(y.values()[2], 3.2);
  const Tensor<double> pos({4}, {0.1, 2.0, 3.0, 7.5});
  EXPECT_EQ(cxr::relu(pos), pos);
}

TEST(Relu, SubgradientAtZeroAndBelowIsZero) {
  Tape<double> tape;
  const Var x = tape.parameter(Tensor<double>({3}, {-2.0, 0.0, 1.5}));
  const Var y = cxr::relu(tape, x);
  tape.backward(probe(tape, y, Tensor<double>({3}, 1.0)));
  EXPECT_EQ(tape.grad(x)[0], 0.0);
  EXPECT_EQ(tape.grad(x)[1], 0.0);
  EXPECT_EQ(tape.grad(x)[2], 1.0);
}

TEST(Relu, PositiveAndNegativePartsSumToAbs) {
  std::mt19937_64 gen(2);
  const auto x = random_tensor({5, 7}, gen, -10, 10);
  Tensor<double> neg = x;
  for (double& v : neg.values()) v = -v;
  const auto a = cxr::relu(x), b = cxr::relu(neg);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(a[i] + b[i], std::abs(x[i]));
}

// ---------------------------------------------------------------------------
// pooling

TEST(Pool, TwoByTwoExamples) {
  const Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(cxr::pool(x, {cxr::PoolKind::max, 2, 2, 2, 0})[0], 4.0);
  EXPECT_EQ(cxr::pool(x, {cxr::PoolKind::avg, 2, 2, 2, 0})[0], 2.5);
  const auto y = cxr::pool(Tensor<double>({2, 5, 8, 6}, 1.0), {cxr::PoolKind::avg, 2, 2, 2, 0});
  EXPECT_EQ(y.shape(), (Shape{2, 5, 4, 3}));
}

TEST(Pool, MatchesDirectLoopsOnRandomShapes) {
  std::mt19937_64 gen(13);
  std::uniform_int_distribution<std::size_t> dim(1, 3), side(1, 9), win(1, 4), st(1, 3), pd(0, 2);
  int cases = 0;
  while (cases < 80) {
    const std::size_t n = dim(gen), c = dim(gen), h = side(gen), w = side(gen);
    const std::size_t kh = win(gen), kw = win(gen), s = st(gen), p = pd(gen);
    if (2 * p > std::min(kh, kw) || h + 2 * p < kh || w + 2 * p < kw) continue;
    const bool is_max = cases % 2 == 0;
    const auto x = random_tensor({n, c, h, w}, gen);
    std::size_t oh = 0, ow = 0;
    const auto expect = oracle::pool(as_vector(x), n, c, h, w, is_max, kh, kw, s, p, oh, ow);
    const auto y = cxr::pool(x, {is_max ? cxr::PoolKind::max : cxr::PoolKind::avg, kh, kw, s, p});
    ASSERT_EQ(y.shape(), (Shape{n, c, oh, ow}));
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], expect[i], 1e-12);
    ++cases;
  }
}

TEST(Pool, RejectsEmptyOutput) {
  EXPECT_THROW(cxr::pool(Tensor<double>({1, 1, 2, 2}), {cxr::PoolKind::max, 3, 3, 1, 0}), cxr::ShapeError);
}

TEST(Pool, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(21);
  const double max_err = max_grad_error(
      {random_tensor({2, 2, 7, 7}, gen)},
      [](Tape<double>& t, const std::vector<Var>& v) { return cxr::pool(t, v[0], {cxr::PoolKind::max, 3, 3, 2, 1}); },
      gen);
  EXPECT_LT(max_err, 1e-6);
  const double avg_err = max_grad_error(
      {random_tensor({2, 2, 6, 6}, gen)},
      [](Tape<double>& t, const std::vector<Var>& v) { return cxr::pool(t, v[0], {cxr::PoolKind::avg, 2, 2, 2, 0}); },
      gen);
  EXPECT_LT(avg_err, 1e-6);
}

// ---------------------------------------------------------------------------
// global average pooling, concatenation, linear, softmax

TEST(GlobalAvgPool, Examples) {
  const auto y = cxr::global_avg_pool(Tensor<double>({1, 2, 2, 2}, {1, 2, 3, 4, 7, 7, 7, 7}));
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_DOUBLE_EQ(y[0], 2.5);
  EXPECT_DOUBLE_EQ(y[1], 7.0);
  EXPECT_EQ(cxr::global_avg_pool(Tensor<float>({1, 1024, 10, 10}, 1.0f)).shape(), (Shape{1, 1024}));
}

TEST(Concat, ChannelCountsAddAndOrderIsPreserved) {
  const std::vector<Tensor<double>> parts{Tensor<double>({1, 64, 2, 2}, 1.0), Tensor<double>({1, 32, 2, 2}, 2.0)};
  EXPECT_EQ(cxr::concat_channels<double>(parts).dim(1), 96u);

  const std::vector<Tensor<double>> three{Tensor<double>({1, 1, 2, 2}, 1.0), Tensor<double>({1, 1, 2, 2}, 2.0),
                                          Tensor<double>({1, 1, 2, 2}, 3.0)};
  const auto y = cxr::concat_channels<double>(three);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y.at(0, c, 1, 1), static_cast<double>(c + 1));

  const std::vector<Tensor<double>> one{Tensor<double>({2, 3, 2, 2}, 5.0)};
  EXPECT_EQ(cxr::concat_channels<double>(one), one[0]);
}

TEST(Concat, SliceRecoversEachInputExactly) {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<std::size_t> ch(1, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor<double>> parts;
    for (int i = 0; i < 1 + trial % 4; ++i) parts.push_back(random_tensor({2, ch(gen), 3, 4}, gen));
    const auto joined = cxr::concat_channels<double>(parts);
    std::size_t offset = 0;
    for (const auto& p : parts) {
      EXPECT_EQ(cxr::slice_channels(joined, offset, p.dim(1)), p);
      offset += p.dim(1);
    }
  }
}

TEST(Concat, RejectsSpatialMismatch) {
  const std::vector<Tensor<double>> parts{Tensor<double>({1, 1, 2, 2}), Tensor<double>({1, 1, 3, 2})};
  EXPECT_THROW(cxr::concat_channels<double>(parts), cxr::ShapeError);
}

TEST(Concat, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(6);
  const double err = max_grad_error(
      {random_tensor({2, 1, 2, 3}, gen), random_tensor({2, 3, 2, 3}, gen)},
      [](Tape<double>& t, const std::vector<Var>& v) { return cxr::concat_channels(t, v); }, gen);
  EXPECT_LT(err, 1e-7);
}

TEST(Linear, Examples) {
  const auto y = cxr::linear(Tensor<double>({1, 2}, {1, 2}), Tensor<double>({2, 2}, {1, 0, 0, 1}),
                             Tensor<double>({2}, {0.5, -0.5}));
  EXPECT_DOUBLE_EQ(y[0], 1.5);
  EXPECT_DOUBLE_EQ(y[1], 1.5);
  EXPECT_THROW(cxr::linear(Tensor<double>({1, 3}), Tensor<double>({2, 2}), Tensor<double>({2})), cxr::ShapeError);
}

TEST(Linear, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(9);
  const double err = max_grad_error({random_tensor({3, 5}, gen), random_tensor({5, 2}, gen), random_tensor({2}, gen)},
                                    [](Tape<double>& t, const std::vector<Var>& v) {
                                      return cxr::linear(t, v[0], v[1], v[2]);
                                    },
                                    gen);
  EXPECT_LT(err, 1e-7);
}

TEST(Softmax, Examples) {
  const auto a = cxr::softmax(Tensor<double>({1, 2}, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  const auto b = cxr::softmax(Tensor<double>({1, 2}, {2.0, 1.0}));
  EXPECT_NEAR(b[0], 0.73106, 1e-5);
  EXPECT_NEAR(b[1], 0.26894, 1e-5);
  const auto big = cxr::softmax(Tensor<double>({1, 2}, {1000.0, 999.0}));
  const auto small = cxr::softmax(Tensor<double>({1, 2}, {1.0, 0.0}));
  EXPECT_NEAR(big[0], small[0], 1e-15);
  EXPECT_NEAR(big[1], small[1], 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariance) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_tensor({4, static_cast<std::size_t>(2 + trial % 3)}, gen, -20, 20);
    Tensor<double> shifted = x;
    const double c = shift(gen);
    for (double& v : shifted.values()) v += c;
    const auto p = cxr::softmax(x), q = cxr::softmax(shifted);
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < x.dim(1); ++k) sum += p[r * x.dim(1) + k];
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-6);
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(10);
  const double err = max_grad_error({random_tensor({3, 2}, gen, -3, 3)},
                                    [](Tape<double>& t, const std::vector<Var>& v) { return cxr::softmax(t, v[0]); }, gen);
  EXPECT_LT(err, 1e-7);
}

// ---------------------------------------------------------------------------
// Tape

TEST(Tape, InputsPrecedeConsumers) {
  Tape<double> tape;
  const Var a = tape.parameter(Tensor<double>({1, 2}, {1, 2}));
  const Var b = cxr::softmax(tape, a);
  const Var c = cxr::relu(tape, b);
  for (std::size_t id = 0; id < tape.size(); ++id) {
    for (Var in : tape.inputs(Var{id})) EXPECT_LT(in.id, id);
  }
  EXPECT_EQ(c.id, 2u);
}

TEST(Tape, UnusedParameterGetsZeroGradientOfItsShape) {
  Tape<double> tape;
  const Var used = tape.parameter(Tensor<double>({2}, {1.0, -1.0}));
  const Var unused = tape.parameter(Tensor<double>({3, 2}, 4.0));
  tape.backward(probe(tape, cxr::relu(tape, used), Tensor<double>({2}, 1.0)));
  EXPECT_EQ(tape.grad(unused).shape(), (Shape{3, 2}));
  for (double g : tape.grad(unused).values()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, NonScalarLossIsRejected) {
  Tape<double> tape;
  const Var x = tape.parameter(Tensor<double>({2}, 1.0));
  EXPECT_THROW(tape.backward(x), cxr::ShapeError);
}

TEST(Tape, NonFiniteValuesAreRejected) {
  Tape<double> tape;
  EXPECT_THROW(tape.record("bad", Tensor<double>({1}, std::nan("")), {}, {}), cxr::NumericalError);
}

TEST(Tape, SoftmaxCrossEntropyGradientIsWeightedResidual) {
  // d/dz [-w_t log softmax(z)_t] = w_t (p - q).
  const std::vector<double> weights{8.94652, 1.12584};
  for (int target : {0, 1}) {
    Tape<double> tape;
    const Var z = tape.parameter(Tensor<double>({1, 2}, {0.3, -0.4}));
    const Var p = cxr::softmax(tape, z);
    const std::vector<int> t{target};
    const Var loss = cxr::weighted_cross_entropy(tape, p, std::span<const int>(t), std::span<const double>(weights));
    tape.backward(loss);
    for (std::size_t k = 0; k < 2; ++k) {
      const double q = static_cast<int>(k) == target ? 1.0 : 0.0;
      EXPECT_NEAR(tape.grad(z)[k], weights[static_cast<std::size_t>(target)] * (tape.value(p)[k] - q), 1e-12);
    }
  }
}
