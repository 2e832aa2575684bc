#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

#include "sedkit/nn/gradcheck.hpp"
#include "sedkit/nn/gru.hpp"
#include "sedkit/nn/ops.hpp"
#include "sedkit/nn/params.hpp"
#include "sedkit/rng.hpp"

using namespace sedkit;

namespace {

void fill_random(Tensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (double& v : t.data) v = rng.uniform(lo, hi);
}

}  // namespace

TEST_CASE("conv2d with an identity kernel is the identity") {
  Rng rng(1);
  Conv2d conv(2, 2, rng);
  std::fill(conv.weight.data.begin(), conv.weight.data.end(), 0.0);
  std::fill(conv.bias.data.begin(), conv.bias.data.end(), 0.0);
  conv.weight(0, 0, 1, 1) = 1.0;
  conv.weight(1, 1, 1, 1) = 1.0;

  Tensor x({1, 2, 5, 6});
  fill_random(x, rng);
  auto y = conv.forward(x);
  REQUIRE(y.shape == x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == Catch::Approx(x.data[i]).margin(1e-12));
}

TEST_CASE("conv2d all-ones kernel sums the 3x3 neighborhood") {
  Rng rng(2);
  Conv2d conv(1, 1, rng);
  std::fill(conv.weight.data.begin(), conv.weight.data.end(), 1.0);
  std::fill(conv.bias.data.begin(), conv.bias.data.end(), 0.0);
  Tensor x({1, 1, 4, 4});
  std::fill(x.data.begin(), x.data.end(), 3.0);
  auto y = conv.forward(x);
  // Interior cells see all nine taps.
  CHECK(y(0, 0, 1, 1) == Catch::Approx(27.0));
  CHECK(y(0, 0, 2, 2) == Catch::Approx(27.0));
  // Corner cells see four.
  CHECK(y(0, 0, 0, 0) == Catch::Approx(12.0));
}

TEST_CASE("conv2d rejects channel mismatch") {
  Rng rng(3);
  Conv2d conv(2, 4, rng);
  Tensor x({1, 3, 4, 4});
  CHECK_THROWS_AS(conv.forward(x), ShapeError);
}

TEST_CASE("conv2d gradient check") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Rng rng(seed);
    Conv2d conv(1, 1, rng);
    Tensor x({1, 1, 4, 4});
    fill_random(x, rng);
    auto fwd = [&] { return conv.forward(x); };
    auto bwd = [&](const Tensor& g) {
      Tensor gin = conv.backward(g);
      x.grad = gin.data;
    };
    const double err = check_gradients(fwd, bwd, {&conv.weight, &conv.bias, &x});
    CHECK(err < 1e-4);
  }
}

TEST_CASE("batch_norm passes standardized input through") {
  BatchNorm2d bn(1);
  Tensor x({2, 1, 1, 1});
  x.data = {-1.0, 1.0};
  auto y = bn.forward(x, Mode::kTrain);
  CHECK(y.data[0] == Catch::Approx(-1.0).epsilon(1e-4));
  CHECK(y.data[1] == Catch::Approx(1.0).epsilon(1e-4));

  bn.weight.data[0] = 2.0;
  bn.bias.data[0] = 3.0;
  auto y2 = bn.forward(x, Mode::kTrain);
  CHECK(y2.data[0] == Catch::Approx(1.0).epsilon(1e-4));
  CHECK(y2.data[1] == Catch::Approx(5.0).epsilon(1e-4));
}

TEST_CASE("batch_norm training output is standardized per channel") {
  Rng rng(4);
  BatchNorm2d bn(3);
  Tensor x({2, 3, 4, 5});
  fill_random(x, rng, -2.0, 5.0);
  auto y = bn.forward(x, Mode::kTrain);
  for (std::int64_t c = 0; c < 3; ++c) {
    double s = 0.0, ss = 0.0;
    const std::int64_t n = 2 * 4 * 5;
    for (std::int64_t b = 0; b < 2; ++b)
      for (std::int64_t t = 0; t < 4; ++t)
        for (std::int64_t f = 0; f < 5; ++f) {
          s += y(b, c, t, f);
          ss += y(b, c, t, f) * y(b, c, t, f);
        }
    const double mean = s / n;
    const double var = ss / n - mean * mean;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-5);
  }
}

TEST_CASE("batch_norm eval before any training uses identity statistics") {
  BatchNorm2d bn(2);
  Tensor x({1, 2, 2, 2});
  Rng rng(5);
  fill_random(x, rng);
  auto y = bn.forward(x, Mode::kEval);
  const double scale = 1.0 / std::sqrt(1.0 + BatchNorm2d::kEps);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == Catch::Approx(x.data[i] * scale));
}

TEST_CASE("batch_norm updates running statistics by EMA") {
  BatchNorm2d bn(1);
  Tensor x({1, 1, 1, 4});
  x.data = {1.0, 3.0, 1.0, 3.0};  // mean 2, var 1
  bn.forward(x, Mode::kTrain);
  CHECK(bn.running_mean.data[0] == Catch::Approx(0.9 * 0.0 + 0.1 * 2.0));
  CHECK(bn.running_var.data[0] == Catch::Approx(0.9 * 1.0 + 0.1 * 1.0));
}

TEST_CASE("batch_norm gradient check") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    Rng rng(seed);
    BatchNorm2d bn(3);
    fill_random(bn.weight, rng, 0.5, 1.5);
    fill_random(bn.bias, rng);
    Tensor x({2, 3, 4, 4});
    fill_random(x, rng, -2.0, 2.0);
    auto fwd = [&] { return bn.forward(x, Mode::kTrain); };
    auto bwd = [&](const Tensor& g) {
      Tensor gin = bn.backward(g);
      x.grad = gin.data;
    };
    const double err = check_gradients(fwd, bwd, {&bn.weight, &bn.bias, &x});
    CHECK(err < 1e-4);
  }
}

TEST_CASE("avg_pool means non-overlapping windows") {
  AvgPool2d pool(2, 2);
  Tensor x({1, 1, 2, 2});
  x.data = {1.0, 2.0, 3.0, 4.0};
  auto y = pool.forward(x);
  REQUIRE(y.shape == Shape{1, 1, 1, 1});
  CHECK(y.data[0] == Catch::Approx(2.5));

  AvgPool2d rowpool(1, 2);
  Tensor row({1, 1, 1, 4});
  row.data = {1.0, 3.0, 5.0, 7.0};
  auto r = rowpool.forward(row);
  REQUIRE(r.shape == Shape{1, 1, 1, 2});
  CHECK(r.data[0] == Catch::Approx(2.0));
  CHECK(r.data[1] == Catch::Approx(6.0));
}

TEST_CASE("avg_pool floor chain reduces 608 to 19") {
  std::int64_t t = 608;
  for (int i = 0; i < 5; ++i) t = t / 2;
  CHECK(t == 19);

  // And through the actual op.
  Tensor x({1, 1, 608, 1});
  Rng rng(6);
  fill_random(x, rng);
  Tensor cur = x;
  AvgPool2d pool(2, 1);
  for (int i = 0; i < 5; ++i) cur = pool.forward(cur);
  CHECK(cur.dim(2) == 19);
}

TEST_CASE("avg_pool of a constant tensor is the constant") {
  AvgPool2d pool(2, 3);
  Tensor x({2, 1, 6, 9});
  std::fill(x.data.begin(), x.data.end(), 0.7);
  auto y = pool.forward(x);
  for (double v : y.data) CHECK(v == Catch::Approx(0.7));
}

TEST_CASE("avg_pool rejects kernels larger than the input") {
  AvgPool2d pool(4, 1);
  Tensor x({1, 1, 3, 3});
  CHECK_THROWS_AS(pool.forward(x), ShapeError);
}

TEST_CASE("avg_pool gradient check") {
  Rng rng(31);
  AvgPool2d pool(2, 2);
  Tensor x({1, 2, 4, 6});
  fill_random(x, rng);
  auto fwd = [&] { return pool.forward(x); };
  auto bwd = [&](const Tensor& g) {
    Tensor gin = pool.backward(g);
    x.grad = gin.data;
  };
  CHECK(check_gradients(fwd, bwd, {&x}) < 1e-4);
}

TEST_CASE("dropout is the identity in eval mode and at p=0") {
  Rng rng(7);
  Tensor x({2, 3});
  fill_random(x, rng);

  Dropout d(0.33);
  auto y = d.forward(x, Mode::kEval, nullptr);
  CHECK(y.data == x.data);

  Dropout none(0.0);
  Rng r2(8);
  auto y2 = none.forward(x, Mode::kTrain, &r2);
  CHECK(y2.data == x.data);
}

TEST_CASE("dropout rejects invalid rates") {
  CHECK_THROWS_AS(Dropout(-0.1), InvalidInput);
  CHECK_THROWS_AS(Dropout(1.0), InvalidInput);
}

TEST_CASE("dropout training-mode expectation equals the input") {
  Dropout d(0.33);
  Rng rng(9);
  Tensor x({1});
  x.data = {1.0};
  double acc = 0.0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) {
    auto y = d.forward(x, Mode::kTrain, &rng);
    acc += y.data[0];
  }
  CHECK(std::abs(acc / trials - 1.0) < 0.01);
}

TEST_CASE("dropout gradient check with a fixed mask") {
  Dropout d(0.33);
  Rng rng(10);
  Tensor x({3, 5});
  fill_random(x, rng);
  auto fwd = [&] {
    Rng r(42);
    return d.forward(x, Mode::kTrain, &r);
  };
  auto bwd = [&](const Tensor& g) {
    Tensor gin = d.backward(g);
    x.grad = gin.data;
  };
  CHECK(check_gradients(fwd, bwd, {&x}) < 1e-4);
}

TEST_CASE("sigmoid and relu basics") {
  Sigmoid sig;
  Tensor x({3});
  x.data = {0.0, 2.0, -2.0};
  auto y = sig.forward(x);
  CHECK(y.data[0] == Catch::Approx(0.5));
  CHECK(y.data[1] == Catch::Approx(1.0 / (1.0 + std::exp(-2.0))));

  ReLU relu;
  Tensor z({4});
  z.data = {-1.5, 0.0, 0.5, 2.0};
  auto r = relu.forward(z);
  CHECK(r.data[0] == 0.0);
  CHECK(r.data[1] == 0.0);
  CHECK(r.data[2] == 0.5);
  CHECK(r.data[3] == 2.0);
}

TEST_CASE("dense gradient check") {
  for (std::uint64_t seed : {41u, 42u, 43u}) {
    Rng rng(seed);
    Dense dense(4, 3, rng);
    Tensor x({2, 4});
    fill_random(x, rng);
    auto fwd = [&] { return dense.forward(x); };
    auto bwd = [&](const Tensor& g) {
      Tensor gin = dense.backward(g);
      x.grad = gin.data;
    };
    CHECK(check_gradients(fwd, bwd, {&dense.weight, &dense.bias, &x}) < 1e-4);
  }
}

TEST_CASE("dense rejects trailing-dim mismatch") {
  Rng rng(44);
  Dense dense(4, 3, rng);
  Tensor x({2, 5});
  CHECK_THROWS_AS(dense.forward(x), ShapeError);
}

TEST_CASE("bigru with zero parameters outputs zeros") {
  Rng rng(50);
  BiGru gru(3, 4, 2, rng);
  for (auto& layer : gru.layers)
    for (auto* dir : {&layer.fwd, &layer.bwd}) {
      std::fill(dir->w_ih.data.begin(), dir->w_ih.data.end(), 0.0);
      std::fill(dir->w_hh.data.begin(), dir->w_hh.data.end(), 0.0);
      std::fill(dir->bias.data.begin(), dir->bias.data.end(), 0.0);
    }
  Tensor x({2, 5, 3});
  fill_random(x, rng);
  auto y = gru.forward(x);
  REQUIRE(y.shape == Shape{2, 5, 8});
  for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("bigru direction symmetry: swapped directions time-reverse the output") {
  Rng rng(51);
  BiGru gru(3, 4, 1, rng);
  Tensor x({1, 6, 3});
  fill_random(x, rng);
  auto y = gru.forward(x);

  BiGru swapped(3, 4, 1, rng);
  swapped.layers[0].fwd = gru.layers[0].bwd;
  swapped.layers[0].bwd = gru.layers[0].fwd;
  Tensor xr({1, 6, 3});
  for (std::int64_t t = 0; t < 6; ++t)
    for (std::int64_t d = 0; d < 3; ++d) xr(0, t, d) = x(0, 5 - t, d);
  auto yr = swapped.forward(xr);

  // Reversed input through swapped directions: forward block output at time t
  // equals the original backward block output at time T-1-t and vice versa.
  for (std::int64_t t = 0; t < 6; ++t)
    for (std::int64_t j = 0; j < 4; ++j) {
      CHECK(yr(0, t, j) == Catch::Approx(y(0, 5 - t, 4 + j)).margin(1e-12));
      CHECK(yr(0, t, 4 + j) == Catch::Approx(y(0, 5 - t, j)).margin(1e-12));
    }
}

TEST_CASE("bigru rejects empty sequences") {
  Rng rng(52);
  BiGru gru(2, 2, 1, rng);
  Tensor x({1, 0, 2});
  CHECK_THROWS_AS(gru.forward(x), InvalidInput);
}

TEST_CASE("bigru gradient check") {
  for (std::uint64_t seed : {61u, 62u, 63u}) {
    Rng rng(seed);
    BiGru gru(2, 2, 1, rng);
    Tensor x({1, 3, 2});
    fill_random(x, rng);
    auto fwd = [&] { return gru.forward(x); };
    auto bwd = [&](const Tensor& g) {
      Tensor gin = gru.backward(g);
      x.grad = gin.data;
    };
    std::vector<Tensor*> wrt = {&gru.layers[0].fwd.w_ih, &gru.layers[0].fwd.w_hh, &gru.layers[0].fwd.bias,
                                &gru.layers[0].bwd.w_ih, &gru.layers[0].bwd.w_hh, &gru.layers[0].bwd.bias, &x};
    CHECK(check_gradients(fwd, bwd, wrt) < 1e-4);
  }
}

TEST_CASE("two-layer bigru gradient check") {
  Rng rng(64);
  BiGru gru(2, 2, 2, rng);
  Tensor x({1, 3, 2});
  fill_random(x, rng);
  auto fwd = [&] { return gru.forward(x); };
  auto bwd = [&](const Tensor& g) {
    Tensor gin = gru.backward(g);
    x.grad = gin.data;
  };
  std::vector<Tensor*> wrt = {&x};
  for (auto& layer : gru.layers)
    for (auto* dir : {&layer.fwd, &layer.bwd})
      for (auto* t : {&dir->w_ih, &dir->w_hh, &dir->bias}) wrt.push_back(t);
  CHECK(check_gradients(fwd, bwd, wrt) < 1e-4);
}

TEST_CASE("identical seeds give bit-identical init and forward") {
  Rng a(77), b(77);
  BiGru g1(3, 4, 2, a), g2(3, 4, 2, b);
  for (std::size_t l = 0; l < g1.layers.size(); ++l) {
    CHECK(g1.layers[l].fwd.w_ih.data == g2.layers[l].fwd.w_ih.data);
    CHECK(g1.layers[l].bwd.w_hh.data == g2.layers[l].bwd.w_hh.data);
  }
  Tensor x({1, 4, 3});
  Rng rx(78);
  fill_random(x, rx);
  CHECK(g1.forward(x).data == g2.forward(x).data);
}

TEST_CASE("param set enforces unique names and keeps order") {
  Tensor a({2}), b({3});
  ParamSet ps;
  ps.add("first", a);
  ps.add("second", b);
  CHECK_THROWS_AS(ps.add("first", b), ConfigError);
  CHECK(ps.items()[0].name == "first");
  CHECK(ps.items()[1].name == "second");
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(80);
  Tensor a({3, 2}), b({4});
  fill_random(a, rng);
  fill_random(b, rng);
  ParamSet ps;
  ps.add("layer.weight", a);
  ps.add("layer.bias", b, false);

  const auto path = std::filesystem::temp_directory_path() / "sedkit_test_ckpt.bin";
  save_checkpoint(path.string(), ps);

  Tensor a2({3, 2}), b2({4});
  ParamSet ps2;
  ps2.add("layer.weight", a2);
  ps2.add("layer.bias", b2, false);
  load_checkpoint(path.string(), ps2);
  CHECK(std::memcmp(a2.data.data(), a.data.data(), a.data.size() * 8) == 0);
  CHECK(std::memcmp(b2.data.data(), b.data.data(), b.data.size() * 8) == 0);

  Tensor wrong({2, 2});
  ParamSet bad;
  bad.add("layer.weight", wrong);
  CHECK_THROWS_AS(load_checkpoint(path.string(), bad), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("gradient checker flags non-finite values") {
  Tensor x({2});
  x.data = {1.0, 2.0};
  auto fwd = [&] {
    Tensor y({2});
    y.data = {std::numeric_limits<double>::quiet_NaN(), 0.0};
    return y;
  };
  auto bwd = [&](const Tensor&) {};
  CHECK_THROWS_AS(check_gradients(fwd, bwd, {&x}), NumericalError);
}
