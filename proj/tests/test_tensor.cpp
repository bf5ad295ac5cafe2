#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gradcheck.hpp"
#include "pdgan/io.hpp"
#include "pdgan/optim.hpp"
#include "pdgan/rng.hpp"
#include "pdgan/tensor.hpp"

using namespace pdgan;
using pdgan::testing::gradcheck;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad,
                     double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape), requires_grad);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// keeps relu/abs inputs away from the kink so finite differences are valid
Tensor random_away_from_zero(Shape shape, Rng& rng, double margin = 0.05) {
  Tensor t(std::move(shape), true);
  for (double& v : t.data()) {
    do {
      v = rng.uniform(-1.0, 1.0);
    } while (std::abs(v) < margin);
  }
  return t;
}

}  // namespace

TEST_CASE("elementwise forward examples") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mean(Tensor(Shape{4}, {1, 2, 3, 4})).item() == doctest::Approx(2.5));
  CHECK(tanh_op(Tensor::scalar(0.0)).item() == doctest::Approx(0.0));
  CHECK(abs_op(Tensor(Shape{2}, {-3, 4})).data() == std::vector<double>{3, 4});
}

TEST_CASE("relu backward subgradient convention") {
  Tensor x(Shape{2}, {-1, 2}, true);
  Tensor y = relu(x);
  backward(mean(y));  // upstream 1/2 each
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == doctest::Approx(0.5));
}

TEST_CASE("binary op shape rules") {
  Tensor a(Shape{2}, {1, 2});
  Tensor b(Shape{3}, {1, 2, 3});
  CHECK_THROWS(add(a, b));
  // scalar broadcast works both ways
  CHECK(add(a, Tensor::scalar(10)).data() == std::vector<double>{11, 12});
  CHECK(mul(Tensor::scalar(2), a).data() == std::vector<double>{2, 4});
}

TEST_CASE("log rejects non-positive input") {
  CHECK_THROWS(log_op(Tensor::scalar(0.0)));
  CHECK_THROWS(log_op(Tensor::scalar(-1.0)));
}

TEST_CASE("elementwise gradcheck") {
  Rng rng(11);
  Tensor x = random_away_from_zero(Shape{6}, rng);
  double err = gradcheck(
      [&] { return mean(mul(relu(x), tanh_op(x))); }, {x});
  CHECK(err < 1e-6);

  Tensor y = random_tensor(Shape{5}, rng, true, 0.1, 2.0);
  err = gradcheck([&] { return mean(log_op(y)); }, {y});
  CHECK(err < 1e-6);

  Tensor z = random_away_from_zero(Shape{5}, rng);
  err = gradcheck([&] { return mean(mul(abs_op(z), sigmoid(z))); }, {z});
  CHECK(err < 1e-6);

  Tensor w = random_away_from_zero(Shape{5}, rng);
  err = gradcheck([&] { return mean(leaky_relu(w)); }, {w});
  CHECK(err < 1e-6);
}

TEST_CASE("conv2d forward examples") {
  // pointwise scaling
  Tensor ones(Shape{1, 1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor k(Shape{1, 1, 1, 1}, std::vector<double>{2.0});
  Tensor out = conv2d(ones, k, 1, 0);
  CHECK(out.shape() == Shape{1, 1, 3, 3});
  for (double v : out.data()) CHECK(v == doctest::Approx(2.0));

  // hand summation
  Tensor x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor k2(Shape{1, 1, 2, 2}, {1, 0, 0, 1});
  Tensor y = conv2d(x, k2, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == doctest::Approx(5.0));
}

TEST_CASE("conv2d invalid geometry") {
  Tensor x(Shape{1, 1, 2, 2});
  Tensor k(Shape{1, 1, 3, 3});
  CHECK_THROWS(conv2d(x, k, 1, 0));
  Tensor k_bad(Shape{1, 2, 1, 1});
  CHECK_THROWS(conv2d(x, k_bad, 1, 0));
}

TEST_CASE("conv2d gradcheck") {
  Rng rng(7);
  Tensor x = random_tensor(Shape{1, 2, 5, 5}, rng, true);
  Tensor k = random_tensor(Shape{3, 2, 3, 3}, rng, true);
  Tensor b = random_tensor(Shape{3}, rng, true);
  double err = gradcheck([&] { return mean(conv2d(x, k, b, 1, 1)); }, {x, k, b});
  CHECK(err < 1e-6);
  // strided, unpadded
  err = gradcheck([&] { return mean(conv2d(x, k, 2, 0)); }, {x, k});
  CHECK(err < 1e-6);
}

TEST_CASE("upsample_nearest2x") {
  Tensor x(Shape{1, 1, 1, 1}, {5.0}, true);
  Tensor y = upsample_nearest2x(x);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (double v : y.data()) CHECK(v == 5.0);
  // backward of all-ones upstream: 4 replicas
  backward(scalar_mul(mean(y), 4.0));
  CHECK(x.grad()[0] == doctest::Approx(4.0));

  Tensor col(Shape{1, 1, 2, 1}, {1, 2});
  Tensor up = upsample_nearest2x(col);
  CHECK(up.shape() == Shape{1, 1, 4, 2});
  CHECK(up.data() == std::vector<double>{1, 1, 1, 1, 2, 2, 2, 2});
}

TEST_CASE("linear examples and gradcheck") {
  Tensor x(Shape{2, 2}, {1, 2, 3, 4});
  Tensor id(Shape{2, 2}, {1, 0, 0, 1});
  Tensor zero_b(Shape{2});
  CHECK(linear(x, id, zero_b).data() == x.data());

  Tensor x2(Shape{1, 2}, {1, 2});
  Tensor w(Shape{2, 1}, {1, 1});
  Tensor b(Shape{1}, std::vector<double>{3});
  CHECK(linear(x2, w, b).item() == doctest::Approx(6.0));

  Tensor bad_w(Shape{3, 1});
  CHECK_THROWS(linear(x2, bad_w, b));  // inner dimension mismatch

  Rng rng(13);
  Tensor gx = random_tensor(Shape{3, 4}, rng, true);
  Tensor gw = random_tensor(Shape{4, 2}, rng, true);
  Tensor gb = random_tensor(Shape{2}, rng, true);
  double err = gradcheck([&] { return mean(sigmoid(linear(gx, gw, gb))); }, {gx, gw, gb});
  CHECK(err < 1e-6);
}

TEST_CASE("batchnorm2d behavior") {
  // gamma=1, beta=0, already standardized input passes through
  Tensor x(Shape{2, 1, 1, 2}, {-1, 1, -1, 1});
  Tensor gamma = Tensor::full(Shape{1}, 1.0);
  Tensor beta(Shape{1});
  Tensor rm(Shape{1});
  Tensor rv = Tensor::full(Shape{1}, 1.0);
  Tensor y = batchnorm2d(x, gamma, beta, rm, rv, true);
  for (size_t i = 0; i < 4; ++i)
    CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));

  // constant channel: output collapses to beta
  Tensor c = Tensor::full(Shape{2, 1, 2, 2}, 3.0);
  Tensor beta2 = Tensor::full(Shape{1}, 0.7);
  Tensor rm2(Shape{1}), rv2 = Tensor::full(Shape{1}, 1.0);
  Tensor yc = batchnorm2d(c, gamma, beta2, rm2, rv2, true);
  for (double v : yc.data()) CHECK(v == doctest::Approx(0.7));

  // running stats update with momentum 0.1
  CHECK(rm2.data()[0] == doctest::Approx(0.1 * 3.0));
  CHECK(rv2.data()[0] == doctest::Approx(0.9 * 1.0));

  // train mode with a single element per channel is rejected
  Tensor single(Shape{1, 1, 1, 1}, std::vector<double>{1.0});
  CHECK_THROWS(batchnorm2d(single, gamma, beta, rm, rv, true));
  // but eval mode is fine
  CHECK_NOTHROW(batchnorm2d(single, gamma, beta, rm, rv, false));
}

TEST_CASE("batchnorm2d gradcheck") {
  Rng rng(3);
  Tensor x = random_tensor(Shape{2, 3, 2, 2}, rng, true);
  Tensor gamma = random_tensor(Shape{3}, rng, true, 0.5, 1.5);
  Tensor beta = random_tensor(Shape{3}, rng, true);
  Tensor rm(Shape{3}), rv = Tensor::full(Shape{3}, 1.0);
  double err = gradcheck(
      [&] {
        Tensor rm_copy = rm.detach();
        Tensor rv_copy = rv.detach();
        return mean(mul(batchnorm2d(x, gamma, beta, rm_copy, rv_copy, true),
                        sigmoid(x)));
      },
      {x, gamma, beta});
  CHECK(err < 1e-5);
}

TEST_CASE("bce") {
  CHECK(bce(Tensor::scalar(0.5), Tensor::scalar(1.0)).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
  Tensor p(Shape{2}, {0.9, 0.1});
  Tensor t(Shape{2}, {1.0, 0.0});
  CHECK(bce(p, t).item() == doctest::Approx(0.105361).epsilon(1e-5));
  CHECK(bce(Tensor(Shape{2}, {1.0 - 1e-9, 1e-9}), t).item() ==
        doctest::Approx(0.0).epsilon(1e-5));
  CHECK_THROWS(bce(Tensor::scalar(0.5), Tensor::scalar(0.3)));
  // clamped bce stays finite at the extremes
  CHECK(std::isfinite(bce(Tensor(Shape{2}, {0.0, 1.0}), t).item()));

  Rng rng(5);
  Tensor pred = random_tensor(Shape{6}, rng, true, 0.05, 0.95);
  Tensor targ(Shape{6}, {1, 0, 1, 1, 0, 0});
  double err = gradcheck([&] { return bce(pred, targ); }, {pred});
  CHECK(err < 1e-6);
}

TEST_CASE("l1_loss") {
  Tensor a(Shape{2}, {1, 2});
  CHECK(l1_loss(a, a.detach()).item() == 0.0);
  CHECK(l1_loss(a, Tensor(Shape{2}, {0, 0})).item() == doctest::Approx(1.5));

  Tensor p(Shape{3}, {1.0, -2.0, 0.5}, true);
  Tensor t(Shape{3}, {0.5, 0.0, 0.9});
  backward(l1_loss(p, t));
  CHECK(p.grad()[0] == doctest::Approx(1.0 / 3));
  CHECK(p.grad()[1] == doctest::Approx(-1.0 / 3));
  CHECK(p.grad()[2] == doctest::Approx(-1.0 / 3));
  // subgradient 0 at exact ties
  Tensor q(Shape{1}, {2.0}, true);
  backward(l1_loss(q, Tensor::scalar(2.0)));
  CHECK(q.grad()[0] == 0.0);
}

TEST_CASE("backward contract") {
  Tensor theta(Shape{2}, {1, 2}, true);
  Tensor loss = mean(mul(theta, theta));
  backward(loss);
  CHECK(theta.grad()[0] == doctest::Approx(1.0));
  CHECK(theta.grad()[1] == doctest::Approx(2.0));
  CHECK_THROWS(backward(loss));  // second backward without re-forward

  // non-scalar loss is rejected
  Tensor vec(Shape{2}, {1, 2}, true);
  CHECK_THROWS(backward(add(vec, vec)));

  // detached parameter receives no gradient
  Tensor detached(Shape{2}, {1, 2});
  Tensor l2 = mean(mul(theta, detached));
  backward(l2);
  CHECK_FALSE(detached.has_grad());
}

TEST_CASE("gradient accumulation over fan-out") {
  Tensor theta(Shape{1}, {3.0}, true);
  backward(mean(add(theta, theta)));
  CHECK(theta.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("forward determinism") {
  Rng rng(42);
  Tensor x = random_tensor(Shape{1, 2, 8, 8}, rng, false);
  Tensor k = random_tensor(Shape{4, 2, 3, 3}, rng, false);
  Tensor y1 = conv2d(x, k, 1, 1);
  Tensor y2 = conv2d(x, k, 1, 1);
  CHECK(y1.data() == y2.data());
}

TEST_CASE("adam step behavior") {
  // first step magnitude is about lr regardless of gradient scale
  ParamMap params;
  Tensor theta(Shape{1}, {1.0}, true);
  theta.grad()[0] = 0.37;
  params.emplace("w", theta);
  Adam adam(AdamConfig{1e-4, 0.5, 0.999, 1e-8});
  adam.step(params);
  CHECK(std::abs(1.0 - theta.data()[0]) == doctest::Approx(1e-4).epsilon(1e-3));

  // zero gradient leaves the parameter unchanged
  Tensor frozen(Shape{1}, {2.0}, true);
  frozen.grad()[0] = 0.0;
  ParamMap pf;
  pf.emplace("w", frozen);
  Adam adam2(AdamConfig{0.1, 0.9, 0.999, 1e-8});
  adam2.step(pf);
  CHECK(frozen.data()[0] == doctest::Approx(2.0));

  // hand iteration: constant gradient, monotone decrease, steps within lr
  Tensor t2(Shape{1}, {1.0}, true);
  ParamMap p2;
  p2.emplace("w", t2);
  Adam adam3(AdamConfig{0.1, 0.9, 0.999, 1e-8});
  double prev = 1.0;
  for (int i = 0; i < 2; ++i) {
    t2.grad()[0] = 1.0;
    adam3.step(p2);
    double step = prev - t2.data()[0];
    CHECK(step > 0.0);
    CHECK(step <= 0.1 + 1e-12);
    prev = t2.data()[0];
  }
}

TEST_CASE("sgd step behavior") {
  Tensor theta(Shape{1}, {1.0}, true);
  theta.grad()[0] = 2.0;
  ParamMap p;
  p.emplace("w", theta);
  Sgd sgd(SgdConfig{0.5, 0.0});
  sgd.step(p);
  CHECK(theta.data()[0] == doctest::Approx(0.0));

  // momentum 0 twice: total delta -2 lr g
  Tensor t2(Shape{1}, {0.0}, true);
  ParamMap p2;
  p2.emplace("w", t2);
  Sgd sgd2(SgdConfig{0.1, 0.0});
  for (int i = 0; i < 2; ++i) {
    t2.grad()[0] = 1.0;
    sgd2.step(p2);
  }
  CHECK(t2.data()[0] == doctest::Approx(-0.2));

  // momentum 0.9: velocity recurrence, deltas -1 then -1.9
  Tensor t3(Shape{1}, {0.0}, true);
  ParamMap p3;
  p3.emplace("w", t3);
  Sgd sgd3(SgdConfig{1.0, 0.9});
  t3.grad()[0] = 1.0;
  sgd3.step(p3);
  CHECK(t3.data()[0] == doctest::Approx(-1.0));
  t3.grad()[0] = 1.0;
  sgd3.step(p3);
  CHECK(t3.data()[0] == doctest::Approx(-2.9));
}

TEST_CASE("pdt1 round trip") {
  auto dir = std::filesystem::temp_directory_path() / "pdgan_test_pdt1";
  std::filesystem::create_directories(dir);
  Rng rng(9);
  Tensor t = random_tensor(Shape{2, 3, 4}, rng, false);
  write_pdt1(dir / "t.pdt1", t);
  Tensor back = read_pdt1(dir / "t.pdt1");
  CHECK(back.shape() == t.shape());
  CHECK(back.data() == t.data());  // bit-exact
  std::filesystem::remove_all(dir);
}

TEST_CASE("softmax rows") {
  Tensor logits(Shape{2, 3}, {1, 2, 3, 0, 0, 0}, true);
  Tensor p = softmax_rows(logits);
  double row0 = p.data()[0] + p.data()[1] + p.data()[2];
  CHECK(row0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.data()[3] == doctest::Approx(1.0 / 3));

  Rng rng(21);
  Tensor l2 = random_tensor(Shape{3, 4}, rng, true);
  double err = gradcheck(
      [&] { return mean(mul(softmax_rows(l2), sigmoid(l2))); }, {l2});
  CHECK(err < 1e-6);
}
