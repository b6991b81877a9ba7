#include <doctest.h>

#include <cmath>
#include <limits>

#include "gradcheck.hpp"
#include "navlab/numerics.hpp"

using namespace navlab;

TEST_CASE("affine layer examples") {
  ParamBlock zero("z", 3, 2);
  AffineCache<float> cache;
  const float x[2] = {0.3f, -4.0f};
  for (float v : affine_relu_forward<float>(zero, x, false, cache)) CHECK(v == 0.0f);

  ParamBlock eye("i", 2, 2);
  eye.weights = {1, 0, 0, 1};
  const float x2[2] = {1.0f, -2.0f};
  const auto y = affine_relu_forward<float>(eye, x2, false, cache);
  CHECK(y[0] == 1.0f);
  CHECK(y[1] == 0.0f);
  const auto lin = affine_relu_forward<float>(eye, x2, true, cache);
  CHECK(lin[1] == -2.0f);
}

TEST_CASE("finite-difference checks of every backward pass") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    CAPTURE(seed);
    CHECK(gradcheck::affine_layer(seed) < 1e-4);
    CHECK(gradcheck::a3c_loss(seed) < 1e-4);
    CHECK(gradcheck::siamese_model(seed) < 1e-4);
    CHECK(gradcheck::siamese_model(seed, true) < 1e-4);
    CHECK(gradcheck::goal_free_net(seed) < 1e-4);
    CHECK(gradcheck::q_network(seed) < 1e-4);
  }
}

TEST_CASE("softmax") {
  const std::vector<double> z{0, 0, 0, 0};
  for (double p : softmax<double>(z)) CHECK(p == doctest::Approx(0.25));

  const std::vector<float> big{1000, 0, 0, 0};
  const auto p = softmax<float>(big);
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(0.0));

  Rng r(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> l = gradcheck::random_vec(r, 4, -50, 50), shifted = l;
    for (auto& v : shifted) v += 17.3;
    const auto a = softmax<double>(l), b = softmax<double>(shifted);
    double sum = 0;
    for (int j = 0; j < 4; ++j) {
      CHECK(a[j] >= 0.0);
      CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
      sum += a[j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("entropy and a3c loss examples") {
  const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
  CHECK(entropy<double>(uniform) == doctest::Approx(std::log(4.0)));

  // zero advantage, no entropy bonus: nothing to learn
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25};
  const std::vector<double> values{1.5, -0.5};
  const std::vector<Action> actions{Action::TurnLeft, Action::MoveForward};
  const auto res = a3c_loss_and_grads<double>(probs, values, actions, values, 0.0);
  CHECK(res.policy == 0.0);
  CHECK(res.value == 0.0);
  for (double d : res.dlogits) CHECK(d == 0.0);
  for (double d : res.dvalues) CHECK(d == 0.0);
  CHECK(res.entropy == doctest::Approx(entropy<double>(std::span(probs).first(4)) + std::log(4.0)));

  const std::vector<double> dead{0.0, 0.5, 0.5, 0.0};
  const std::vector<double> v1{0.0}, r1{1.0};
  const std::vector<Action> a1{Action::MoveForward};
  CHECK_THROWS_AS(a3c_loss_and_grads<double>(dead, v1, a1, r1, 0.01), NumericError);
}

TEST_CASE("n-step returns") {
  const std::vector<double> r{-0.01, -0.01, 10.0};
  const auto R = n_step_returns<double>(r, 123.0, true, 0.99);
  CHECK(R[2] == doctest::Approx(10.0));
  CHECK(R[0] == doctest::Approx(-0.01 + 0.99 * (-0.01 + 0.99 * 10.0)));
  CHECK(R[0] == doctest::Approx(9.7811).epsilon(1e-4));

  const auto plain = n_step_returns<double>(r, 0.0, true, 1.0);
  CHECK(plain[0] == doctest::Approx(9.98));
  CHECK(plain[1] == doctest::Approx(9.99));

  const auto boot = n_step_returns<double>(std::vector<double>{1.0}, 3.0, false, 0.5);
  CHECK(boot[0] == doctest::Approx(2.5));
  CHECK(n_step_returns<double>(std::vector<double>{}, 3.0, false, 0.99).empty());

  for (double g : {0.0, 0.5, 0.99, 1.0}) {
    for (double v : n_step_returns<double>(std::vector<double>(7, 0.0), 0.0, false, g)) CHECK(v == 0.0);
  }
}

TEST_CASE("rmsprop arithmetic") {
  const RmsPropConfig cfg{7e-4f, 0.99f, 0.1f};
  ParamBlock p("p", 1, 1);
  p.weights = {0.0f};
  p.bias = {0.5f};
  RmsAccumulator v(p);
  GradBlock g(p);
  g.weights = {1.0f};
  REQUIRE(rmsprop_apply(cfg, v, p, g));
  CHECK(v.weights[0] == doctest::Approx(0.01));
  CHECK(p.weights[0] == doctest::Approx(-7e-4 / std::sqrt(0.11)));
  CHECK(p.weights[0] == doctest::Approx(-2.1106e-3).epsilon(1e-4));
  CHECK(p.bias[0] == 0.5f);
  CHECK(g.weights[0] == 0.0f);  // consumed

  // zero gradient: params unchanged, accumulator decays
  v.bias[0] = 0.4f;
  const float before = p.weights[0];
  REQUIRE(rmsprop_apply(cfg, v, p, g));
  CHECK(p.weights[0] == before);
  CHECK(v.weights[0] == doctest::Approx(0.0099));
  CHECK(v.bias[0] == doctest::Approx(0.396));

  // two identical steps differ from one doubled step
  ParamBlock a("a", 1, 1), b("b", 1, 1);
  RmsAccumulator va(a), vb(b);
  GradBlock ga(a), gb(b);
  ga.weights = {1.0f};
  rmsprop_apply(cfg, va, a, ga);
  ga.weights = {1.0f};
  rmsprop_apply(cfg, va, a, ga);
  gb.weights = {2.0f};
  rmsprop_apply(cfg, vb, b, gb);
  CHECK(a.weights[0] != b.weights[0]);

  // non-finite gradients are rejected without touching state
  ParamBlock c("c", 1, 2);
  c.weights = {1.0f, 2.0f};
  RmsAccumulator vc(c);
  vc.weights = {0.3f, 0.3f};
  GradBlock gc(c);
  gc.weights = {std::numeric_limits<float>::quiet_NaN(), 1.0f};
  CHECK_FALSE(rmsprop_apply(cfg, vc, c, gc));
  CHECK(c.weights == std::vector<float>{1.0f, 2.0f});
  CHECK(vc.weights == std::vector<float>{0.3f, 0.3f});
  CHECK(gc.weights[1] == 0.0f);
}

TEST_CASE("rmsprop keeps the accumulator nonnegative") {
  Rng r(8);
  ParamBlock p("p", 4, 4);
  RmsAccumulator v(p);
  GradBlock g(p);
  for (int it = 0; it < 200; ++it) {
    for (auto& x : g.weights) x = static_cast<float>(r.normal() * std::pow(10.0, r.uniform() * 8 - 4));
    rmsprop_apply({}, v, p, g);
    for (float x : v.weights) REQUIRE(x >= 0.0f);
  }
}

TEST_CASE("global norm clipping") {
  GradBlock a(1, 2), b(1, 1);
  a.weights = {3.0f, 0.0f};
  a.bias = {0.0f};
  b.weights = {4.0f};
  b.bias = {0.0f};
  GradBlock* gs[] = {&a, &b};
  CHECK(clip_global_norm(gs, 10.0f) == doctest::Approx(5.0));
  CHECK(a.weights[0] == 3.0f);
  CHECK(clip_global_norm(gs, 1.0f) == doctest::Approx(5.0));
  CHECK(a.weights[0] == doctest::Approx(0.6));
  CHECK(b.weights[0] == doctest::Approx(0.8));
  b.weights[0] = 400.0f;
  CHECK(clip_global_norm(gs, 0.0f) > 399.0f);
  CHECK(b.weights[0] == 400.0f);
}
