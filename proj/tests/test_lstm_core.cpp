#include <doctest.h>

#include "oracles.hpp"
#include "rlstm/lstm.hpp"

using namespace rlstm;

TEST_SUITE_BEGIN("lstm_core");

TEST_CASE("zero params, zero state: next state stays zero, output is b_y") {
  LstmParams p = LstmParams::zeros(2, 3, 2);
  p.b_y << 0.7, -0.2;
  const LstmState s0 = zero_state(p);
  Vector x(2);
  x << 0.5, -0.5;
  const auto [s1, y] = step(p, s0, x);
  CHECK(s1.c[0].isZero(0.0));
  CHECK(s1.h[0].isZero(0.0));
  CHECK(y(0) == 0.7);
  CHECK(y(1) == -0.2);
}

TEST_CASE("scalar model matches the hand-evaluated gate equations") {
  LstmParams p = LstmParams::zeros(1, 1, 1);
  auto& l = p.layers[0];
  l.W_f(0, 0) = 0.3;  l.W_i(0, 0) = -0.4; l.W_c(0, 0) = 0.9;  l.W_o(0, 0) = 0.2;
  l.U_f(0, 0) = -0.7; l.U_i(0, 0) = 0.5;  l.U_c(0, 0) = -0.1; l.U_o(0, 0) = 0.8;
  l.b_f(0) = 0.1;     l.b_i(0) = -0.2;    l.b_c(0) = 0.3;     l.b_o(0) = -0.4;
  p.U_y(0, 0) = 1.5;
  p.b_y(0) = -0.6;

  LstmState s = zero_state(p);
  s.c[0](0) = 0.25;
  s.h[0](0) = -0.35;
  Vector x(1);
  x << 0.6;

  const auto expected = oracles::scalar_lstm_step(0.3, -0.4, 0.9, 0.2, -0.7, 0.5,
                                                  -0.1, 0.8, 0.1, -0.2, 0.3, -0.4,
                                                  1.5, -0.6, 0.25, -0.35, 0.6);
  const auto [s1, y] = step(p, s, x);
  CHECK(s1.c[0](0) == doctest::Approx(expected.c_next).epsilon(1e-14));
  CHECK(s1.h[0](0) == doctest::Approx(expected.h_next).epsilon(1e-14));
  CHECK(y(0) == doctest::Approx(expected.y).epsilon(1e-14));
}

TEST_CASE("simulate equals repeated step calls exactly") {
  const LstmParams p = oracles::random_model(100, 2, 3, 2, 1, 0.5);
  CounterRng rng(100, "sim-inputs");
  std::vector<Vector> xs;
  for (int t = 0; t < 10; ++t) {
    Vector x(2);
    x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    xs.push_back(x);
  }
  const Trace trace = simulate(p, zero_state(p), xs);
  REQUIRE(trace.states.size() == 11);
  REQUIRE(trace.outputs.size() == 11);

  LstmState s = zero_state(p);
  for (int t = 0; t < 10; ++t) {
    const auto [next, y] = step(p, s, xs[t]);
    CHECK(trace.states[t + 1].c[0] == next.c[0]);
    CHECK(trace.states[t + 1].h[0] == next.h[0]);
    CHECK(trace.outputs[t + 1] == y);
    s = next;
  }
}

TEST_CASE("constant zero model: all outputs equal b_y over 100 steps") {
  LstmParams p = LstmParams::zeros(1, 2, 1);
  p.b_y(0) = 0.123;
  std::vector<Vector> xs(100, Vector::Constant(1, 0.4));
  const Trace trace = simulate(p, zero_state(p), xs);
  for (const auto& y : trace.outputs) CHECK(y(0) == 0.123);
}

TEST_CASE("two-tank dimensions run without error") {
  const LstmParams p = oracles::random_model(7, 3, 22, 2, 1, 0.2);
  std::vector<Vector> xs(50, Vector::Zero(3));
  const Trace trace = simulate(p, zero_state(p), xs);
  CHECK(trace.outputs.size() == 51);
}

TEST_CASE("hidden states stay strictly inside (-1,1)") {
  const LstmParams p = oracles::random_model(13, 2, 4, 1, 2, 2.0);
  CounterRng rng(13, "bound-inputs");
  LstmState s = zero_state(p);
  // Even from a wild initial state, one step brings h inside the band.
  for (auto& h : s.h) h.setConstant(50.0);
  for (auto& c : s.c) c.setConstant(-50.0);
  for (int t = 0; t < 200; ++t) {
    Vector x(2);
    x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    const auto [next, y] = step(p, s, x);
    for (const auto& h : next.h) {
      CHECK(h.cwiseAbs().maxCoeff() < 1.0);
    }
    s = next;
  }
}

TEST_CASE("layer chaining: layer-2 input is the fresh layer-1 hidden state") {
  const LstmParams p = oracles::random_model(21, 2, 3, 1, 2, 0.7);
  CounterRng rng(21, "chain-inputs");
  Vector x(2);
  x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
  const LstmState s0 = zero_state(p);
  const auto [s1, y] = step(p, s0, x);

  // Single-layer view of layer 2 driven by h^(1)(t+1) must reproduce s1.
  LstmParams upper = LstmParams::zeros(3, 3, 1);
  upper.layers[0] = p.layers[1];
  upper.U_y = p.U_y;
  upper.b_y = p.b_y;
  LstmState u0;
  u0.c.push_back(s0.c[1]);
  u0.h.push_back(s0.h[1]);
  const auto [u1, uy] = step(upper, u0, s1.h[0]);
  CHECK((u1.c[0] - s1.c[1]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((u1.h[0] - s1.h[1]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(uy(0) == y(0));
}

TEST_CASE("dimension mismatch errors name the offending layer") {
  const LstmParams p = oracles::random_model(3, 2, 3, 1, 1, 0.5);
  const LstmState s0 = zero_state(p);
  CHECK_THROWS_WITH_AS(step(p, s0, Vector::Zero(5)),
                       doctest::Contains("layer 1"), std::invalid_argument);

  LstmParams bad = p;
  bad.layers[0].U_c = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("empty input sequence is rejected") {
  const LstmParams p = LstmParams::zeros(1, 1, 1);
  CHECK_THROWS_AS(simulate(p, zero_state(p), {}), std::invalid_argument);
}

TEST_CASE("simulate counts input-bound violations instead of failing") {
  LstmParams p = LstmParams::zeros(1, 1, 1);
  p.x_max = 1.0;
  std::vector<Vector> xs(5, Vector::Constant(1, 0.5));
  xs[2](0) = 1.5;
  const Trace trace = simulate(p, zero_state(p), xs);
  CHECK(trace.bound_violations == 1);
}

TEST_SUITE_END();
