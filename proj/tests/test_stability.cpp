#include <doctest.h>

#include "oracles.hpp"
#include "rlstm/experiments.hpp"
#include "rlstm/stability.hpp"

using namespace rlstm;

namespace {

Eigen::Matrix2d to_eigen(const CertMatrix& a) {
  Eigen::Matrix2d m;
  m << a.a11, a.a12, a.a21, a.a22;
  return m;
}

CertMatrix random_cert_matrix(CounterRng& rng, double scale) {
  CertMatrix a;
  a.a11 = rng.uniform(0.0, scale);
  a.a12 = rng.uniform(0.0, scale);
  a.a21 = rng.uniform(0.0, scale);
  a.a22 = rng.uniform(0.0, scale);
  return a;
}

}  // namespace

TEST_SUITE_BEGIN("stability");

TEST_CASE("zero-model matrix is [[0.5,0],[0.25,0]] with rho 0.5") {
  const LstmParams p = LstmParams::zeros(1, 1, 1);
  const GammaSequences seq = compute_sequences(p, 5);
  const auto [a, g] = delta_iss_matrix(p, seq, 0, 5);
  CHECK(a.a11 == 0.5);
  CHECK(a.a12 == 0.0);
  CHECK(a.a21 == 0.25);
  CHECK(a.a22 == 0.0);
  CHECK(a.alpha_s == 0.0);
  CHECK(g.a_x(0) == 0.0);
  CHECK(g.a_x(1) == 0.0);
  CHECK(spectral_radius_2x2(a) == 0.5);

  const auto [ai, gi] = iss_matrix(p, seq, 0, 5);
  CHECK(ai.a11 == 0.5);
  CHECK(ai.a12 == 0.0);
  CHECK(ai.a21 == 0.25);
  CHECK(spectral_radius_2x2(ai) == 0.5);
  CHECK(gi.a_b(0) == 0.5);   // sigma_i = 0.5 on the last layer
  CHECK(gi.a_b(1) == 0.25);  // sigma_o * sigma_i
}

TEST_CASE("spectral radius of simple matrices") {
  CertMatrix eye;
  eye.a11 = eye.a22 = 1.0;
  eye.a12 = eye.a21 = 0.0;
  CHECK(spectral_radius_2x2(eye) == 1.0);

  CertMatrix neg;
  neg.a11 = -0.1;
  CHECK_THROWS_AS(spectral_radius_2x2(neg), std::invalid_argument);
}

TEST_CASE("spectral radius matches plain power iteration") {
  CounterRng rng(55, "rho-tests");
  for (int trial = 0; trial < 100; ++trial) {
    const CertMatrix a = random_cert_matrix(rng, 1.5);
    const double expected = oracles::power_iteration_2x2(to_eigen(a));
    CHECK(spectral_radius_2x2(a) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("eigenvalue realness: discriminant stays nonnegative on certs") {
  for (int model = 0; model < 20; ++model) {
    const LstmParams p = sample_simplified_model(99, model);
    const GammaSequences seq = compute_sequences(p, 20);
    for (int k = 0; k <= 20; ++k) {
      const auto [a, g] = delta_iss_matrix(p, seq, 0, k);
      const double disc = a.trace() * a.trace() - 4.0 * a.det();
      CHECK(disc >= 0.0);
    }
  }
}

TEST_CASE("schur factors reconstruct the matrix") {
  CounterRng rng(66, "schur-tests");
  for (int trial = 0; trial < 100; ++trial) {
    const CertMatrix a = random_cert_matrix(rng, 2.0);
    const SchurFactors f = schur_2x2(a);
    CHECK(f.lambda1 * f.lambda2 == doctest::Approx(a.det()).epsilon(1e-9));
    CHECK(f.lambda1 + f.lambda2 == doctest::Approx(a.trace()).epsilon(1e-12));
    CHECK(std::abs(f.lambda1) >= std::abs(f.lambda2) - 1e-15);

    // Rebuild Q from the dominant eigenvector construction and check
    // Q T Q' == A.
    Eigen::Matrix2d m = to_eigen(a);
    Eigen::Vector2d v1(a.a12, f.lambda1 - a.a11);
    Eigen::Vector2d v2(f.lambda1 - a.a22, a.a21);
    Eigen::Vector2d q1 = (v1.norm() >= v2.norm()) ? v1 : v2;
    if (q1.norm() == 0.0) q1 << 1.0, 0.0;
    q1.normalize();
    Eigen::Matrix2d q;
    q << q1(0), -q1(1), q1(1), q1(0);
    Eigen::Matrix2d t;
    t << f.lambda1, f.nu, 0.0, f.lambda2;
    CHECK((q * t * q.transpose() - m).norm() <= 1e-10);
  }
}

TEST_CASE("diagonal matrix: nu is zero and r is the eigenvalue ratio") {
  CertMatrix a;
  a.a11 = 0.8;
  a.a22 = 0.2;
  const SchurFactors f = schur_2x2(a);
  CHECK(f.nu == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(f.r == doctest::Approx(0.25).epsilon(1e-12));

  CertMatrix zero_row;
  zero_row.a11 = 0.5;
  zero_row.a21 = 0.25;
  const SchurFactors f2 = schur_2x2(zero_row);
  CHECK(f2.lambda1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f2.lambda2 == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(f2.r == 0.0);
}

TEST_CASE("mu formula special values") {
  SchurFactors f;
  f.lambda1 = 0.5;
  f.lambda2 = 0.25;
  f.nu = 0.0;
  f.r = 0.5;
  CHECK(mu(f, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(mu(f, 3) == doctest::Approx(std::sqrt(1.0 + std::pow(0.5, 6))).epsilon(1e-15));

  SchurFactors nil;
  nil.lambda1 = 0.0;
  CHECK(mu(nil, 0) == 1.0);

  SchurFactors repeated;
  repeated.lambda1 = 0.5;
  repeated.lambda2 = 0.5;
  repeated.nu = 0.3;
  repeated.r = 1.0;
  // (1 - r^t)/(1 - r) -> t in the repeated-eigenvalue limit
  CHECK(mu(repeated, 4) ==
        doctest::Approx(std::sqrt(2.0 + (0.3 / 0.5) * (0.3 / 0.5) * 16.0))
            .epsilon(1e-12));
}

TEST_CASE("mu dominance: ||A^t|| <= mu(t) rho^t for certified matrices") {
  CounterRng rng(77, "mu-tests");
  int tested = 0;
  while (tested < 100) {
    CertMatrix a = random_cert_matrix(rng, 0.9);
    const double rho = spectral_radius_2x2(a);
    if (rho >= 1.0 || rho == 0.0) continue;
    ++tested;
    const SchurFactors f = schur_2x2(a);
    Eigen::Matrix2d m = to_eigen(a);
    Eigen::Matrix2d power = Eigen::Matrix2d::Identity();
    for (long t = 0; t <= 50; ++t) {
      const double bound = mu(f, t) * std::pow(rho, static_cast<double>(t));
      CHECK(oracles::exact_2norm_2x2(power) <= bound + 1e-10);
      power = power * m;
    }
  }
}

TEST_CASE("rho is monotonically nonincreasing in k") {
  for (int model = 0; model < 30; ++model) {
    const LstmParams p = sample_simplified_model(2024, model);
    const GammaSequences seq = compute_sequences(p, 20);
    double prev = 1e300;
    for (int k = 0; k <= 20; ++k) {
      const auto [a, g] = delta_iss_matrix(p, seq, 0, k);
      const double rho = spectral_radius_2x2(a);
      CHECK(rho <= prev + 1e-12);
      prev = rho;
    }
  }
}

TEST_CASE("matrix entries nonincreasing in k") {
  const LstmParams p = sample_simplified_model(31337, 0);
  const GammaSequences seq = compute_sequences(p, 20);
  auto prev = delta_iss_matrix(p, seq, 0, 0).first;
  for (int k = 1; k <= 20; ++k) {
    const auto cur = delta_iss_matrix(p, seq, 0, k).first;
    CHECK(cur.a11 <= prev.a11 + 1e-12);
    CHECK(cur.a12 <= prev.a12 + 1e-12);
    CHECK(cur.a21 <= prev.a21 + 1e-12);
    CHECK(cur.a22 <= prev.a22 + 1e-12);
    prev = cur;
  }
}

TEST_CASE("ISS rho agrees with the independent quadratic-formula oracle") {
  for (int model = 0; model < 10; ++model) {
    const LstmParams p = sample_simplified_model(505, model);
    const GammaSequences seq = compute_sequences(p, 5);
    const auto [a, g] = iss_matrix(p, seq, 0, 5);
    const double rho = spectral_radius_2x2(a);
    // Independent route: quadratic formula written out directly.
    const double tr = a.a11 + a.a22;
    const double det = a.a11 * a.a22 - a.a12 * a.a21;
    const double expected = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
    CHECK(rho == doctest::Approx(expected).epsilon(1e-14));
    CHECK(rho == doctest::Approx(oracles::power_iteration_2x2(to_eigen(a)))
                     .epsilon(1e-10));
  }
}

TEST_CASE("certify on the zero model passes with rho 0.5 per layer") {
  const LstmParams p = LstmParams::zeros(2, 3, 1, 2);
  const Certificate cert = certify(p, 7);
  CHECK(cert.verdict);
  REQUIRE(cert.layers.size() == 2);
  for (const auto& layer : cert.layers) {
    CHECK(layer.rho == 0.5);
    CHECK(layer.s_bar == 0.0);
  }
  CHECK(cert.u_y_norm == 0.0);
}

TEST_CASE("beta_tilde basics") {
  const LstmParams p = sample_simplified_model(606, 3);
  const Certificate cert = certify(p, 10);

  CHECK(beta_tilde({0.0}, 17, cert) == 0.0);
  const double s = 0.37;
  CHECK(beta_tilde({s}, 0, cert) ==
        doctest::Approx(mu(cert.layers[0].schur, 0) * s).epsilon(1e-14));
}

TEST_CASE("beta_tilde bounds simulated state differences for L=1") {
  CounterRng rng(88, "beta-tests");
  int certified = 0;
  for (int model = 0; model < 60 && certified < 10; ++model) {
    const LstmParams p = sample_simplified_model(808, model);
    const Certificate cert = certify(p, 12);
    if (!cert.verdict) continue;
    ++certified;
    const GammaSequences seq = compute_sequences(p, 12);
    const auto box = all_bounds(seq, 12);

    for (int pair = 0; pair < 20; ++pair) {
      LstmState s1 = zero_state(p);
      LstmState s2 = zero_state(p);
      s1.c[0](0) = rng.uniform(-box[0].c_bound, box[0].c_bound);
      s1.h[0](0) = rng.uniform(-box[0].h_bound, box[0].h_bound);
      s2.c[0](0) = rng.uniform(-box[0].c_bound, box[0].c_bound);
      s2.h[0](0) = rng.uniform(-box[0].h_bound, box[0].h_bound);
      const double s0_diff = std::hypot(s1.c[0](0) - s2.c[0](0),
                                        s1.h[0](0) - s2.h[0](0));
      for (long t = 0; t <= 200; ++t) {
        const double diff = std::hypot(s1.c[0](0) - s2.c[0](0),
                                       s1.h[0](0) - s2.h[0](0));
        CHECK(diff <= beta_tilde({s0_diff}, t, cert) + 1e-9);
        Vector x(1);
        x << rng.uniform(-1.0, 1.0);
        s1 = step(p, s1, x).first;
        s2 = step(p, s2, x).first;
      }
    }
  }
  CHECK(certified == 10);
}

TEST_CASE("the k=0 certificate reproduces the unrefined-recursion matrix") {
  // At k = 0 the sequences are plain functions of eta(-1) = 1; computing the
  // matrix from that closed form must agree with the pipeline.
  const LstmParams p = sample_simplified_model(909, 5);
  const auto& l = p.layers[0];
  const double sf = stable_sigmoid(g_gate(l, Gate::f, 1.0, 1.0));
  const double si = stable_sigmoid(g_gate(l, Gate::i, 1.0, 1.0));
  const double so = stable_sigmoid(g_gate(l, Gate::o, 1.0, 1.0));
  const double pc = std::tanh(g_cell(l, 1.0, 1.0));
  const double cb = si * pc / (1.0 - sf);
  const double alpha = 0.25 * induced_2norm(l.U_f) * cb +
                       si * induced_2norm(l.U_c) +
                       0.25 * induced_2norm(l.U_i) * pc;

  const Certificate cert = certify(p, 0);
  CHECK(cert.layers[0].matrix.a11 == doctest::Approx(sf).epsilon(1e-15));
  CHECK(cert.layers[0].matrix.a12 == doctest::Approx(alpha).epsilon(1e-15));
  CHECK(cert.layers[0].matrix.a21 == doctest::Approx(so * sf).epsilon(1e-15));
  CHECK(cert.layers[0].matrix.a22 ==
        doctest::Approx(alpha * so + 0.25 * std::tanh(cb) * induced_2norm(l.U_o))
            .epsilon(1e-15));
}

TEST_SUITE_END();
