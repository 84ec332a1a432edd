#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "fockwit/cc_states.hpp"
#include "fockwit/fock.hpp"
#include "fockwit/rng.hpp"
#include "oracles.hpp"

using namespace fockwit;
using Catch::Approx;

TEST_CASE("JointDistribution validation and JSON") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.6, 0.5, 0.0, -0.1;
  CHECK_THROWS_AS(JointDistribution(bad), std::invalid_argument);
  Eigen::MatrixXd short_sum(1, 2);
  short_sum << 0.4, 0.4;
  CHECK_THROWS_AS(JointDistribution(short_sum), std::invalid_argument);

  JointDistribution f = JointDistribution::from_json({{"p", {{0.25, 0.25}, {0.5, 0.0}}}});
  CHECK(f.p()(1, 0) == 0.5);
  JointDistribution back = JointDistribution::from_json(f.to_json());
  CHECK((back.p() - f.p()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(JointDistribution::from_json({{"p", {{0.5}, {0.25, 0.25}}}}),
                  std::invalid_argument);
}

TEST_CASE("LocalBasis validation") {
  CHECK_THROWS_AS(LocalBasis(Matrix::Ones(3, 3)), std::invalid_argument);
  LocalBasis fock = LocalBasis::fock(4);
  CHECK((fock.u() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  Rng rng(17);
  LocalBasis hr = LocalBasis::random(6, rng);
  CHECK((hr.u().adjoint() * hr.u() - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <
        1e-12);
  // round trip through the shared matrix schema
  LocalBasis back = LocalBasis::from_json(hr.to_json());
  CHECK((back.u() - hr.u()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("partial trace of a number-correlated state is its distribution") {
  Eigen::VectorXd p = geometric_distribution(0.4, 6);
  DensityMatrix rho = number_correlated(p, ModeDims::two(8, 8));
  DensityMatrix marg = partial_trace(rho, Mode::a);
  Matrix want = Matrix::Zero(8, 8);
  for (int n = 0; n < 6; ++n) want(n, n) = p(n);
  CHECK((marg.mat() - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("delta table in Fock bases gives the two-mode vacuum") {
  DensityMatrix rho =
      cc_state(JointDistribution::delta(0, 0, 4, 4), LocalBasis::fock(4),
               LocalBasis::fock(4));
  DensityMatrix vac = DensityMatrix::from_ket(tensor(vacuum_ket(4), vacuum_ket(4)));
  CHECK((rho.mat() - vac.mat()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform 2x2 diagonal table reproduces the number-correlated pair") {
  DensityMatrix a = cc_state(JointDistribution::uniform_diagonal(2),
                             LocalBasis::fock(2), LocalBasis::fock(2));
  Eigen::VectorXd p(2);
  p << 0.5, 0.5;
  DensityMatrix b = number_correlated(p, ModeDims::two(2, 2));
  CHECK((a.mat() - b.mat()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("cc_state has exact trace one and PSD spectrum") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(5, 7);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 7; ++j) raw(i, j) = rng.uniform();
    JointDistribution f(raw / raw.sum());
    LocalBasis ba = LocalBasis::random(5, rng);
    LocalBasis bb = LocalBasis::random(7, rng);
    DensityMatrix rho = cc_state(f, ba, bb);
    CHECK(rho.trace() == Approx(1.0).margin(1e-12));
    DensityDiagnostics diag = validate_density(rho);
    CHECK(diag.ok());
  }
}

TEST_CASE("number_correlated basics") {
  Eigen::VectorXd delta0(1);
  delta0 << 1.0;
  DensityMatrix vac = number_correlated(delta0, ModeDims::two(3, 3));
  CHECK(vac.mat()(0, 0) == Complex(1.0, 0.0));
  CHECK(vac.trace() == Approx(1.0));

  Eigen::VectorXd badsum(2);
  badsum << 0.6, 0.6;
  CHECK_THROWS_AS(number_correlated(badsum, ModeDims::two(3, 3)),
                  std::invalid_argument);
  Eigen::VectorXd toolong(4);
  toolong << 0.25, 0.25, 0.25, 0.25;
  CHECK_THROWS_AS(number_correlated(toolong, ModeDims::two(3, 3)),
                  std::invalid_argument);
}

TEST_CASE("number-correlated states kill the number-difference variance") {
  Rng rng(41);
  for (int trial = 0; trial < 8; ++trial) {
    const int support = 2 + static_cast<int>(rng.uniform() * 6);
    Eigen::VectorXd p(support);
    for (int i = 0; i < support; ++i) p(i) = rng.uniform() + 0.01;
    p /= p.sum();
    DensityMatrix rho = number_correlated(p, ModeDims::two(10, 10));
    CHECK(variance(rho, number_difference(rho.dims())) == Approx(0.0).margin(1e-14));
  }
}

TEST_CASE("geometric number-correlated state mean occupation") {
  const int d = 30;
  Eigen::VectorXd p = geometric_distribution(0.5, d);
  DensityMatrix rho = number_correlated(p, ModeDims::two(d, d));
  const double want = 2.0 * oracles::truncated_geometric_mean(0.5, d);
  CHECK(expectation(rho, total_number(rho.dims())).real() ==
        Approx(want).margin(1e-12));
  CHECK(want == Approx(2.0).margin(1e-6));
}

TEST_CASE("is_cc_in_bases round trip is tight") {
  Rng rng(59);
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) raw(i, j) = rng.uniform();
  JointDistribution f(raw / raw.sum());
  LocalBasis ba = LocalBasis::random(4, rng);
  LocalBasis bb = LocalBasis::random(4, rng);
  CcCheck check = is_cc_in_bases(cc_state(f, ba, bb), ba, bb);
  CHECK(check.is_cc);
  CHECK(check.residual <= 1e-12);

  // same state, wrong basis pair: diagonality is destroyed
  LocalBasis other = LocalBasis::random(4, rng);
  CcCheck wrong = is_cc_in_bases(cc_state(f, ba, bb), other, bb);
  CHECK_FALSE(wrong.is_cc);
}

TEST_CASE("coherent products are not Fock-diagonal") {
  DensityMatrix rho = tensor(DensityMatrix::from_ket(coherent_ket(1.0, 12)),
                             DensityMatrix::from_ket(coherent_ket(0.5, 12)));
  CcCheck check = is_cc_in_bases(rho, LocalBasis::fock(12), LocalBasis::fock(12));
  CHECK_FALSE(check.is_cc);
  // leading off-diagonal amplitude of |1><1| in Fock space is e^{-1}/sqrt(1!0!)
  CHECK(check.residual > std::exp(-1.0));
}

TEST_CASE("number-correlated states are Fock-diagonal") {
  Eigen::VectorXd p = geometric_distribution(0.5, 8);
  DensityMatrix rho = number_correlated(p, ModeDims::two(8, 8));
  CcCheck check = is_cc_in_bases(rho, LocalBasis::fock(8), LocalBasis::fock(8));
  CHECK(check.is_cc);
  CHECK(check.residual == 0.0);
}
