#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ctqw/spectral.hpp"
#include "support/test_util.hpp"

using namespace ctqw;
using ctqw::testing::random_hermitian;
using ctqw::testing::random_unit_vector;

TEST_CASE("eigh: identity and Pauli-X") {
  const HermitianOperator id(Eigen::MatrixXcd::Identity(4, 4));
  REQUIRE((id.eigenvalues().array() - 1.0).abs().maxCoeff() < 1e-14);

  Eigen::MatrixXcd x(2, 2);
  x << 0, 1, 1, 0;
  const HermitianOperator pauli(x);
  REQUIRE(pauli.eigenvalues()[0] == Catch::Approx(-1.0).margin(1e-12));
  REQUIRE(pauli.eigenvalues()[1] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("eigh: random 8x8 reconstruction residual") {
  RngStream rng(101);
  const Eigen::MatrixXcd a = random_hermitian(8, rng);
  const HermitianOperator op(a);
  const auto [evals, evecs] = eigh(op);
  const double residual =
      (evecs * evals.asDiagonal().toDenseMatrix().cast<Complex>() * evecs.adjoint() - a)
          .cwiseAbs()
          .maxCoeff();
  REQUIRE(residual < 1e-9);
  // ascending order
  for (int i = 1; i < 8; ++i) REQUIRE(evals[i] >= evals[i - 1]);
  // orthonormal columns
  REQUIRE((evecs.adjoint() * evecs - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("eigh: non-Hermitian input rejected with reported asymmetry") {
  Eigen::MatrixXcd bad(2, 2);
  bad << 1, 2, 0, 1;
  REQUIRE_THROWS_WITH(HermitianOperator(bad),
                      Catch::Matchers::ContainsSubstring("asymmetry"));
}

TEST_CASE("apply_matrix_function basics") {
  RngStream rng(102);
  const Eigen::MatrixXcd a = random_hermitian(6, rng);
  const HermitianOperator op(a);
  const QuantumState psi = QuantumState::unit(random_unit_vector(6, rng));

  SECTION("identity map applied twice equals A^2 psi") {
    const auto once = apply_matrix_function(op, [](double l) { return l; }, psi);
    const auto twice = apply_matrix_function(op, [](double l) { return l; }, once);
    const Eigen::VectorXcd expected = a * a * psi.amplitudes();
    REQUIRE((twice.amplitudes() - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("constant one leaves the state unchanged") {
    const auto out = apply_matrix_function(op, [](double) { return 1.0; }, psi);
    REQUIRE((out.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("damping at t=0 leaves the state unchanged") {
    const auto out =
        apply_matrix_function(op, [](double l) { return std::exp(-0.0 * l * l); }, psi);
    REQUIRE((out.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("|f| <= 1 cannot grow the squared norm") {
    const auto out =
        apply_matrix_function(op, [](double l) { return std::exp(-0.3 * l * l); }, psi);
    REQUIRE(out.squared_norm() <= psi.squared_norm() + 1e-12);
  }
}

TEST_CASE("spectral mapping on eigenvectors") {
  RngStream rng(103);
  const HermitianOperator op(random_hermitian(7, rng));
  auto f = [](double l) { return std::tanh(l) + 0.25 * l; };
  for (int k = 0; k < 7; ++k) {
    const QuantumState vk = QuantumState::unit(op.eigenvectors().col(k));
    const auto out = apply_matrix_function(op, f, vk);
    const Eigen::VectorXcd expected = f(op.eigenvalues()[k]) * vk.amplitudes();
    REQUIRE((out.amplitudes() - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("unitary_evolve: closed forms on Pauli-X") {
  Eigen::MatrixXcd x(2, 2);
  x << 0, 1, 1, 0;
  const HermitianOperator op(x);

  SECTION("tau = 0 is the identity") {
    const QuantumState psi = QuantumState::basis_state(2, 0);
    const auto out = unitary_evolve(op, 0.0, psi);
    REQUIRE((out.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("tau = pi flips eigenstates by a global phase") {
    Eigen::VectorXcd plus(2);
    plus << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    const auto out = unitary_evolve(op, M_PI, QuantumState::unit(plus));
    REQUIRE((out.amplitudes() + plus).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("tau = pi/2 swaps basis-state probabilities") {
    const auto out = unitary_evolve(op, M_PI / 2.0, QuantumState::basis_state(2, 0));
    REQUIRE(std::norm(out.amplitudes()[0]) < 1e-12);
    REQUIRE(std::norm(out.amplitudes()[1]) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("unitary_evolve: norm preserved on random instances") {
  RngStream rng(104);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 2 + static_cast<int>(rng.uniform_index(15));
    const HermitianOperator op(random_hermitian(dim, rng));
    const QuantumState psi = QuantumState::unit(random_unit_vector(dim, rng));
    const double tau = rng.uniform(-20.0, 20.0);
    const auto out = unitary_evolve(op, tau, psi);
    REQUIRE(std::abs(out.amplitudes().norm() - 1.0) < 1e-10);
  }
}

TEST_CASE("real antisymmetric generator keeps real states real") {
  RngStream rng(105);
  const Eigen::MatrixXd raw = ctqw::testing::random_real_matrix(9, 9, rng);
  const Eigen::MatrixXd antisym = 0.5 * (raw - raw.transpose());
  const HermitianOperator op(Complex(0, 1) * antisym.cast<Complex>());
  const Eigen::VectorXd real_in = ctqw::testing::random_real_unit_vector(9, rng);
  const auto out = unitary_evolve(op, 1.7, QuantumState::from_real(real_in));
  REQUIRE(out.amplitudes().imag().cwiseAbs().maxCoeff() < 1e-10);
  // e^{-i (iB) tau} = e^{tau B}: compare against the Pade oracle.
  const Eigen::VectorXd expected = ctqw::testing::expm(Eigen::MatrixXd(1.7 * antisym)) * real_in;
  REQUIRE((out.amplitudes().real() - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("QuantumState bookkeeping") {
  Eigen::VectorXcd v(2);
  v << 0.6, 0.8;
  REQUIRE(QuantumState::unit(v).is_unit());
  v *= 0.5;
  const auto sub = QuantumState::subnormalized(v);
  REQUIRE_FALSE(sub.is_unit());
  REQUIRE(sub.squared_norm() == Catch::Approx(0.25).margin(1e-15));
  REQUIRE(sub.normalized().is_unit());
  REQUIRE_THROWS_AS(QuantumState::unit(v), std::invalid_argument);
}

TEST_CASE("is_projector") {
  RngStream rng(106);
  const auto p = ctqw::testing::random_projector(6, 2, rng);
  REQUIRE(is_projector(p));
  Eigen::MatrixXcd notp = p;
  notp(0, 0) += 0.5;
  REQUIRE_FALSE(is_projector(notp));
}
