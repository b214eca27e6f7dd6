#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ctqw/gaussian.hpp"
#include "ctqw/walker.hpp"
#include "support/test_util.hpp"

using namespace ctqw;
using ctqw::testing::random_reversible_chain;

namespace {
Eigen::VectorXd sqrt_pi_unmarked(const MarkovChain& chain, const MarkedSet& m) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(chain.size());
  for (int x : m.complement(chain.size())) v[x] = std::sqrt(chain.stationary()[x]);
  return v / v.norm();
}
}  // namespace

TEST_CASE("build_walk_unitary") {
  const auto lazy_k3 = make_lazy(generate(GraphFamily::Complete, 3));
  const Eigen::MatrixXd u = build_walk_unitary(lazy_k3);
  const int n = 3, reg = n + 1;

  SECTION("defining columns U_P|x,0> = sum_y sqrt(p_xy) |x,y>") {
    for (int x = 0; x < n; ++x) {
      Eigen::VectorXd expected = Eigen::VectorXd::Zero(reg * reg);
      for (int y = 0; y < n; ++y)
        expected[(x + 1) * reg + (y + 1)] = std::sqrt(lazy_k3.transition()(x, y));
      REQUIRE((u.col((x + 1) * reg) - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SECTION("orthogonality") {
    REQUIRE((u.transpose() * u - Eigen::MatrixXd::Identity(reg * reg, reg * reg))
                .cwiseAbs()
                .maxCoeff() <= 1e-10);
  }
  SECTION("two-node chain with one outgoing edge") {
    Eigen::MatrixXd w(2, 2);
    w << 0, 1, 1, 0;
    const Eigen::MatrixXd u2 = build_walk_unitary(MarkovChain::from_weighted_graph(w));
    // U_P (e_node0 (x) e_ref) = e_node0 (x) e_node1
    Eigen::VectorXd in = Eigen::VectorXd::Zero(9);
    in[1 * 3 + 0] = 1.0;
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(9);
    expected[1 * 3 + 2] = 1.0;
    REQUIRE(((u2 * in) - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("WalkHamiltonian construction invariants") {
  RngStream rng(300);
  const auto chain = make_lazy(random_reversible_chain(5, rng));
  const WalkHamiltonian w(chain);
  const Eigen::Index d = w.dim();
  REQUIRE(d == 36);

  SECTION("V is symmetric, involutive, and has the discriminant block") {
    const Eigen::MatrixXd& v = w.v_matrix();
    REQUIRE((v - v.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE((v * v - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-10);
    const auto disc = discriminant(chain);
    for (int x = 0; x < 5; ++x)
      for (int y = 0; y < 5; ++y)
        REQUIRE(v((y + 1) * 6, (x + 1) * 6) ==
                Catch::Approx(disc.matrix()(x, y)).margin(1e-12));
  }

  SECTION("V agrees with U_P S U_P assembled densely") {
    const Eigen::MatrixXd u = build_walk_unitary(chain);
    Eigen::MatrixXd s(d, d);
    s.setZero();
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) s(a * 6 + b, b * 6 + a) = 1.0;
    REQUIRE((w.v_matrix() - u.transpose() * s * u).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("H_P is Hermitian with zero trace and matches i(V Pi_0 - Pi_0 V)") {
    const auto& h = w.hermitian();
    REQUIRE(std::abs(h.matrix().trace()) < 1e-12);
    Eigen::MatrixXd pi0 = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < 6; ++j) pi0(j * 6, j * 6) = 1.0;
    const Eigen::MatrixXd b = w.v_matrix() * pi0 - pi0 * w.v_matrix();
    REQUIRE((h.matrix() - Complex(0, 1) * b.cast<Complex>()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("closed form H_P(psi,0) = iV(psi,0) - i(D psi,0)") {
    Eigen::VectorXd psi = ctqw::testing::random_real_unit_vector(5, rng);
    Eigen::VectorXd prod = Eigen::VectorXd::Zero(d);
    for (int x = 0; x < 5; ++x) prod[(x + 1) * 6] = psi[x];
    const Eigen::VectorXd b_applied = w.apply_generator(prod);
    Eigen::VectorXd expected = w.v_matrix() * prod;
    const Eigen::VectorXd dpsi = w.discriminant_matrix() * psi;
    for (int x = 0; x < 5; ++x) expected[(x + 1) * 6] -= dpsi[x];
    REQUIRE((b_applied - expected).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("reference-state protection: H_P V(psi,0) = iV(D psi,0) - i(psi,0)") {
    Eigen::VectorXd psi = ctqw::testing::random_real_unit_vector(5, rng);
    Eigen::VectorXd prod = Eigen::VectorXd::Zero(d);
    for (int x = 0; x < 5; ++x) prod[(x + 1) * 6] = psi[x];
    const Eigen::VectorXd vprod = w.v_matrix() * prod;
    const Eigen::VectorXd lhs = w.apply_generator(vprod);
    const Eigen::VectorXd dpsi = w.discriminant_matrix() * psi;
    Eigen::VectorXd dprod = Eigen::VectorXd::Zero(d);
    for (int x = 0; x < 5; ++x) dprod[(x + 1) * 6] = dpsi[x];
    const Eigen::VectorXd rhs = w.v_matrix() * dprod - prod;
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("verify_square_relation") {
  SECTION("sqrt(pi) is annihilated") {
    const auto chain = make_lazy(generate(GraphFamily::Complete, 4));
    const WalkHamiltonian w(chain);
    const Eigen::VectorXd sqrt_pi = chain.stationary().cwiseSqrt();
    REQUIRE(w.square_relation_residual(sqrt_pi) <= 1e-9);
  }
  SECTION("holds across random reversible chains") {
    RngStream rng(301);
    for (int k = 0; k < 20; ++k) {
      RngStream sub = rng.substream(k);
      const int n = 2 + static_cast<int>(sub.uniform_index(9));
      auto chain = random_reversible_chain(n, sub);
      if (sub.bernoulli(0.5)) chain = make_lazy(chain);
      const WalkHamiltonian w(chain);
      RngStream check = sub.substream(1000);
      REQUIRE(verify_square_relation(w, discriminant(chain), 10, check) <= 1e-9);
    }
  }
  SECTION("two-node chain: I - D^2 vanishes") {
    Eigen::MatrixXd wts(2, 2);
    wts << 0, 1, 1, 0;
    const auto chain = MarkovChain::from_weighted_graph(wts);
    const WalkHamiltonian w(chain);
    Eigen::VectorXd psi(2);
    psi << 1 / std::sqrt(2.0), -1 / std::sqrt(2.0);
    Eigen::VectorXd prod = Eigen::VectorXd::Zero(9);
    prod[1 * 3] = psi[0];
    prod[2 * 3] = psi[1];
    const Eigen::VectorXd hh = -w.apply_generator(w.apply_generator(prod));
    REQUIRE(hh.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("evolve_edge_state") {
  const auto chain = make_lazy(generate(GraphFamily::Complete, 4));
  const WalkHamiltonian w(chain);
  RngStream rng(302);
  const QuantumState psi = QuantumState::from_real(
      ctqw::testing::random_real_unit_vector(4, rng));

  SECTION("tau = 0 returns the embedded state") {
    const auto out = w.evolve_edge_state(psi, 0.0);
    REQUIRE((out.amplitudes() - w.embed(psi)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("sqrt(pi) is stationary for every tau") {
    const QuantumState sp = QuantumState::from_real(chain.stationary().cwiseSqrt());
    for (double tau : {0.4, 3.0, -11.0}) {
      const auto out = w.evolve_edge_state(sp, tau);
      REQUIRE((out.amplitudes() - w.embed(sp)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SECTION("norm preserved and real route matches the Hermitian route") {
    for (double tau : {0.7, -2.3, 9.1}) {
      const auto fast = w.evolve_edge_state(psi, tau);
      REQUIRE(std::abs(fast.amplitudes().norm() - 1.0) < 1e-10);
      const auto slow = unitary_evolve(w.hermitian(), tau,
                                       QuantumState::unit(w.embed(psi)));
      REQUIRE((fast.amplitudes() - slow.amplitudes()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SECTION("matches the Pade exponential of tau B") {
    const double tau = 1.9;
    Eigen::MatrixXd b(w.dim(), w.dim());
    Eigen::VectorXd basis = Eigen::VectorXd::Zero(w.dim());
    for (Eigen::Index col = 0; col < w.dim(); ++col) {
      basis[col] = 1.0;
      b.col(col) = w.apply_generator(basis);
      basis[col] = 0.0;
    }
    const Eigen::VectorXd expected =
        ctqw::testing::expm(Eigen::MatrixXd(tau * b)) * w.embed(psi).real();
    const auto out = w.evolve_edge_state(psi, tau);
    REQUIRE((out.amplitudes().real() - expected).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE(out.amplitudes().imag().cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("complex node states evolve consistently") {
    RngStream crng(303);
    const QuantumState cpsi = QuantumState::unit(ctqw::testing::random_unit_vector(4, crng));
    const auto fast = w.evolve_edge_state(cpsi, 1.2);
    const auto slow = unitary_evolve(w.hermitian(), 1.2, QuantumState::unit(w.embed(cpsi)));
    REQUIRE((fast.amplitudes() - slow.amplitudes()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("H_P spectrum stays within the discriminant range (soft)") {
  RngStream rng(304);
  for (int k = 0; k < 5; ++k) {
    RngStream sub = rng.substream(k);
    const auto chain = make_lazy(random_reversible_chain(4 + (int)sub.uniform_index(3), sub));
    const WalkHamiltonian w(chain);
    const auto& h = w.hermitian();
    CHECK_NOFAIL(h.eigenvalues().minCoeff() >= -1.0 - 1e-8);
    CHECK_NOFAIL(h.eigenvalues().maxCoeff() <= 1.0 + 1e-8);
  }
}

TEST_CASE("marked_probability") {
  const auto chain = make_lazy(generate(GraphFamily::Complete, 4));
  const WalkHamiltonian w(chain);
  const MarkedSet m({1});

  SECTION("unmarked stationary restriction has zero marked mass") {
    const QuantumState psi = QuantumState::from_real(sqrt_pi_unmarked(chain, m));
    REQUIRE(marked_probability(QuantumState::unit(w.embed(psi)), m) < 1e-15);
  }
  SECTION("full node set catches all node-sector mass") {
    RngStream rng(305);
    const QuantumState psi = QuantumState::from_real(
        ctqw::testing::random_real_unit_vector(4, rng));
    const auto evolved = w.evolve_edge_state(psi, 2.1);
    const MarkedSet all({0, 1, 2, 3});
    const Eigen::VectorXd marg = first_register_distribution(evolved);
    REQUIRE(marked_probability(evolved, all) ==
            Catch::Approx(marg.tail(4).sum()).margin(1e-12));
    REQUIRE(marked_probability(evolved, all) + marg[0] ==
            Catch::Approx(1.0).margin(1e-10));
  }
  SECTION("additive over singletons") {
    RngStream rng(306);
    const QuantumState psi = QuantumState::from_real(
        ctqw::testing::random_real_unit_vector(4, rng));
    const auto evolved = w.evolve_edge_state(psi, 1.4);
    const MarkedSet big({0, 2, 3});
    double sum = 0;
    for (int x : big.members()) sum += marked_probability(evolved, MarkedSet({x}));
    REQUIRE(sum == Catch::Approx(marked_probability(evolved, big)).margin(1e-12));
  }
  SECTION("empty marked set rejected") {
    const QuantumState psi = QuantumState::from_real(sqrt_pi_unmarked(chain, m));
    REQUIRE_THROWS_AS(marked_probability(QuantumState::unit(w.embed(psi)), MarkedSet{}),
                      std::invalid_argument);
  }
}

TEST_CASE("fast-forwarding chain on the walk Hamiltonian") {
  // Exact Tr[(Pi_M (x) I) rho_t] via the Gaussian mixture of H_{P(s)}
  // dominates the classical fast-forward bound.
  const auto lazy = make_lazy(generate(GraphFamily::Complete, 5));
  const MarkedSet m({0});
  RngStream rng(307);
  for (int k = 0; k < 6; ++k) {
    const double s = 1.0 - 1.0 / (1 + static_cast<int>(rng.uniform_index(8)));
    const double t = rng.uniform(0.0, 12.0);
    const auto ic = interpolate(lazy, m, s);
    const WalkHamiltonian w(ic.chain());
    const QuantumState psi_u = QuantumState::from_real(sqrt_pi_unmarked(lazy, m));

    Eigen::VectorXd mask = Eigen::VectorXd::Zero(w.dim());
    for (int x : m.members()) mask.segment((x + 1) * 6, 6).setOnes();
    const double exact = projected_probability_masked(
        exact_density(w.hermitian(), QuantumState::unit(w.embed(psi_u)), t), mask);
    const double bound = fast_forward_bound(discriminant(ic), psi_u, m, t);
    REQUIRE(exact >= bound - 1e-9);
  }
}
