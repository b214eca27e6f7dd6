#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "ctqw/common.hpp"
#include "ctqw/markov.hpp"
#include "ctqw/rng.hpp"
#include "ctqw/spectral.hpp"

namespace ctqw {

// Product-space conventions shared by everything below. Each register has
// dimension n+1 with the reference state at index 0 and node x at index
// x+1; the product basis index is (first register) * (n+1) + (second
// register). This ordering is also the on-disk convention for states.

namespace walker_detail {

inline Eigen::Index product_index(int n, Eigen::Index first, Eigen::Index second) {
  return first * (n + 1) + second;
}

/// Block data of U_P: per node x the outgoing-amplitude row chi_x with
/// chi_x[y+1] = sqrt(p_xy). U_P acts block-diagonally on the first register;
/// block x+1 is the Householder reflection exchanging e_0 and chi_x, block 0
/// (reference) is the identity.
struct WalkUnitaryBlocks {
  int n = 0;
  Eigen::MatrixXd chi;  // n rows, n+1 columns; column 0 is zero

  explicit WalkUnitaryBlocks(const MarkovChain& chain, const Tolerances& tols) {
    n = chain.size();
    chi = Eigen::MatrixXd::Zero(n, n + 1);
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) chi(x, y + 1) = std::sqrt(chain.transition()(x, y));
      const double unit = chi.row(x).squaredNorm();
      if (std::abs(unit - 1.0) > 1e-12)
        throw NumericalError("walk unitary: ||chi_x|| deviates from 1 by " +
                             std::to_string(std::abs(unit - 1.0)) + " at node " +
                             std::to_string(x));
    }
    (void)tols;
  }

  /// In-place U_P. The reflection R = I - u u^T with u = e_0 - chi_x swaps
  /// e_0 and chi_x and fixes their orthogonal complement (u has norm^2 = 2).
  template <typename Scalar>
  void apply_u(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) const {
    const int reg = n + 1;
    for (int x = 0; x < n; ++x) {
      auto block = v.segment(static_cast<Eigen::Index>(x + 1) * reg, reg);
      Scalar dot = block[0];
      for (int y = 1; y < reg; ++y) dot -= chi(x, y) * block[y];
      block[0] -= dot;
      for (int y = 1; y < reg; ++y) block[y] += dot * chi(x, y);
    }
  }

  template <typename Scalar>
  void apply_swap(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) const {
    const int reg = n + 1;
    for (Eigen::Index a = 0; a < reg; ++a)
      for (Eigen::Index b = a + 1; b < reg; ++b)
        std::swap(v[a * reg + b], v[b * reg + a]);
  }

  /// V = U_P S U_P (U_P is symmetric by construction, so dagger = itself).
  template <typename Scalar>
  void apply_v(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) const {
    apply_u(v);
    apply_swap(v);
    apply_u(v);
  }

  /// B = V Pi_0 - Pi_0 V, the real antisymmetric generator with H_P = i B.
  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_b(
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) const {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const int reg = n + 1;
    Vec projected = Vec::Zero(v.size());
    for (Eigen::Index j = 0; j < reg; ++j)
      projected[j * reg] = v[j * reg];
    apply_v(projected);  // V Pi_0 v
    Vec full = v;
    apply_v(full);
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (i % reg != 0) full[i] = Scalar(0);  // Pi_0 V v
    return projected - full;
  }
};

}  // namespace walker_detail

/// Dense U_P on the (n+1)^2 product space: U_P |x,0> = sum_y sqrt(p_xy)
/// |x,y>, completed per x by the Householder reflection taking |0> to
/// sum_y sqrt(p_xy)|y> on the second register (identity on the reference
/// block of the first register). Real, symmetric and involutive.
inline Eigen::MatrixXd build_walk_unitary(const MarkovChain& chain,
                                          const Tolerances& tols = default_tolerances()) {
  const walker_detail::WalkUnitaryBlocks blocks(chain, tols);
  const int reg = chain.size() + 1;
  const Eigen::Index dim = static_cast<Eigen::Index>(reg) * reg;
  Eigen::MatrixXd u(dim, dim);
  Eigen::VectorXd basis = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    basis[col] = 1.0;
    Eigen::VectorXd image = basis;
    blocks.apply_u(image);
    u.col(col) = image;
    basis[col] = 0.0;
  }
  return u;
}

/// The CTQW Hamiltonian H_P = i [U_P^dag S U_P, Pi_0] together with its
/// evolution machinery. Copies share the underlying caches.
///
/// The generator B = V Pi_0 - Pi_0 V is real antisymmetric, so
/// e^{-i H_P tau} = e^{tau B} is real orthogonal: evolution of real states
/// runs entirely in real arithmetic through the cached eigendecomposition
/// of C = H_P^2 = -B^2 (e^{tau B} = cos(tau sqrt(C)) + B sinc-part).
/// The complex Hermitian decomposition of H_P itself is materialized only
/// on demand (exact_density needs signed eigenvalues).
class WalkHamiltonian {
 public:
  explicit WalkHamiltonian(const MarkovChain& chain,
                           const Tolerances& tols = default_tolerances())
      : impl_(std::make_shared<Impl>(chain, tols)) {
    verify_construction(tols);
  }

  int node_count() const { return impl_->blocks.n; }
  Eigen::Index dim() const { return impl_->dim; }
  const MarkovChain& chain() const { return impl_->chain; }
  const Eigen::MatrixXd& discriminant_matrix() const { return impl_->disc; }

  static std::string extension_description() {
    return "U_P extended per first-register value by the Householder reflection "
           "exchanging the reference state with the outgoing-amplitude vector; "
           "identity on the reference block";
  }

  /// psi (x) |0> embedded in the product space.
  Eigen::VectorXcd embed(const QuantumState& node_state) const {
    if (node_state.dim() != node_count())
      throw std::invalid_argument("WalkHamiltonian: node state has wrong dimension");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim());
    for (int x = 0; x < node_count(); ++x)
      out[walker_detail::product_index(node_count(), x + 1, 0)] =
          node_state.amplitudes()[x];
    return out;
  }

  /// e^{-i H_P tau} (psi (x) |0>), the Algorithm-1 step-3 evolution.
  QuantumState evolve_edge_state(const QuantumState& node_state, double tau) const {
    return evolve_product(embed(node_state), tau, node_state.is_unit());
  }

  /// e^{-i H_P tau} applied to an arbitrary product-space vector.
  QuantumState evolve_product(const Eigen::VectorXcd& state, double tau,
                              bool unit_input = false) const {
    if (state.size() != dim())
      throw std::invalid_argument("WalkHamiltonian: product state has wrong dimension");
    ensure_propagator();
    const Eigen::VectorXd re = propagate_real(state.real(), tau);
    Eigen::VectorXcd out;
    if (state.imag().cwiseAbs().maxCoeff() == 0.0) {
      out = re.cast<Complex>();
    } else {
      const Eigen::VectorXd im = propagate_real(state.imag(), tau);
      out = re.cast<Complex>() + Complex(0, 1) * im.cast<Complex>();
    }
    if (unit_input) {
      const double sq = out.squaredNorm();
      if (std::abs(sq - 1.0) > 1e-10)
        throw NumericalError("WalkHamiltonian: evolution norm drift " +
                             std::to_string(std::abs(sq - 1.0)));
      out /= std::sqrt(sq);
      return QuantumState::unit(std::move(out));
    }
    return QuantumState::subnormalized(std::move(out));
  }

  /// H_P as a dense complex Hermitian operator (cached).
  const HermitianOperator& hermitian() const {
    std::call_once(impl_->hermitian_once, [this] {
      Eigen::MatrixXcd h(dim(), dim());
      Eigen::VectorXd basis = Eigen::VectorXd::Zero(dim());
      for (Eigen::Index col = 0; col < dim(); ++col) {
        basis[col] = 1.0;
        h.col(col) = Complex(0, 1) * impl_->blocks.apply_b(basis).cast<Complex>();
        basis[col] = 0.0;
      }
      impl_->hermitian = std::make_unique<HermitianOperator>(0.5 * (h + h.adjoint()));
    });
    return *impl_->hermitian;
  }

  /// Dense V = U_P S U_P (cached; test and inspection use).
  const Eigen::MatrixXd& v_matrix() const {
    std::call_once(impl_->v_once, [this] {
      impl_->v_dense.resize(dim(), dim());
      Eigen::VectorXd basis = Eigen::VectorXd::Zero(dim());
      for (Eigen::Index col = 0; col < dim(); ++col) {
        basis[col] = 1.0;
        Eigen::VectorXd image = basis;
        impl_->blocks.apply_v(image);
        impl_->v_dense.col(col) = image;
        basis[col] = 0.0;
      }
    });
    return impl_->v_dense;
  }

  /// B applied to a real product-space vector (exposed for validation).
  Eigen::VectorXd apply_generator(const Eigen::VectorXd& v) const {
    if (v.size() != dim())
      throw std::invalid_argument("WalkHamiltonian: vector has wrong dimension");
    return impl_->blocks.apply_b(v);
  }

 private:
  struct Impl {
    Impl(const MarkovChain& chain_in, const Tolerances& tols)
        : chain(chain_in), blocks(chain_in, tols) {
      const int reg = chain.size() + 1;
      dim = static_cast<Eigen::Index>(reg) * reg;
      disc = Discriminant(chain, tols).matrix();
    }

    MarkovChain chain;
    walker_detail::WalkUnitaryBlocks blocks;
    Eigen::Index dim = 0;
    Eigen::MatrixXd disc;

    mutable std::once_flag prop_once;
    mutable Eigen::MatrixXd prop_basis;    // eigenvectors of C = -B^2
    mutable Eigen::VectorXd prop_theta;    // sqrt of C's eigenvalues

    mutable std::once_flag hermitian_once;
    mutable std::unique_ptr<HermitianOperator> hermitian;

    mutable std::once_flag v_once;
    mutable Eigen::MatrixXd v_dense;
  };

  void ensure_propagator() const {
    std::call_once(impl_->prop_once, [this] {
      const Eigen::Index d = dim();
      Eigen::MatrixXd c(d, d);
      Eigen::VectorXd basis = Eigen::VectorXd::Zero(d);
      for (Eigen::Index col = 0; col < d; ++col) {
        basis[col] = 1.0;
        c.col(col) = -impl_->blocks.apply_b(impl_->blocks.apply_b(basis));
        basis[col] = 0.0;
      }
      c = 0.5 * (c + c.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
      if (solver.info() != Eigen::Success)
        throw NumericalError("WalkHamiltonian: propagator eigensolver failed");
      impl_->prop_basis = solver.eigenvectors();
      impl_->prop_theta = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    });
  }

  /// e^{tau B} v = R cos(tau Theta) R^T v + B R (sin(tau Theta)/Theta) R^T v.
  Eigen::VectorXd propagate_real(const Eigen::VectorXd& v, double tau) const {
    const Eigen::VectorXd w = impl_->prop_basis.transpose() * v;
    Eigen::VectorXd cos_part(w.size()), sinc_part(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double theta = impl_->prop_theta[i];
      cos_part[i] = std::cos(tau * theta) * w[i];
      const double x = tau * theta;
      const double sinc = std::abs(x) < 1e-8 ? tau * (1.0 - x * x / 6.0)
                                             : std::sin(x) / theta;
      sinc_part[i] = sinc * w[i];
    }
    return impl_->prop_basis * cos_part +
           impl_->blocks.apply_b(Eigen::VectorXd(impl_->prop_basis * sinc_part));
  }

  void verify_construction(const Tolerances& tols) const {
    const int n = node_count();
    RngStream rng(0x5eedULL + static_cast<std::uint64_t>(n));

    // V is an involution and symmetric (checked on random vectors).
    Eigen::VectorXd r(dim()), s(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
      r[i] = rng.normal();
      s[i] = rng.normal();
    }
    Eigen::VectorXd vr = r, vvr = r, vs = s;
    impl_->blocks.apply_v(vr);
    impl_->blocks.apply_v(vs);
    vvr = vr;
    impl_->blocks.apply_v(vvr);
    if ((vvr - r).cwiseAbs().maxCoeff() > tols.spectral * r.cwiseAbs().maxCoeff() * 10)
      throw NumericalError("WalkHamiltonian: V^2 != I (residual " +
                           std::to_string((vvr - r).cwiseAbs().maxCoeff()) + ")");
    if (std::abs(r.dot(vs) - vr.dot(s)) > 1e-10 * r.norm() * s.norm())
      throw NumericalError("WalkHamiltonian: V is not symmetric");

    // Block identity <y,0|V|x,0> = D_xy.
    for (int x = 0; x < n; ++x) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(dim());
      col[walker_detail::product_index(n, x + 1, 0)] = 1.0;
      impl_->blocks.apply_v(col);
      for (int y = 0; y < n; ++y) {
        const double got = col[walker_detail::product_index(n, y + 1, 0)];
        if (std::abs(got - impl_->disc(x, y)) > 1e-12)
          throw NumericalError("WalkHamiltonian: block identity <y,0|V|x,0> = D_xy fails at (" +
                               std::to_string(x) + "," + std::to_string(y) + ") by " +
                               std::to_string(std::abs(got - impl_->disc(x, y))));
      }
      if (std::abs(col[0]) > 1e-12)
        throw NumericalError("WalkHamiltonian: reference column leaked into V|x,0>");
    }

    // Square relation H_P^2 (psi (x) |0>) = ((I - D^2) psi) (x) |0>.
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXd psi(n);
      for (int i = 0; i < n; ++i) psi[i] = rng.normal();
      psi.normalize();
      const double residual = square_relation_residual(psi);
      if (residual > tols.eig_residual)
        throw NumericalError("WalkHamiltonian: square relation residual " +
                             std::to_string(residual));
    }
  }

 public:
  /// || H_P^2 (psi (x) |0>) - ((I - D^2) psi) (x) |0> || for one node state.
  double square_relation_residual(const Eigen::VectorXd& psi) const {
    const int n = node_count();
    if (psi.size() != n)
      throw std::invalid_argument("square_relation_residual: wrong dimension");
    Eigen::VectorXd prod = Eigen::VectorXd::Zero(dim());
    for (int x = 0; x < n; ++x)
      prod[walker_detail::product_index(n, x + 1, 0)] = psi[x];
    const Eigen::VectorXd hh = -impl_->blocks.apply_b(impl_->blocks.apply_b(prod));
    const Eigen::VectorXd target = psi - impl_->disc * (impl_->disc * psi);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(dim());
    for (int x = 0; x < n; ++x)
      expected[walker_detail::product_index(n, x + 1, 0)] = target[x];
    return (hh - expected).norm();
  }

 private:
  std::shared_ptr<Impl> impl_;
};

inline WalkHamiltonian build_hamiltonian(const MarkovChain& chain,
                                         const Tolerances& tols = default_tolerances()) {
  return WalkHamiltonian(chain, tols);
}

inline WalkHamiltonian build_hamiltonian(const InterpolatedChain& ic,
                                         const Tolerances& tols = default_tolerances()) {
  return WalkHamiltonian(ic.chain(), tols);
}

/// Max residual of the square relation over random unit node states.
/// Throws when the residual exceeds 1e-9.
inline double verify_square_relation(const WalkHamiltonian& w, const Discriminant& disc,
                                     int trials, RngStream& rng) {
  if (disc.dim() != w.node_count())
    throw std::invalid_argument("verify_square_relation: dimension mismatch");
  if ((disc.matrix() - w.discriminant_matrix()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("verify_square_relation: discriminant does not match the walk");
  double worst = 0;
  for (int k = 0; k < trials; ++k) {
    Eigen::VectorXd psi(w.node_count());
    for (int i = 0; i < w.node_count(); ++i) psi[i] = rng.normal();
    psi.normalize();
    worst = std::max(worst, w.square_relation_residual(psi));
  }
  if (worst > 1e-9)
    throw NumericalError("verify_square_relation: max residual " + std::to_string(worst));
  return worst;
}

/// Probability of measuring a first-register node in M:
/// <state| (Pi_M (x) I) |state>.
inline double marked_probability(const QuantumState& product_state, const MarkedSet& m) {
  if (m.empty()) throw std::invalid_argument("marked_probability: empty marked set");
  const Eigen::Index dim = product_state.dim();
  const int reg = static_cast<int>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (static_cast<Eigen::Index>(reg) * reg != dim)
    throw std::invalid_argument("marked_probability: state is not on a product space");
  const int n = reg - 1;
  m.validate(n);
  double p = 0;
  for (int x : m.members())
    p += product_state.amplitudes()
             .segment(static_cast<Eigen::Index>(x + 1) * reg, reg)
             .squaredNorm();
  return p;
}

/// Marginal distribution of the first register (index 0 = reference state,
/// index x+1 = node x), used for the node-basis measurement.
inline Eigen::VectorXd first_register_distribution(const QuantumState& product_state) {
  const Eigen::Index dim = product_state.dim();
  const int reg = static_cast<int>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (static_cast<Eigen::Index>(reg) * reg != dim)
    throw std::invalid_argument("first_register_distribution: not a product space");
  Eigen::VectorXd probs(reg);
  for (int j = 0; j < reg; ++j)
    probs[j] = product_state.amplitudes()
                   .segment(static_cast<Eigen::Index>(j) * reg, reg)
                   .squaredNorm();
  return probs;
}

}  // namespace ctqw
