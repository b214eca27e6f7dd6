#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "ctqw/common.hpp"

namespace ctqw {

using Complex = std::complex<double>;

/// Complex amplitude vector over a labeled basis. Either exactly unit norm
/// (within tolerance, then renormalized) or explicitly sub-normalized with
/// its squared norm recorded at construction.
class QuantumState {
 public:
  static QuantumState unit(Eigen::VectorXcd amplitudes,
                           const Tolerances& tols = default_tolerances()) {
    const double sq = amplitudes.squaredNorm();
    if (std::abs(sq - 1.0) > 2.0 * tols.unit_norm)
      throw std::invalid_argument("QuantumState::unit: squared norm deviates from 1 by " +
                                  std::to_string(std::abs(sq - 1.0)));
    amplitudes /= std::sqrt(sq);
    return QuantumState(std::move(amplitudes), 1.0, true);
  }

  static QuantumState subnormalized(Eigen::VectorXcd amplitudes) {
    const double sq = amplitudes.squaredNorm();
    return QuantumState(std::move(amplitudes), sq, false);
  }

  static QuantumState basis_state(Eigen::Index dim, Eigen::Index k) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    v[k] = 1.0;
    return QuantumState(std::move(v), 1.0, true);
  }

  static QuantumState from_real(const Eigen::VectorXd& v,
                                const Tolerances& tols = default_tolerances()) {
    return unit(v.cast<Complex>(), tols);
  }

  const Eigen::VectorXcd& amplitudes() const { return amps_; }
  Eigen::Index dim() const { return amps_.size(); }
  bool is_unit() const { return unit_; }
  double squared_norm() const { return squared_norm_; }

  QuantumState normalized() const {
    if (unit_) return *this;
    if (squared_norm_ <= 0)
      throw NumericalError("QuantumState::normalized: zero state");
    return QuantumState(amps_ / std::sqrt(squared_norm_), 1.0, true);
  }

 private:
  QuantumState(Eigen::VectorXcd amps, double sq, bool unit)
      : amps_(std::move(amps)), squared_norm_(sq), unit_(unit) {}

  Eigen::VectorXcd amps_;
  double squared_norm_;
  bool unit_;
};

/// Hermitian operator with a lazily computed, cached eigendecomposition.
/// Copies share the underlying storage; the decomposition is computed at
/// most once (std::call_once) and then read concurrently without locking.
class HermitianOperator {
 public:
  explicit HermitianOperator(Eigen::MatrixXcd matrix,
                             const Tolerances& tols = default_tolerances())
      : impl_(std::make_shared<Impl>()) {
    if (matrix.rows() != matrix.cols())
      throw std::invalid_argument("HermitianOperator: matrix must be square");
    const double asym = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
    if (asym > tols.hermitian)
      throw std::invalid_argument("HermitianOperator: max asymmetry " + std::to_string(asym) +
                                  " exceeds tolerance");
    impl_->matrix = std::move(matrix);
    impl_->residual_tol = tols.eig_residual;
  }

  static HermitianOperator from_real(const Eigen::MatrixXd& m,
                                     const Tolerances& tols = default_tolerances()) {
    return HermitianOperator(m.cast<Complex>(), tols);
  }

  Eigen::Index dim() const { return impl_->matrix.rows(); }
  const Eigen::MatrixXcd& matrix() const { return impl_->matrix; }

  /// Ascending eigenvalues.
  const Eigen::VectorXd& eigenvalues() const {
    decompose();
    return impl_->eigenvalues;
  }

  /// Unitary matrix of eigenvectors, columns matching eigenvalues().
  const Eigen::MatrixXcd& eigenvectors() const {
    decompose();
    return impl_->eigenvectors;
  }

  double spectral_norm() const {
    decompose();
    return std::max(std::abs(impl_->eigenvalues[0]),
                    std::abs(impl_->eigenvalues[dim() - 1]));
  }

 private:
  struct Impl {
    Eigen::MatrixXcd matrix;
    double residual_tol = 1e-9;
    mutable std::once_flag once;
    mutable Eigen::VectorXd eigenvalues;
    mutable Eigen::MatrixXcd eigenvectors;
  };

  void decompose() const {
    std::call_once(impl_->once, [this] {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(impl_->matrix);
      if (solver.info() != Eigen::Success)
        throw NumericalError("HermitianOperator: eigensolver failed to converge");
      const double residual =
          (impl_->matrix * solver.eigenvectors() -
           solver.eigenvectors() * solver.eigenvalues().asDiagonal())
              .cwiseAbs()
              .maxCoeff();
      if (residual > impl_->residual_tol)
        throw NumericalError("HermitianOperator: decomposition residual " +
                             std::to_string(residual) + " exceeds tolerance");
      impl_->eigenvalues = solver.eigenvalues();
      impl_->eigenvectors = solver.eigenvectors();
    });
  }

  std::shared_ptr<Impl> impl_;
};

/// Ascending eigenvalues and the matching unitary of eigenvectors.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXcd> eigh(const HermitianOperator& op) {
  return {op.eigenvalues(), op.eigenvectors()};
}

/// V f(Lambda) V^dag |psi> for a real function f of the eigenvalues.
/// For |f| <= 1 the output squared norm never exceeds the input's.
inline QuantumState apply_matrix_function(const HermitianOperator& op,
                                          const std::function<double(double)>& f,
                                          const QuantumState& psi) {
  if (psi.dim() != op.dim())
    throw std::invalid_argument("apply_matrix_function: dimension mismatch");
  const Eigen::VectorXcd coeffs = op.eigenvectors().adjoint() * psi.amplitudes();
  Eigen::VectorXcd scaled(coeffs.size());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i)
    scaled[i] = f(op.eigenvalues()[i]) * coeffs[i];
  return QuantumState::subnormalized(op.eigenvectors() * scaled);
}

/// e^{-iA tau} |psi>. tau may be negative (Gaussian-sampled times are).
inline QuantumState unitary_evolve(const HermitianOperator& op, double tau,
                                   const QuantumState& psi) {
  if (psi.dim() != op.dim())
    throw std::invalid_argument("unitary_evolve: dimension mismatch");
  const Eigen::VectorXcd coeffs = op.eigenvectors().adjoint() * psi.amplitudes();
  Eigen::VectorXcd scaled(coeffs.size());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i)
    scaled[i] = std::exp(Complex(0.0, -op.eigenvalues()[i] * tau)) * coeffs[i];
  Eigen::VectorXcd out = op.eigenvectors() * scaled;
  if (psi.is_unit()) {
    // Unitarity makes this a unit state; renormalize away rounding drift.
    return QuantumState::unit(std::move(out));
  }
  return QuantumState::subnormalized(std::move(out));
}

/// True when P is an orthogonal projector: Hermitian and idempotent.
inline bool is_projector(const Eigen::MatrixXcd& p,
                         const Tolerances& tols = default_tolerances()) {
  if (p.rows() != p.cols()) return false;
  if ((p - p.adjoint()).cwiseAbs().maxCoeff() > tols.projector) return false;
  return ((p * p - p).cwiseAbs().maxCoeff() <= tols.projector);
}

}  // namespace ctqw
