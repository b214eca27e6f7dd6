#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "ctqw/common.hpp"
#include "ctqw/markov.hpp"
#include "ctqw/rng.hpp"
#include "ctqw/spectral.hpp"

namespace ctqw {

/// Evolution time tau = sqrt(2t) z with z standard normal. The sign is kept;
/// E|tau| = 2 sqrt(t/pi) and Var tau = 2t.
inline double sample_evolution_time(double t, RngStream& rng) {
  if (t < 0) throw std::invalid_argument("sample_evolution_time: t must be nonnegative");
  return std::sqrt(2.0 * t) * rng.normal();
}

/// Implicit spectral form of the Gaussian-random-time mixture
///   rho_t = E_z[ e^{-i sqrt(2t) H z} |psi0><psi0| e^{+i sqrt(2t) H z} ].
/// In the eigenbasis of H the Gaussian average damps each matrix element:
///   rho_t[i,j] = c_i conj(c_j) e^{-t (lambda_i - lambda_j)^2},
/// with c = V^dag psi0. The diagonal is t-invariant and the trace stays 1.
class SpectralDensity {
 public:
  SpectralDensity(HermitianOperator op, Eigen::VectorXcd coefficients, double time)
      : op_(std::move(op)), coeffs_(std::move(coefficients)), time_(time) {
    if (time_ < 0) throw std::invalid_argument("SpectralDensity: negative damping time");
    if (coeffs_.size() != op_.dim())
      throw std::invalid_argument("SpectralDensity: coefficient size mismatch");
    const double tr = coeffs_.squaredNorm();
    if (std::abs(tr - 1.0) > 1e-10)
      throw NumericalError("SpectralDensity: trace " + std::to_string(tr) + " deviates from 1");
  }

  const HermitianOperator& op() const { return op_; }
  const Eigen::VectorXcd& coefficients() const { return coeffs_; }
  double time() const { return time_; }
  double trace() const { return coeffs_.squaredNorm(); }

  /// Dense rho_t in the computational basis. Validation-only: the implicit
  /// form is canonical, so this refuses to materialize large instances.
  Eigen::MatrixXcd dense() const {
    const Eigen::Index d = op_.dim();
    if (d > 64)
      throw std::logic_error("SpectralDensity::dense is restricted to small validation cases");
    Eigen::MatrixXcd in_basis(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        in_basis(i, j) = coeffs_[i] * std::conj(coeffs_[j]) * damping(i, j);
    return op_.eigenvectors() * in_basis * op_.eigenvectors().adjoint();
  }

  double damping(Eigen::Index i, Eigen::Index j) const {
    const double gap = op_.eigenvalues()[i] - op_.eigenvalues()[j];
    return std::exp(-time_ * gap * gap);
  }

 private:
  HermitianOperator op_;
  Eigen::VectorXcd coeffs_;
  double time_;
};

/// Exact rho_t for evolving psi0 under H for the Gaussian random time.
/// t = 0 reproduces the pure state, and an eigenstate of H is a fixed point.
inline SpectralDensity exact_density(const HermitianOperator& h, const QuantumState& psi0,
                                     double t) {
  if (psi0.dim() != h.dim())
    throw std::invalid_argument("exact_density: dimension mismatch");
  if (!psi0.is_unit()) throw std::invalid_argument("exact_density: psi0 must be a unit state");
  return SpectralDensity(h, h.eigenvectors().adjoint() * psi0.amplitudes(), t);
}

namespace detail {
inline void check_projector(const Eigen::MatrixXcd& proj, Eigen::Index dim,
                            const Tolerances& tols) {
  if (proj.rows() != dim || proj.cols() != dim)
    throw std::invalid_argument("projector has wrong dimension");
  if ((proj - proj.adjoint()).cwiseAbs().maxCoeff() > tols.projector)
    throw std::invalid_argument("projector is not Hermitian");
  const double idem = (proj * proj - proj).cwiseAbs().maxCoeff();
  if (idem > tols.projector)
    throw std::invalid_argument("projector is not idempotent (||P^2-P|| = " +
                                std::to_string(idem) + ")");
}

inline double clamp_probability(double p, const char* where) {
  if (p < -1e-10)
    throw NumericalError(std::string(where) + ": probability " + std::to_string(p) +
                         " below -1e-10");
  return std::clamp(p, 0.0, 1.0);
}
}  // namespace detail

/// Tr[Pi rho_t] for an orthogonal projector given in the computational basis.
inline double projected_probability(const SpectralDensity& rho, const Eigen::MatrixXcd& proj,
                                    const Tolerances& tols = default_tolerances()) {
  detail::check_projector(proj, rho.op().dim(), tols);
  const Eigen::MatrixXcd& v = rho.op().eigenvectors();
  const Eigen::MatrixXcd rotated = v.adjoint() * proj * v;
  const Eigen::Index d = rho.op().dim();
  double p = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      p += (rotated(i, j) * rho.coefficients()[j] * std::conj(rho.coefficients()[i])).real() *
           rho.damping(i, j);
  return detail::clamp_probability(p, "projected_probability");
}

/// Same trace against a diagonal 0/1 projector (mask in the computational
/// basis). Cost O(|mask| d^2) instead of the dense O(d^3) rotation.
inline double projected_probability_masked(const SpectralDensity& rho, const Eigen::VectorXd& mask) {
  const Eigen::Index d = rho.op().dim();
  if (mask.size() != d) throw std::invalid_argument("projector mask has wrong dimension");
  const Eigen::MatrixXcd& v = rho.op().eigenvectors();
  const Eigen::VectorXd& lam = rho.op().eigenvalues();
  const double t = rho.time();
  double p = 0;
  for (Eigen::Index x = 0; x < d; ++x) {
    if (mask[x] == 0.0) continue;
    if (mask[x] != 1.0)
      throw std::invalid_argument("projector mask entries must be 0 or 1");
    // b_i = V_{x i} c_i; rho_xx picks up the pairwise damping factors.
    const Eigen::VectorXcd b = v.row(x).transpose().array() * rho.coefficients().array();
    for (Eigen::Index i = 0; i < d; ++i) {
      p += std::norm(b[i]);
      for (Eigen::Index j = i + 1; j < d; ++j) {
        const double gap = lam[i] - lam[j];
        p += 2.0 * (b[i] * std::conj(b[j])).real() * std::exp(-t * gap * gap);
      }
    }
  }
  return detail::clamp_probability(p, "projected_probability");
}

/// <psi0| e^{-tH^2} Pi e^{-tH^2} |psi0>, the imaginary-time lower bound on
/// Tr[Pi rho_t].
inline double imaginary_time_bound(const HermitianOperator& h, const QuantumState& psi0,
                                   const Eigen::MatrixXcd& proj, double t,
                                   const Tolerances& tols = default_tolerances()) {
  if (t < 0) throw std::invalid_argument("imaginary_time_bound: t must be nonnegative");
  detail::check_projector(proj, h.dim(), tols);
  const QuantumState damped =
      apply_matrix_function(h, [t](double l) { return std::exp(-t * l * l); }, psi0);
  const Eigen::VectorXcd projected = proj * damped.amplitudes();
  const double p = damped.amplitudes().dot(projected).real();
  return detail::clamp_probability(p, "imaginary_time_bound");
}

struct MonteCarloEstimate {
  double value = 0;
  double std_error = 0;
  long samples = 0;
};

/// Sample mean of <psi_tau| Pi |psi_tau> over tau = sqrt(2t) z, with the
/// plain standard error of the mean.
inline MonteCarloEstimate monte_carlo_probability(const HermitianOperator& h,
                                                  const QuantumState& psi0,
                                                  const Eigen::MatrixXcd& proj, double t,
                                                  long samples, RngStream& rng,
                                                  const Tolerances& tols = default_tolerances()) {
  if (samples < 1) throw std::invalid_argument("monte_carlo_probability: samples >= 1 required");
  detail::check_projector(proj, h.dim(), tols);
  const Eigen::MatrixXcd& v = h.eigenvectors();
  const Eigen::MatrixXcd rotated = v.adjoint() * proj * v;  // once, then O(d^2) per sample
  const Eigen::VectorXcd coeffs = v.adjoint() * psi0.amplitudes();
  double mean = 0, m2 = 0;
  for (long k = 0; k < samples; ++k) {
    const double tau = sample_evolution_time(t, rng);
    Eigen::VectorXcd evolved(coeffs.size());
    for (Eigen::Index i = 0; i < coeffs.size(); ++i)
      evolved[i] = std::exp(Complex(0, -h.eigenvalues()[i] * tau)) * coeffs[i];
    const double p = evolved.dot(rotated * evolved).real();
    const double delta = p - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (p - mean);
  }
  MonteCarloEstimate est;
  est.value = mean;
  est.samples = samples;
  est.std_error = samples > 1 ? std::sqrt(m2 / static_cast<double>(samples - 1) /
                                          static_cast<double>(samples))
                              : 0.0;
  return est;
}

/// Uniform ancilla grid carrying the discretized Gaussian
/// psi_g(z) = e^{-z^2/4} / (2 pi)^{1/4}, trapezoid weights folded into the
/// amplitudes so they form a unit vector.
struct AncillaGrid {
  double half_width;        // L
  int point_count;          // N, odd
  double spacing;           // dz = 2L/(N-1)
  Eigen::VectorXd z;        // grid points
  Eigen::VectorXd amplitude;  // sqrt(w_k) psi_g(z_k), exactly normalized

  static AncillaGrid regular(double half_width = 10.0, int point_count = 2049) {
    if (half_width < 8.0)
      throw std::invalid_argument("AncillaGrid: half-width below 8 standard deviations");
    if (point_count < 9 || point_count % 2 == 0)
      throw std::invalid_argument("AncillaGrid: point count must be odd and at least 9");
    AncillaGrid g;
    g.half_width = half_width;
    g.point_count = point_count;
    g.spacing = 2.0 * half_width / (point_count - 1);
    g.z = Eigen::VectorXd::LinSpaced(point_count, -half_width, half_width);
    g.amplitude.resize(point_count);
    const double norm_const = std::pow(2.0 * M_PI, -0.25);
    for (int k = 0; k < point_count; ++k) {
      const double w = (k == 0 || k == point_count - 1) ? 0.5 * g.spacing : g.spacing;
      g.amplitude[k] = std::sqrt(w) * norm_const * std::exp(-g.z[k] * g.z[k] / 4.0);
    }
    const double sq = g.amplitude.squaredNorm();
    if (std::abs(sq - 1.0) > 1e-8)
      throw NumericalError("AncillaGrid: quadrature norm " + std::to_string(sq) +
                           " too far from 1");
    g.amplitude /= std::sqrt(sq);
    return g;
  }
};

/// Grid points required so the phase step sqrt(2t) ||H|| dz stays resolved
/// (dz <= pi / (4 sqrt(2t) ||H||)).
inline int required_grid_points(double half_width, double t, double h_norm) {
  const double scale = std::sqrt(2.0 * t) * h_norm;
  if (scale == 0) return 9;
  const double dz_max = M_PI / (4.0 * scale);
  int n = static_cast<int>(std::ceil(2.0 * half_width / dz_max)) + 1;
  if (n % 2 == 0) ++n;
  return std::max(n, 9);
}

struct AncillaOutcome {
  QuantumState state;         // post-selected, normalized first-register state
  double success_probability;  // post-selection probability on the grid
  double target_probability;   // <psi0| e^{-2tH^2} |psi0>
  double fidelity;             // |<state | normalized e^{-tH^2} psi0>|
  bool degenerate;             // post-selection probability below 1e-12
};

/// Hubbard-Stratonovich simulation on the ancilla grid: build psi0 (x) psi_g,
/// evolve by e^{-i sqrt(2t) H z} pointwise in z, project the ancilla back
/// onto psi_g. The post-selection probability targets <psi0|e^{-2tH^2}|psi0>
/// and the surviving first-register state targets e^{-tH^2} psi0.
inline AncillaOutcome ancilla_evolve(const HermitianOperator& h, const QuantumState& psi0,
                                     double t, const AncillaGrid& grid) {
  if (psi0.dim() != h.dim()) throw std::invalid_argument("ancilla_evolve: dimension mismatch");
  if (t < 0) throw std::invalid_argument("ancilla_evolve: t must be nonnegative");
  const double scale = std::sqrt(2.0 * t) * h.spectral_norm();
  if (scale > 0 && grid.spacing > M_PI / (4.0 * scale))
    throw std::invalid_argument(
        "ancilla_evolve: grid too coarse to resolve the phase oscillation; need at least " +
        std::to_string(required_grid_points(grid.half_width, t, h.spectral_norm())) +
        " points at half-width " + std::to_string(grid.half_width));

  const Eigen::MatrixXcd& v = h.eigenvectors();
  const Eigen::VectorXcd coeffs = v.adjoint() * psi0.amplitudes();
  const Eigen::Index d = h.dim();

  // Ancilla overlap after evolution: per eigenvalue, the discretized
  // Hubbard-Stratonovich integral sum_k |g_k|^2 e^{-i sqrt(2t) lambda z_k}.
  Eigen::VectorXcd post(d);
  const double omega_scale = std::sqrt(2.0 * t);
  for (Eigen::Index i = 0; i < d; ++i) {
    Complex acc(0, 0);
    const double omega = omega_scale * h.eigenvalues()[i];
    for (int k = 0; k < grid.point_count; ++k) {
      const double g2 = grid.amplitude[k] * grid.amplitude[k];
      acc += g2 * std::exp(Complex(0, -omega * grid.z[k]));
    }
    post[i] = coeffs[i] * acc;
  }

  AncillaOutcome out{QuantumState::subnormalized(Eigen::VectorXcd::Zero(d)), 0, 0, 0, false};
  out.success_probability = post.squaredNorm();
  Eigen::VectorXcd target(d);
  for (Eigen::Index i = 0; i < d; ++i)
    target[i] = coeffs[i] * std::exp(-t * h.eigenvalues()[i] * h.eigenvalues()[i]);
  out.target_probability = target.squaredNorm();

  if (out.success_probability < 1e-12) {
    out.degenerate = true;
    return out;
  }
  const Eigen::VectorXcd normalized = post / post.norm();
  out.fidelity = std::abs(Eigen::VectorXcd(target / target.norm()).dot(normalized));
  out.state = QuantumState::unit(v * normalized);
  out.degenerate = false;
  return out;
}

/// || Pi_M e^{(D^2 - I) t} psi0 ||^2: the classical fast-forwarding lower
/// bound on the marked-measurement probability of rho_t.
inline double fast_forward_bound(const Discriminant& disc, const QuantumState& psi0,
                                 const MarkedSet& marked, double t) {
  if (psi0.dim() != disc.dim())
    throw std::invalid_argument("fast_forward_bound: dimension mismatch");
  marked.validate(static_cast<int>(disc.dim()));
  const Eigen::VectorXcd evolved = disc.apply_heat(t, Eigen::VectorXcd(psi0.amplitudes()), 2);
  double p = 0;
  for (int x : marked.members()) p += std::norm(evolved[x]);
  return detail::clamp_probability(p, "fast_forward_bound");
}

/// Projector overload for callers that do not work with marked sets.
inline double fast_forward_bound(const Discriminant& disc, const QuantumState& psi0,
                                 const Eigen::MatrixXcd& proj, double t,
                                 const Tolerances& tols = default_tolerances()) {
  if (psi0.dim() != disc.dim())
    throw std::invalid_argument("fast_forward_bound: dimension mismatch");
  detail::check_projector(proj, disc.dim(), tols);
  const Eigen::VectorXcd evolved = disc.apply_heat(t, Eigen::VectorXcd(psi0.amplitudes()), 2);
  return detail::clamp_probability((proj * evolved).squaredNorm(), "fast_forward_bound");
}

}  // namespace ctqw
