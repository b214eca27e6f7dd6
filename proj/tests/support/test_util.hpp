#pragma once

// Shared helpers for the test suites: deterministic random instances and
// independent oracles (Pade matrix exponential, brute-force constructions)
// kept apart from the library's own spectral code paths.

#include <complex>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ctqw/markov.hpp"
#include "ctqw/rng.hpp"
#include "ctqw/spectral.hpp"

namespace ctqw::testing {

inline Eigen::MatrixXd random_real_matrix(int rows, int cols, RngStream& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Eigen::MatrixXcd random_complex_matrix(int rows, int cols, RngStream& rng) {
  Eigen::MatrixXcd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = Complex(rng.normal(), rng.normal());
  return m;
}

inline Eigen::MatrixXcd random_hermitian(int dim, RngStream& rng, double scale = 1.0) {
  const Eigen::MatrixXcd a = random_complex_matrix(dim, dim, rng);
  return scale * 0.5 * (a + a.adjoint());
}

inline Eigen::VectorXcd random_unit_vector(int dim, RngStream& rng) {
  Eigen::VectorXcd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = Complex(rng.normal(), rng.normal());
  return v / v.norm();
}

inline Eigen::VectorXd random_real_unit_vector(int dim, RngStream& rng) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v / v.norm();
}

/// Rank-r orthogonal projector from the Q factor of a random matrix.
inline Eigen::MatrixXcd random_projector(int dim, int rank, RngStream& rng) {
  const Eigen::MatrixXcd a = random_complex_matrix(dim, dim, rng);
  const Eigen::MatrixXcd q = Eigen::HouseholderQR<Eigen::MatrixXcd>(a).householderQ();
  const Eigen::MatrixXcd cols = q.leftCols(rank);
  return cols * cols.adjoint();
}

/// Random ergodic reversible chain: a weighted path backbone guarantees
/// irreducibility, one self-loop guarantees aperiodicity, extra random
/// edges diversify the spectrum.
inline MarkovChain random_reversible_chain(int n, RngStream& rng, double edge_prob = 0.4) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) w(i, i + 1) = w(i + 1, i) = rng.uniform(0.5, 1.5);
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (rng.bernoulli(edge_prob)) w(i, j) = w(j, i) = rng.uniform(0.2, 1.0);
  w(0, 0) = 0.3;
  return MarkovChain::from_weighted_graph(w);
}

/// Pade-based matrix exponentials (independent of the library's spectral
/// evolution route).
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) { return a.exp(); }
inline Eigen::MatrixXcd expm(const Eigen::MatrixXcd& a) { return a.exp(); }

struct RunningStats {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

}  // namespace ctqw::testing
