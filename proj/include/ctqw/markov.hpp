#pragma once

#include <algorithm>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctqw/common.hpp"
#include "ctqw/rng.hpp"

namespace ctqw {

/// Subset of node indices. May be empty in general; search-facing operations
/// additionally require a proper nonempty subset.
class MarkedSet {
 public:
  MarkedSet() = default;
  explicit MarkedSet(std::vector<int> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    if (!members_.empty() && members_.front() < 0)
      throw std::invalid_argument("MarkedSet: negative node index");
  }

  const std::vector<int>& members() const { return members_; }
  bool empty() const { return members_.empty(); }
  std::size_t size() const { return members_.size(); }
  bool contains(int x) const {
    return std::binary_search(members_.begin(), members_.end(), x);
  }

  void validate(int n) const {
    if (!members_.empty() && members_.back() >= n)
      throw std::invalid_argument("MarkedSet: node index " + std::to_string(members_.back()) +
                                  " out of range for n=" + std::to_string(n));
  }

  std::vector<int> complement(int n) const {
    validate(n);
    std::vector<int> out;
    out.reserve(n - members_.size());
    for (int x = 0; x < n; ++x)
      if (!contains(x)) out.push_back(x);
    return out;
  }

 private:
  std::vector<int> members_;
};

namespace detail {

inline void check_row_stochastic(const Eigen::MatrixXd& p, double tol) {
  if (p.rows() != p.cols()) throw std::invalid_argument("transition matrix must be square");
  if (p.rows() < 1) throw std::invalid_argument("transition matrix must be nonempty");
  if (p.minCoeff() < -tol)
    throw std::invalid_argument("transition matrix has negative entries");
  for (Eigen::Index x = 0; x < p.rows(); ++x) {
    const double s = p.row(x).sum();
    if (std::abs(s - 1.0) > tol)
      throw std::invalid_argument("row " + std::to_string(x) + " sums to " + std::to_string(s) +
                                  ", not 1 within tolerance");
  }
}

/// Strong connectivity of the support digraph via forward+backward closure.
/// Returns the set of nodes not reachable from node 0 (forward pass), or not
/// co-reachable, empty when irreducible.
inline std::vector<int> unreachable_nodes(const Eigen::MatrixXd& p) {
  const int n = static_cast<int>(p.rows());
  auto bfs = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double w = forward ? p(u, v) : p(v, u);
        if (w > 0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return seen;
  };
  const auto fwd = bfs(true);
  const auto bwd = bfs(false);
  std::vector<int> missing;
  for (int v = 0; v < n; ++v)
    if (!fwd[v] || !bwd[v]) missing.push_back(v);
  return missing;
}

/// Aperiodicity for an irreducible chain: immediate if any self-loop exists,
/// otherwise the gcd of (dist[u] + 1 - dist[v]) over support edges u->v.
inline bool is_aperiodic(const Eigen::MatrixXd& p) {
  const int n = static_cast<int>(p.rows());
  for (int x = 0; x < n; ++x)
    if (p(x, x) > 0) return true;
  std::vector<int> dist(n, -1);
  std::vector<int> queue{0};
  dist[0] = 0;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const int u = queue[qi];
    for (int v = 0; v < n; ++v) {
      if (p(u, v) > 0 && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  long g = 0;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (p(u, v) > 0) g = std::gcd(g, static_cast<long>(dist[u] + 1 - dist[v]));
  return std::abs(g) == 1;
}

inline std::vector<std::string> default_labels(int n) {
  std::vector<std::string> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = std::to_string(i);
  return labels;
}

}  // namespace detail

/// Row-stochastic transition matrix with a cached stationary distribution.
/// States are column vectors internally, so the row-vector conventions
/// v_{t+1} = v_t P become v_{t+1} = P^T v_t; every operation below that
/// quotes a textbook row form applies the transpose accordingly.
///
/// Reversibility is checked whenever a stationary distribution is available;
/// ergodic non-reversible chains are rejected. Chains without a unique
/// stationary distribution (the absorbing walk) carry no cached pi.
class MarkovChain {
 public:
  /// Walk on a weighted undirected graph: p_xy = w_xy / sum_z w_xz with
  /// pi_x proportional to the row sum. Reversible by construction.
  static MarkovChain from_weighted_graph(const Eigen::MatrixXd& weights,
                                         const Tolerances& tols = default_tolerances()) {
    if (weights.rows() != weights.cols())
      throw std::invalid_argument("from_weighted_graph: weights must be square");
    const int n = static_cast<int>(weights.rows());
    if (n < 1) throw std::invalid_argument("from_weighted_graph: empty graph");
    if (weights.minCoeff() < 0)
      throw std::invalid_argument("from_weighted_graph: negative weight");
    if ((weights - weights.transpose()).cwiseAbs().maxCoeff() > tols.row_sum)
      throw std::invalid_argument("from_weighted_graph: weights must be symmetric");
    const Eigen::VectorXd degree = weights.rowwise().sum();
    for (int x = 0; x < n; ++x)
      if (degree[x] <= 0)
        throw std::invalid_argument("from_weighted_graph: node " + std::to_string(x) +
                                    " is isolated (zero row sum)");
    Eigen::MatrixXd p = degree.cwiseInverse().asDiagonal() * weights;
    Eigen::VectorXd pi = degree / degree.sum();
    return MarkovChain(std::move(p), std::move(pi), detail::default_labels(n), tols);
  }

  /// Construct from an explicit transition matrix. Requires an ergodic,
  /// reversible chain; the stationary distribution is computed and cached.
  static MarkovChain from_transition_matrix(Eigen::MatrixXd p,
                                            const Tolerances& tols = default_tolerances());

  /// Internal factory for chains whose stationary distribution is known in
  /// closed form (lazy transform, interpolation). Still validated.
  static MarkovChain with_stationary(Eigen::MatrixXd p, Eigen::VectorXd pi,
                                     std::vector<std::string> labels,
                                     const Tolerances& tols = default_tolerances()) {
    return MarkovChain(std::move(p), std::move(pi), std::move(labels), tols);
  }

  /// Row-stochastic chain without a unique stationary distribution (the
  /// absorbing walk). Only stochasticity is checked.
  static MarkovChain without_stationary(Eigen::MatrixXd p, std::vector<std::string> labels,
                                        const Tolerances& tols = default_tolerances()) {
    detail::check_row_stochastic(p, tols.row_sum);
    MarkovChain chain;
    chain.p_ = std::move(p);
    chain.labels_ = labels.empty() ? detail::default_labels(static_cast<int>(chain.p_.rows()))
                                   : std::move(labels);
    chain.lazy_ = chain.derive_lazy(tols);
    chain.reversible_ = false;
    return chain;
  }

  int size() const { return static_cast<int>(p_.rows()); }
  const Eigen::MatrixXd& transition() const { return p_; }
  bool has_stationary() const { return pi_.size() > 0; }

  const Eigen::VectorXd& stationary() const {
    if (!has_stationary())
      throw std::logic_error("MarkovChain: no stationary distribution cached for this chain");
    return pi_;
  }

  bool lazy() const { return lazy_; }
  bool reversible() const { return reversible_; }
  const std::vector<std::string>& labels() const { return labels_; }

  MarkovChain relabeled(std::vector<std::string> labels) const {
    MarkovChain out = *this;
    if (static_cast<int>(labels.size()) != size())
      throw std::invalid_argument("relabeled: wrong label count");
    out.labels_ = std::move(labels);
    return out;
  }

  double stationary_mass(const MarkedSet& m) const {
    m.validate(size());
    double s = 0;
    for (int x : m.members()) s += stationary()[x];
    return s;
  }

 private:
  MarkovChain() = default;

  MarkovChain(Eigen::MatrixXd p, Eigen::VectorXd pi, std::vector<std::string> labels,
              const Tolerances& tols) {
    detail::check_row_stochastic(p, tols.row_sum);
    if (pi.size() != p.rows())
      throw std::invalid_argument("MarkovChain: stationary vector has wrong size");
    if (pi.minCoeff() <= 0 || std::abs(pi.sum() - 1.0) > 1e-10)
      throw std::invalid_argument("MarkovChain: stationary vector must be positive and sum to 1");
    p_ = std::move(p);
    pi_ = std::move(pi);
    labels_ = labels.empty() ? detail::default_labels(size()) : std::move(labels);
    lazy_ = derive_lazy(tols);
    const double db = detailed_balance_residual();
    if (db > tols.detailed_balance)
      throw std::invalid_argument("MarkovChain: detailed balance violated (residual " +
                                  std::to_string(db) + "); non-reversible chains are rejected");
    reversible_ = true;
  }

  bool derive_lazy(const Tolerances& tols) const {
    for (int x = 0; x < size(); ++x)
      if (std::abs(p_(x, x) - 0.5) > tols.row_sum) return false;
    return true;
  }

  double detailed_balance_residual() const {
    const Eigen::MatrixXd flow = pi_.asDiagonal() * p_;
    return (flow - flow.transpose()).cwiseAbs().maxCoeff();
  }

  Eigen::MatrixXd p_;
  Eigen::VectorXd pi_;  // empty when no unique stationary distribution
  std::vector<std::string> labels_;
  bool lazy_ = false;
  bool reversible_ = false;
};

/// Unique stationary distribution of an ergodic chain, computed from the
/// eigenvector of P^T at eigenvalue 1 (sign- and sum-normalized).
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p,
                                               const Tolerances& tols = default_tolerances()) {
  detail::check_row_stochastic(p, 1e-9);
  const auto missing = detail::unreachable_nodes(p);
  if (!missing.empty()) {
    std::string nodes;
    for (int v : missing) nodes += (nodes.empty() ? "" : ",") + std::to_string(v);
    throw std::invalid_argument("stationary_distribution: chain is reducible; nodes {" + nodes +
                                "} are not mutually reachable from node 0");
  }
  if (!detail::is_aperiodic(p))
    throw std::invalid_argument("stationary_distribution: chain is periodic, not ergodic");

  Eigen::EigenSolver<Eigen::MatrixXd> solver(p.transpose());
  if (solver.info() != Eigen::Success)
    throw NumericalError("stationary_distribution: eigensolver did not converge");
  Eigen::Index best = 0;
  int near_one = 0;
  double best_dist = 1e300;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double d = std::abs(solver.eigenvalues()[i] - std::complex<double>(1.0, 0.0));
    if (d < 1e-8) ++near_one;
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  if (best_dist > 1e-8)
    throw NumericalError("stationary_distribution: no eigenvalue near 1 (closest at distance " +
                         std::to_string(best_dist) + ")");
  if (near_one > 1)
    throw NumericalError("stationary_distribution: fixed point is not unique (" +
                         std::to_string(near_one) + " eigenvalues near 1)");

  // Rotate the possibly complex-scaled eigenvector onto the real axis.
  Eigen::VectorXcd raw = solver.eigenvectors().col(best);
  Eigen::Index imax = 0;
  raw.cwiseAbs().maxCoeff(&imax);
  raw *= std::conj(raw[imax]) / std::abs(raw[imax]);
  Eigen::VectorXd pi = raw.real();
  if (pi.sum() < 0) pi = -pi;
  if (pi.minCoeff() < -1e-10)
    throw NumericalError("stationary_distribution: fixed point has mixed signs");
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  const double residual = (p.transpose() * pi - pi).cwiseAbs().maxCoeff();
  if (residual > tols.spectral)
    throw NumericalError("stationary_distribution: residual ||pi P - pi|| = " +
                         std::to_string(residual));
  return pi;
}

inline Eigen::VectorXd stationary_distribution(const MarkovChain& chain,
                                               const Tolerances& tols = default_tolerances()) {
  return stationary_distribution(chain.transition(), tols);
}

inline MarkovChain MarkovChain::from_transition_matrix(Eigen::MatrixXd p,
                                                       const Tolerances& tols) {
  Eigen::VectorXd pi = stationary_distribution(p, tols);
  const int n = static_cast<int>(p.rows());
  return MarkovChain(std::move(p), std::move(pi), detail::default_labels(n), tols);
}

/// (I + P)/2. Keeps the stationary distribution, sets every self-loop to at
/// least 1/2. Not idempotent: applying it twice yields diagonal 3/4, and the
/// laziness flag (diagonal exactly 1/2) is derived from the matrix.
inline MarkovChain make_lazy(const MarkovChain& chain) {
  const int n = chain.size();
  Eigen::MatrixXd p = 0.5 * (Eigen::MatrixXd::Identity(n, n) + chain.transition());
  if (chain.has_stationary())
    return MarkovChain::with_stationary(std::move(p), chain.stationary(), chain.labels());
  return MarkovChain::without_stationary(std::move(p), chain.labels());
}

/// ---- Graph generators ------------------------------------------------
///
/// All families produce the unweighted simple-graph walk through
/// from_weighted_graph. Node labeling:
///   complete, cycle: nodes 0..n-1 (cycle edges join i and i+1 mod n).
///   torus2d:   side*side nodes, index = row*side + col, 4-neighbor wrap.
///   hypercube: 2^dim nodes, index = coordinate bitmask, edges flip one bit.
///   barbell:   two K_m cliques (0..m-1 and m..2m-1) bridged by (m-1, m).
enum class GraphFamily { Complete, Cycle, Torus2d, Hypercube, Barbell };

inline MarkovChain generate(GraphFamily family, int size) {
  if (size < 1 || (family != GraphFamily::Hypercube && size < 2))
    throw std::invalid_argument("generate: size too small for family");
  switch (family) {
    case GraphFamily::Complete: {
      Eigen::MatrixXd w = Eigen::MatrixXd::Ones(size, size);
      w.diagonal().setZero();
      return MarkovChain::from_weighted_graph(w);
    }
    case GraphFamily::Cycle: {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(size, size);
      for (int i = 0; i < size; ++i) {
        w(i, (i + 1) % size) = 1;
        w((i + 1) % size, i) = 1;
      }
      return MarkovChain::from_weighted_graph(w);
    }
    case GraphFamily::Torus2d: {
      const int n = size * size;
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
      auto id = [size](int r, int c) {
        return ((r + size) % size) * size + ((c + size) % size);
      };
      for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
          const int u = id(r, c);
          for (const auto& [dr, dc] : {std::pair{1, 0}, std::pair{-1, 0},
                                       std::pair{0, 1}, std::pair{0, -1}}) {
            const int v = id(r + dr, c + dc);
            if (v != u) w(u, v) = 1;
          }
        }
      }
      return MarkovChain::from_weighted_graph(w);
    }
    case GraphFamily::Hypercube: {
      const int n = 1 << size;
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
      for (int u = 0; u < n; ++u)
        for (int b = 0; b < size; ++b) w(u, u ^ (1 << b)) = 1;
      return MarkovChain::from_weighted_graph(w);
    }
    case GraphFamily::Barbell: {
      const int m = size;
      const int n = 2 * m;
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
      for (int u = 0; u < m; ++u)
        for (int v = 0; v < m; ++v)
          if (u != v) {
            w(u, v) = 1;
            w(m + u, m + v) = 1;
          }
      w(m - 1, m) = w(m, m - 1) = 1;
      return MarkovChain::from_weighted_graph(w);
    }
  }
  throw std::invalid_argument("generate: unknown family");
}

inline GraphFamily parse_family(const std::string& name) {
  if (name == "complete") return GraphFamily::Complete;
  if (name == "cycle") return GraphFamily::Cycle;
  if (name == "torus2d") return GraphFamily::Torus2d;
  if (name == "hypercube") return GraphFamily::Hypercube;
  if (name == "barbell") return GraphFamily::Barbell;
  throw std::invalid_argument("unknown graph family '" + name + "'");
}

inline std::string family_name(GraphFamily family) {
  switch (family) {
    case GraphFamily::Complete: return "complete";
    case GraphFamily::Cycle: return "cycle";
    case GraphFamily::Torus2d: return "torus2d";
    case GraphFamily::Hypercube: return "hypercube";
    case GraphFamily::Barbell: return "barbell";
  }
  return "?";
}

/// Parse a "family:size" spec such as "complete:32" or "torus2d:8".
inline MarkovChain chain_from_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("graph spec must look like 'family:size', got '" + spec + "'");
  const GraphFamily family = parse_family(spec.substr(0, colon));
  int size = 0;
  try {
    size = std::stoi(spec.substr(colon + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("bad size in graph spec '" + spec + "'");
  }
  return generate(family, size);
}

/// Absorbing walk P': rows indexed by M become identity rows, rows outside M
/// are unchanged. For nonempty proper M the result has no unique stationary
/// distribution and carries no cached pi.
inline MarkovChain absorbing_chain(const MarkovChain& chain, const MarkedSet& m) {
  m.validate(chain.size());
  if (m.empty()) return chain;
  Eigen::MatrixXd p = chain.transition();
  for (int x : m.members()) {
    p.row(x).setZero();
    p(x, x) = 1.0;
  }
  return MarkovChain::without_stationary(std::move(p), chain.labels());
}

/// pi(s) = ((1-s) pi_U, pi_M) / (1 - s (1 - p_M)) where p_M = pi(M).
inline Eigen::VectorXd interpolated_stationary(const MarkovChain& chain, const MarkedSet& m,
                                               double s) {
  m.validate(chain.size());
  if (s < 0.0 || s >= 1.0)
    throw std::invalid_argument("interpolated_stationary: need s in [0,1); P(1) is not ergodic");
  const Eigen::VectorXd& pi = chain.stationary();
  const double p_m = chain.stationary_mass(m);
  Eigen::VectorXd out = pi;
  for (int x = 0; x < chain.size(); ++x)
    if (!m.contains(x)) out[x] *= (1.0 - s);
  out /= 1.0 - s * (1.0 - p_m);
  return out;
}

/// Interpolated walk P(s) = (1-s) P + s P'. Ergodic and reversible for
/// s in [0,1) whenever the base chain is; s = 1 gives the absorbing walk.
class InterpolatedChain {
 public:
  InterpolatedChain(const MarkovChain& base, MarkedSet m, double s)
      : base_(base), marked_(std::move(m)), s_(s), chain_(build(base_, marked_, s_)) {}

  const MarkovChain& chain() const { return chain_; }
  const MarkovChain& base() const { return base_; }
  const MarkedSet& marked() const { return marked_; }
  double s() const { return s_; }

 private:
  static MarkovChain build(const MarkovChain& base, const MarkedSet& m, double s) {
    m.validate(base.size());
    if (s < 0.0 || s > 1.0) throw std::invalid_argument("interpolate: s must lie in [0,1]");
    Eigen::MatrixXd p =
        (1.0 - s) * base.transition() + s * absorbing_chain(base, m).transition();
    if (s < 1.0)
      return MarkovChain::with_stationary(std::move(p), interpolated_stationary(base, m, s),
                                          base.labels());
    return MarkovChain::without_stationary(std::move(p), base.labels());
  }

  MarkovChain base_;
  MarkedSet marked_;
  double s_;
  MarkovChain chain_;
};

inline InterpolatedChain interpolate(const MarkovChain& chain, const MarkedSet& m, double s) {
  return InterpolatedChain(chain, m, s);
}

/// Symmetric discriminant D_xy = sqrt(p_xy p_yx) with a cached
/// eigendecomposition. For reversible chains D shares P's spectrum and
/// sqrt(pi) is the eigenvalue-1 eigenvector.
class Discriminant {
 public:
  explicit Discriminant(const MarkovChain& chain,
                        const Tolerances& tols = default_tolerances())
      : Discriminant(chain.transition(), tols) {}

  explicit Discriminant(const Eigen::MatrixXd& p,
                        const Tolerances& tols = default_tolerances()) {
    d_ = (p.array() * p.transpose().array()).sqrt().matrix();
    d_ = 0.5 * (d_ + d_.transpose());  // exact symmetry
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(d_);
    if (solver.info() != Eigen::Success)
      throw NumericalError("Discriminant: eigensolver did not converge");
    const double residual =
        (d_ * solver.eigenvectors() - solver.eigenvectors() * solver.eigenvalues().asDiagonal())
            .cwiseAbs()
            .maxCoeff();
    if (residual > tols.eig_residual)
      throw NumericalError("Discriminant: decomposition residual " + std::to_string(residual));
    evals_ = solver.eigenvalues();
    evecs_ = solver.eigenvectors();
    if (evals_.minCoeff() < -1.0 - tols.spectral || evals_.maxCoeff() > 1.0 + tols.spectral)
      throw NumericalError("Discriminant: eigenvalue outside [-1, 1]");
  }

  Eigen::Index dim() const { return d_.rows(); }
  const Eigen::MatrixXd& matrix() const { return d_; }
  const Eigen::VectorXd& eigenvalues() const { return evals_; }
  const Eigen::MatrixXd& eigenvectors() const { return evecs_; }

  /// e^{t (D^power - I)} v via the cached decomposition, power in {1, 2}.
  /// t = 0 is the identity, returned without touching the decomposition.
  Eigen::VectorXd apply_heat(double t, const Eigen::VectorXd& v, int power = 2) const {
    if (power != 1 && power != 2)
      throw std::invalid_argument("Discriminant::apply_heat: power must be 1 or 2");
    if (t == 0.0) return v;
    Eigen::VectorXd coeffs = evecs_.transpose() * v;
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
      const double lam = power == 2 ? evals_[i] * evals_[i] : evals_[i];
      coeffs[i] *= std::exp(t * (lam - 1.0));
    }
    return evecs_ * coeffs;
  }

  Eigen::VectorXcd apply_heat(double t, const Eigen::VectorXcd& v, int power = 2) const {
    const Eigen::VectorXd re = apply_heat(t, Eigen::VectorXd(v.real()), power);
    const Eigen::VectorXd im = apply_heat(t, Eigen::VectorXd(v.imag()), power);
    using C = std::complex<double>;
    return re.cast<C>() + C(0, 1) * im.cast<C>();
  }

 private:
  Eigen::MatrixXd d_;
  Eigen::VectorXd evals_;
  Eigen::MatrixXd evecs_;
};

inline Discriminant discriminant(const MarkovChain& chain,
                                 const Tolerances& tols = default_tolerances()) {
  return Discriminant(chain, tols);
}

inline Discriminant discriminant(const InterpolatedChain& ic,
                                 const Tolerances& tols = default_tolerances()) {
  return Discriminant(ic.chain(), tols);
}

/// Expected hitting times h_x of M from each node, solving
/// (I - P_UU) h_U = 1 by first-step analysis; h = 0 on M.
inline Eigen::VectorXd hitting_times_from_nodes(const MarkovChain& chain, const MarkedSet& m) {
  m.validate(chain.size());
  if (m.empty()) throw std::invalid_argument("hitting_times: marked set must be nonempty");
  const auto u = m.complement(chain.size());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(chain.size());
  if (u.empty()) return h;
  const auto k = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd a(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      a(i, j) = (i == j ? 1.0 : 0.0) - chain.transition()(u[i], u[j]);
  const Eigen::VectorXd rhs = Eigen::VectorXd::Ones(k);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::VectorXd hu = lu.solve(rhs);
  const double residual = (a * hu - rhs).cwiseAbs().maxCoeff();
  if (!hu.allFinite() || residual > 1e-8)
    throw NumericalError("hitting_times: singular first-step system (residual " +
                         std::to_string(residual) + ")");
  for (Eigen::Index i = 0; i < k; ++i) h[u[i]] = hu[i];
  return h;
}

/// HT(P, M) = sum_{x in U} pi_x h_x; marked nodes contribute zero.
inline double hitting_time(const MarkovChain& chain, const MarkedSet& m) {
  const Eigen::VectorXd h = hitting_times_from_nodes(chain, m);
  return chain.stationary().dot(h);
}

/// Variant conditioned on starting unmarked: HT / pi(U).
inline double conditional_hitting_time(const MarkovChain& chain, const MarkedSet& m) {
  const double pu = 1.0 - chain.stationary_mass(m);
  if (pu <= 0) return 0.0;
  return hitting_time(chain, m) / pu;
}

/// ---- Continuous-time trajectories -------------------------------------

struct TrajectoryEntry {
  int node;
  double time;  // entry time of this visit
};

/// Jump conventions for the continuous-time chain with kernel Q = P - I.
/// RateOneWithSelfLoops: exponential rate-1 holding times, jumps drawn from
/// the full row of P (self-jumps recorded). HalfRateSkeleton: for lazy
/// chains only, rate-1/2 holding times and jumps on the self-loop-free
/// skeleton. Both generate the same law e^{(P-I)t}.
enum class CtJumpConvention { RateOneWithSelfLoops, HalfRateSkeleton };

inline std::vector<TrajectoryEntry> sample_ct_trajectory(
    const MarkovChain& chain, int start, double horizon, RngStream& rng,
    CtJumpConvention convention = CtJumpConvention::RateOneWithSelfLoops) {
  if (start < 0 || start >= chain.size())
    throw std::invalid_argument("sample_ct_trajectory: start node out of range");
  if (horizon < 0) throw std::invalid_argument("sample_ct_trajectory: negative horizon");

  double rate = 1.0;
  Eigen::MatrixXd jump = chain.transition();
  if (convention == CtJumpConvention::HalfRateSkeleton) {
    if (!chain.lazy())
      throw std::invalid_argument("HalfRateSkeleton convention requires a lazy chain");
    rate = 0.5;
    jump = 2.0 * chain.transition();
    jump.diagonal().setZero();
  }

  std::vector<TrajectoryEntry> traj{{start, 0.0}};
  double t = 0.0;
  int node = start;
  while (true) {
    t += rng.exponential(rate);
    if (t > horizon) break;
    node = static_cast<int>(rng.categorical(jump.row(node).transpose()));
    traj.push_back({node, t});
  }
  return traj;
}

/// State of a trajectory at time t (the last entry at or before t).
inline int node_at(const std::vector<TrajectoryEntry>& traj, double t) {
  int node = traj.front().node;
  for (const auto& e : traj) {
    if (e.time > t) break;
    node = e.node;
  }
  return node;
}

}  // namespace ctqw
