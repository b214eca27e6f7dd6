#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctqw/common.hpp"
#include "ctqw/gaussian.hpp"
#include "ctqw/markov.hpp"
#include "ctqw/rng.hpp"
#include "ctqw/walker.hpp"

namespace ctqw {

/// Normalized coherent encoding of the stationary distribution restricted to
/// the unmarked nodes: the post-measurement state of the preparation step.
inline QuantumState sqrt_pi_unmarked(const MarkovChain& chain, const MarkedSet& m) {
  m.validate(chain.size());
  if (m.empty() || static_cast<int>(m.size()) == chain.size())
    throw std::invalid_argument("sqrt_pi_unmarked: need a proper nonempty marked set");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(chain.size());
  for (int x : m.complement(chain.size())) v[x] = std::sqrt(chain.stationary()[x]);
  v /= v.norm();
  return QuantumState::from_real(v);
}

/// Interpolation-parameter grid {1 - 1/r : r = 1, ..., base^ceil(log_base T)}.
/// T below 1 clamps to the single-point grid {0}.
struct InterpolationSchedule {
  double horizon = 1;         // T
  std::vector<double> grid;   // always contains s = 0

  static InterpolationSchedule for_time(double t, int log_base = 2) {
    if (t <= 0) throw std::invalid_argument("InterpolationSchedule: T must be positive");
    if (log_base < 2) throw std::invalid_argument("InterpolationSchedule: base must be >= 2");
    const double exponent = std::max(0.0, std::ceil(std::log(t) / std::log(log_base)));
    const auto size = static_cast<long>(std::llround(std::pow(log_base, exponent)));
    InterpolationSchedule sched;
    sched.horizon = t;
    sched.grid.reserve(size);
    for (long r = 1; r <= size; ++r) sched.grid.push_back(1.0 - 1.0 / static_cast<double>(r));
    return sched;
  }
};

/// Draw (s, T) for Algorithm 1: T = c_T * HT and s uniform on the grid.
inline std::pair<double, double> sample_schedule(double ht_estimate, double c_t,
                                                 RngStream& rng, int log_base = 2) {
  if (ht_estimate <= 0 || c_t <= 0)
    throw std::invalid_argument("sample_schedule: HT estimate and c_T must be positive");
  const double horizon = c_t * ht_estimate;
  const auto sched = InterpolationSchedule::for_time(horizon, log_base);
  const double s = sched.grid[rng.uniform_index(sched.grid.size())];
  return {s, horizon};
}

struct SearchOutcome {
  bool found = false;
  std::optional<int> node;       // empty when the reference state is measured
  double elapsed_evolution_time = 0;  // sum of |tau| over rounds
  int rounds = 0;
  std::optional<double> s;       // of the last round's evolution (empty if none ran)
  double horizon = 0;            // T
};

/// Shared (chain, M) -> per-s walk Hamiltonian cache. Grid values repeat
/// across rounds and trials, and each build carries an eigendecomposition,
/// so sharing one cache is what keeps repeated searches affordable.
class WalkHamiltonianCache {
 public:
  WalkHamiltonianCache(MarkovChain base, MarkedSet m)
      : base_(std::move(base)), marked_(std::move(m)) {}

  const WalkHamiltonian& at(double s) {
    auto it = built_.find(s);
    if (it == built_.end())
      it = built_.emplace(s, WalkHamiltonian(interpolate(base_, marked_, s).chain())).first;
    return it->second;
  }

  const MarkovChain& base() const { return base_; }
  const MarkedSet& marked() const { return marked_; }
  std::size_t size() const { return built_.size(); }

 private:
  MarkovChain base_;
  MarkedSet marked_;
  std::map<double, WalkHamiltonian> built_;
};

struct SearchOptions {
  int full_space_cap = 60;  // node count beyond which the (n+1)^2 space is refused
  int log_base = 2;
};

namespace detail {
inline void check_searchable(const MarkovChain& chain, const MarkedSet& m,
                             const SearchOptions& opts, bool require_lazy) {
  m.validate(chain.size());
  if (m.empty() || static_cast<int>(m.size()) == chain.size())
    throw std::invalid_argument("search: need a proper nonempty marked set");
  if (!chain.has_stationary() || !chain.reversible())
    throw std::invalid_argument("search: chain must be ergodic and reversible");
  if (require_lazy && !chain.lazy())
    throw std::invalid_argument("search: chain must be lazy (apply make_lazy first)");
  if (chain.size() > opts.full_space_cap)
    throw std::invalid_argument(
        "search: node count " + std::to_string(chain.size()) + " exceeds the full-space cap " +
        std::to_string(opts.full_space_cap) +
        "; use expected_bound_over_schedule for the n x n bound path instead");
}
}  // namespace detail

/// One round of the spatial-search algorithm: prepare sqrt(pi)|0>, measure
/// the marked projector (Bernoulli with probability pi(M)), otherwise evolve
/// sqrt(pi_U)|0> under H_{P(s)} for the Gaussian random time and measure the
/// first register in the node basis.
inline SearchOutcome run_search(const MarkovChain& chain, const MarkedSet& m, double horizon,
                                RngStream& rng, WalkHamiltonianCache* cache = nullptr,
                                const SearchOptions& opts = SearchOptions{}) {
  detail::check_searchable(chain, m, opts, /*require_lazy=*/true);
  if (horizon < 0) throw std::invalid_argument("run_search: negative T");

  SearchOutcome out;
  out.rounds = 1;
  out.horizon = horizon;

  // Step 2: the projective measurement on |sqrt(pi)> succeeds with pi(M).
  const double p_marked = chain.stationary_mass(m);
  if (rng.bernoulli(p_marked)) {
    Eigen::VectorXd weights = Eigen::VectorXd::Zero(chain.size());
    for (int x : m.members()) weights[x] = chain.stationary()[x];
    out.node = static_cast<int>(rng.categorical(weights));
    out.found = true;
    return out;
  }

  // Steps 3-4: random (s, tau), evolve, measure the first register.
  const QuantumState psi_u = sqrt_pi_unmarked(chain, m);
  double s = 0;
  double tau = 0;
  if (horizon > 0) {
    const auto sched = InterpolationSchedule::for_time(horizon, opts.log_base);
    s = sched.grid[rng.uniform_index(sched.grid.size())];
    tau = sample_evolution_time(horizon, rng);
  }
  out.s = s;
  out.elapsed_evolution_time = std::abs(tau);

  Eigen::VectorXd marginal;
  if (tau == 0.0) {
    // No evolution: the second register stays |0>, the first register
    // carries |psi_U|^2 (no marked mass).
    marginal = Eigen::VectorXd::Zero(chain.size() + 1);
    for (int x = 0; x < chain.size(); ++x)
      marginal[x + 1] = std::norm(psi_u.amplitudes()[x]);
  } else {
    std::optional<WalkHamiltonianCache> local;
    if (cache == nullptr) {
      local.emplace(chain, m);
      cache = &*local;
    }
    const WalkHamiltonian& walk = cache->at(s);
    marginal = first_register_distribution(walk.evolve_edge_state(psi_u, tau));
  }
  const auto idx = rng.categorical(marginal);
  if (idx > 0) out.node = static_cast<int>(idx) - 1;
  out.found = out.node.has_value() && m.contains(*out.node);
  return out;
}

/// Exact step-3/4 statistics at fixed (T, s): Tr[(Pi_M (x) I) rho_T] for the
/// Gaussian-random-time mixture of e^{-i H_{P(s)} tau} (sqrt(pi_U) (x) |0>).
inline double exact_success_probability(const MarkovChain& chain, const MarkedSet& m,
                                        double horizon, double s,
                                        WalkHamiltonianCache* cache = nullptr,
                                        const SearchOptions& opts = SearchOptions{}) {
  detail::check_searchable(chain, m, opts, /*require_lazy=*/false);
  if (horizon < 0) throw std::invalid_argument("exact_success_probability: negative T");
  if (s < 0 || s >= 1)
    throw std::invalid_argument("exact_success_probability: s must lie in [0,1)");

  std::optional<WalkHamiltonianCache> local;
  if (cache == nullptr) {
    local.emplace(chain, m);
    cache = &*local;
  }
  const WalkHamiltonian& walk = cache->at(s);
  const QuantumState psi_u = sqrt_pi_unmarked(chain, m);
  const auto rho =
      exact_density(walk.hermitian(), QuantumState::unit(walk.embed(psi_u)), horizon);
  const int reg = chain.size() + 1;
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(walk.dim());
  for (int x : m.members())
    mask.segment(static_cast<Eigen::Index>(x + 1) * reg, reg).setOnes();
  return projected_probability_masked(rho, mask);
}

/// Exact average of the fast-forwarding bound over the schedule grid:
/// E_s || Pi_M e^{(D^2(s) - I) T} |sqrt(pi_U)> ||^2. Works in the n x n node
/// space only, so it scales past the full-space cap.
inline double expected_bound_over_schedule(const MarkovChain& chain, const MarkedSet& m,
                                           double horizon, int log_base = 2) {
  m.validate(chain.size());
  if (m.empty() || static_cast<int>(m.size()) == chain.size())
    throw std::invalid_argument("expected_bound_over_schedule: need a proper marked set");
  const QuantumState psi_u = sqrt_pi_unmarked(chain, m);
  const auto sched = InterpolationSchedule::for_time(horizon, log_base);
  double acc = 0;
  for (double s : sched.grid) {
    const Discriminant disc(interpolate(chain, m, s).chain());
    acc += fast_forward_bound(disc, psi_u, m, horizon);
  }
  return acc / static_cast<double>(sched.grid.size());
}

/// Independent repetitions of run_search with fresh (s, tau) each round and
/// a fixed T = c_T * HT. max_rounds <= 0 selects ceil(log_2^2 T).
inline SearchOutcome repeat_until_found(const MarkovChain& chain, const MarkedSet& m,
                                        double c_t, int max_rounds, RngStream& rng,
                                        WalkHamiltonianCache* cache = nullptr,
                                        const SearchOptions& opts = SearchOptions{},
                                        double ht_estimate = 0) {
  detail::check_searchable(chain, m, opts, /*require_lazy=*/true);
  const double ht = ht_estimate > 0 ? ht_estimate : hitting_time(chain, m);
  const double horizon = c_t * ht;
  if (max_rounds <= 0) {
    const double lg = std::log2(std::max(horizon, 2.0));
    max_rounds = static_cast<int>(std::ceil(lg * lg));
  }
  std::optional<WalkHamiltonianCache> local;
  if (cache == nullptr) {
    local.emplace(chain, m);
    cache = &*local;
  }
  SearchOutcome total;
  total.horizon = horizon;
  for (int round = 0; round < max_rounds; ++round) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(round));
    SearchOutcome one = run_search(chain, m, horizon, sub, cache, opts);
    total.rounds += 1;
    total.elapsed_evolution_time += one.elapsed_evolution_time;
    if (one.s) total.s = one.s;
    if (one.found) {
      total.found = true;
      total.node = one.node;
      break;
    }
  }
  return total;
}

/// Empirical hitting time of the discrete walk started from pi (repeated
/// absorbing-walk application, counting steps until a marked node).
inline MonteCarloEstimate classical_baseline(const MarkovChain& chain, const MarkedSet& m,
                                             long trials, RngStream& rng) {
  m.validate(chain.size());
  if (m.empty()) throw std::invalid_argument("classical_baseline: empty marked set");
  if (trials < 1) throw std::invalid_argument("classical_baseline: trials >= 1 required");
  double mean = 0, m2 = 0;
  for (long k = 0; k < trials; ++k) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(k));
    int node = static_cast<int>(sub.categorical(chain.stationary()));
    long steps = 0;
    while (!m.contains(node)) {
      node = static_cast<int>(sub.categorical(chain.transition().row(node).transpose()));
      ++steps;
    }
    const double x = static_cast<double>(steps);
    const double delta = x - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (x - mean);
  }
  MonteCarloEstimate est;
  est.value = mean;
  est.samples = trials;
  est.std_error = trials > 1 ? std::sqrt(m2 / static_cast<double>(trials - 1) /
                                         static_cast<double>(trials))
                             : 0.0;
  return est;
}

/// ---- Scaling experiments ----------------------------------------------

enum class MarkedRule { SingleNodeZero, Fraction };

struct ScalingRow {
  std::string family;
  int n = 0;
  double hitting = 0;        // HT of the lazy chain
  double horizon = 0;        // T = c_T * HT
  long s_grid_size = 0;
  double bound_mean = 0;     // expected_bound_over_schedule
  double quantum_time = 0;   // expected evolution time per round, 2 sqrt(T/pi)
  double classical_time = 0; // HT
  std::uint64_t seed = 0;
};

inline MarkedSet pick_marked(const MarkovChain& chain, MarkedRule rule, double fraction,
                             RngStream& rng) {
  if (rule == MarkedRule::SingleNodeZero) return MarkedSet({0});
  const int n = chain.size();
  const int count = std::max(1, static_cast<int>(std::floor(fraction * n)));
  if (count >= n) throw std::invalid_argument("pick_marked: fraction marks every node");
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  // partial Fisher-Yates draw of `count` distinct nodes
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(n - i));
    std::swap(all[i], all[j]);
  }
  return MarkedSet(std::vector<int>(all.begin(), all.begin() + count));
}

/// Per size: lazy chain, HT, T = c_T * HT, schedule grid size, mean bound
/// over the grid, per-round quantum time 2 sqrt(T/pi) and classical time HT.
/// Uses the n x n bound path throughout, so sizes beyond the full-space cap
/// are fine.
inline std::vector<ScalingRow> scaling_experiment(GraphFamily family,
                                                  const std::vector<int>& sizes, double c_t,
                                                  MarkedRule rule, double fraction,
                                                  std::uint64_t seed, int log_base = 2) {
  if (sizes.empty()) throw std::invalid_argument("scaling_experiment: no sizes");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1])
      throw std::invalid_argument("scaling_experiment: sizes must be ascending");
  std::vector<ScalingRow> rows;
  rows.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto chain = make_lazy(generate(family, sizes[i]));
    RngStream rng(seed, i);
    const MarkedSet m = pick_marked(chain, rule, fraction, rng);
    ScalingRow row;
    row.family = family_name(family);
    row.n = chain.size();
    row.hitting = hitting_time(chain, m);
    row.horizon = c_t * row.hitting;
    row.s_grid_size =
        static_cast<long>(InterpolationSchedule::for_time(row.horizon, log_base).grid.size());
    row.bound_mean = expected_bound_over_schedule(chain, m, row.horizon, log_base);
    row.quantum_time = 2.0 * std::sqrt(row.horizon / M_PI);
    row.classical_time = row.hitting;
    row.seed = seed;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ctqw
