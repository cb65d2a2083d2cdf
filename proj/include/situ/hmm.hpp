#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "situ/demos.hpp"
#include "situ/error.hpp"

namespace situ {

inline constexpr double kCovarianceFloor = 1e-4;
inline constexpr std::size_t kMinStates = 2;
inline constexpr std::size_t kMaxStates = 10;
/// Furthest forward jump a left-to-right state may take (one skipped state).
inline constexpr std::size_t kMaxJump = 2;

/// splitmix64 finalizer; used to derive independent seeds from ids.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Left-to-right HMM with diagonal Gaussian emissions over relative
/// keyframe features. Each hidden state stands for one underlying keyframe.
struct GaussianHMM {
  std::vector<double> initial;
  std::vector<std::vector<double>> transitions;
  std::vector<Point4> means;
  std::vector<Point4> variances;

  std::size_t states() const { return means.size(); }

  friend bool operator==(const GaussianHMM&, const GaussianHMM&) = default;
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

inline double log_emission(const Point4& mean, const Point4& var, const Point4& x) {
  constexpr double log_two_pi = 1.8378770664093453;
  double acc = 0.0;
  for (std::size_t d = 0; d < 4; ++d) {
    const double diff = x[d] - mean[d];
    acc += -0.5 * (log_two_pi + std::log(var[d]) + diff * diff / var[d]);
  }
  return acc;
}

using Table = std::vector<std::vector<double>>;

struct LogModel {
  std::vector<double> log_initial;
  Table log_trans;
};

inline LogModel log_model(const GaussianHMM& hmm) {
  LogModel m;
  const std::size_t k = hmm.states();
  m.log_initial.resize(k);
  m.log_trans.assign(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    m.log_initial[i] = safe_log(hmm.initial[i]);
    for (std::size_t j = 0; j < k; ++j) m.log_trans[i][j] = safe_log(hmm.transitions[i][j]);
  }
  return m;
}

inline Table emission_table(const GaussianHMM& hmm, const Trajectory& obs) {
  Table b(obs.size(), std::vector<double>(hmm.states()));
  for (std::size_t t = 0; t < obs.size(); ++t)
    for (std::size_t k = 0; k < hmm.states(); ++k)
      b[t][k] = log_emission(hmm.means[k], hmm.variances[k], obs[t]);
  return b;
}

inline Table forward(const LogModel& m, const Table& logb) {
  const std::size_t n = logb.size(), k = m.log_initial.size();
  Table alpha(n, std::vector<double>(k, kNegInf));
  for (std::size_t s = 0; s < k; ++s) alpha[0][s] = m.log_initial[s] + logb[0][s];
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = kNegInf;
      for (std::size_t i = 0; i < k; ++i) acc = log_sum_exp(acc, alpha[t - 1][i] + m.log_trans[i][j]);
      alpha[t][j] = acc + logb[t][j];
    }
  }
  return alpha;
}

inline Table backward(const LogModel& m, const Table& logb) {
  const std::size_t n = logb.size(), k = m.log_initial.size();
  Table beta(n, std::vector<double>(k, 0.0));
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t i = 0; i < k; ++i) {
      double acc = kNegInf;
      for (std::size_t j = 0; j < k; ++j)
        acc = log_sum_exp(acc, m.log_trans[i][j] + logb[t + 1][j] + beta[t + 1][j]);
      beta[t][i] = acc;
    }
  }
  return beta;
}

inline double total(const std::vector<double>& row) {
  double acc = kNegInf;
  for (double v : row) acc = log_sum_exp(acc, v);
  return acc;
}

inline void normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  for (double& x : v) x /= s;
}

/// Uniform temporal partition of every trajectory into k chunks.
inline GaussianHMM partition_init(const std::vector<Trajectory>& data, std::size_t k) {
  GaussianHMM h;
  h.initial.assign(k, 0.0);
  h.initial[0] = 1.0;
  std::vector<double> count(k, 0.0), self(k, 0.0), next(k, 0.0);
  std::vector<Point4> sum(k, Point4{}), sq(k, Point4{});
  for (const auto& traj : data) {
    const std::size_t n = traj.size();
    std::size_t prev = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t s = t * k / n;
      count[s] += 1.0;
      for (std::size_t d = 0; d < 4; ++d) {
        sum[s][d] += traj[t][d];
        sq[s][d] += traj[t][d] * traj[t][d];
      }
      if (t > 0) (s == prev ? self[prev] : next[prev]) += 1.0;
      prev = s;
    }
  }
  h.means.resize(k);
  h.variances.resize(k);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t d = 0; d < 4; ++d) {
      const double mu = sum[s][d] / count[s];
      h.means[s][d] = mu;
      h.variances[s][d] = std::max(sq[s][d] / count[s] - mu * mu, kCovarianceFloor);
    }
  }
  constexpr double pseudo = 0.01;
  h.transitions.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    if (i + 1 == k) {
      h.transitions[i][i] = 1.0;
      continue;
    }
    h.transitions[i][i] = self[i] + pseudo;
    h.transitions[i][i + 1] = next[i] + pseudo;
    if (i + 2 < k) h.transitions[i][i + 2] = pseudo;
    normalize(h.transitions[i]);
  }
  return h;
}

}  // namespace detail

/// log p(trajectory | hmm) by the forward recursion in log space.
inline double log_likelihood(const GaussianHMM& hmm, const Trajectory& traj) {
  if (traj.empty()) throw InvalidInput("log_likelihood: empty trajectory");
  if (hmm.states() == 0) throw InvalidInput("log_likelihood: empty model");
  const auto m = detail::log_model(hmm);
  const auto alpha = detail::forward(m, detail::emission_table(hmm, traj));
  return detail::total(alpha.back());
}

struct FitOptions {
  double tolerance = 1e-4;
  std::size_t max_iterations = 100;
};

struct FitReport {
  GaussianHMM hmm;
  /// Total training log-likelihood evaluated at the start of each iteration.
  std::vector<double> log_likelihoods;
};

/// Number of hidden states for a set of segments: the lower median keyframe
/// count, clamped to [kMinStates, kMaxStates].
inline std::size_t state_count_for(const std::vector<std::size_t>& keyframe_counts) {
  if (keyframe_counts.empty()) return kMinStates;
  auto v = keyframe_counts;
  std::sort(v.begin(), v.end());
  return std::clamp(v[(v.size() - 1) / 2], kMinStates, kMaxStates);
}

/// Baum-Welch training with left-to-right structure and a variance floor.
inline FitReport fit_policy_report(const std::vector<Trajectory>& data, std::optional<std::size_t> k = {},
                                   const FitOptions& opts = {}) {
  if (data.empty()) throw InvalidInput("fit_policy: no trajectories");
  std::size_t longest = 0, points = 0;
  std::vector<std::size_t> lengths;
  for (const auto& t : data) {
    if (t.empty()) throw InvalidInput("fit_policy: empty trajectory");
    longest = std::max(longest, t.size());
    points += t.size();
    lengths.push_back(t.size());
  }
  std::size_t states = k ? *k : state_count_for(lengths);
  if (states == 0) throw InvalidInput("fit_policy: zero states requested");
  // Every chunk of the initial partition must receive at least one point.
  states = std::min({states, longest, points});

  FitReport rep;
  GaussianHMM h = detail::partition_init(data, states);
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    const auto m = detail::log_model(h);
    std::vector<double> init_acc(states, 0.0), gamma_sum(states, 0.0);
    detail::Table xi_sum(states, std::vector<double>(states, 0.0));
    std::vector<Point4> wsum(states, Point4{}), wsq(states, Point4{});
    double ll = 0.0;
    for (const auto& traj : data) {
      const auto logb = detail::emission_table(h, traj);
      const auto alpha = detail::forward(m, logb);
      const auto beta = detail::backward(m, logb);
      const double seq_ll = detail::total(alpha.back());
      ll += seq_ll;
      for (std::size_t t = 0; t < traj.size(); ++t) {
        for (std::size_t s = 0; s < states; ++s) {
          const double g = std::exp(alpha[t][s] + beta[t][s] - seq_ll);
          if (t == 0) init_acc[s] += g;
          gamma_sum[s] += g;
          for (std::size_t d = 0; d < 4; ++d) {
            wsum[s][d] += g * traj[t][d];
            wsq[s][d] += g * traj[t][d] * traj[t][d];
          }
        }
        if (t + 1 < traj.size()) {
          for (std::size_t i = 0; i < states; ++i)
            for (std::size_t j = i; j < std::min(states, i + kMaxJump + 1); ++j)
              if (m.log_trans[i][j] != detail::kNegInf)
                xi_sum[i][j] += std::exp(alpha[t][i] + m.log_trans[i][j] + logb[t + 1][j] + beta[t + 1][j] - seq_ll);
        }
      }
    }
    rep.log_likelihoods.push_back(ll);
    if (iter > 0 && ll - prev < opts.tolerance) break;
    prev = ll;

    GaussianHMM next = h;
    for (std::size_t s = 0; s < states; ++s) next.initial[s] = init_acc[s] / static_cast<double>(data.size());
    for (std::size_t i = 0; i < states; ++i) {
      double row = 0.0;
      for (double v : xi_sum[i]) row += v;
      if (row > 0.0)
        for (std::size_t j = 0; j < states; ++j) next.transitions[i][j] = xi_sum[i][j] / row;
      if (gamma_sum[i] > 1e-300) {
        for (std::size_t d = 0; d < 4; ++d) {
          const double mu = wsum[i][d] / gamma_sum[i];
          next.means[i][d] = mu;
          next.variances[i][d] = std::max(wsq[i][d] / gamma_sum[i] - mu * mu, kCovarianceFloor);
        }
      }
    }
    h = std::move(next);
  }
  rep.hmm = std::move(h);
  return rep;
}

inline GaussianHMM fit_policy(const std::vector<Trajectory>& data, std::optional<std::size_t> k = {},
                              const FitOptions& opts = {}) {
  return fit_policy_report(data, k, opts).hmm;
}

namespace detail {

inline std::size_t draw(const std::vector<double>& probs, double u) {
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace detail

/// One Gaussian draw per hidden state entered; self-loops are not repeated,
/// so the path walks forward until the last state (or a dead end).
inline Trajectory sample_keyframes(const GaussianHMM& hmm, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t k = hmm.states();
  Trajectory out;
  std::size_t s = detail::draw(hmm.initial, unif(rng));
  for (;;) {
    Point4 p{};
    for (std::size_t d = 0; d < 4; ++d) p[d] = hmm.means[s][d] + std::sqrt(hmm.variances[s][d]) * normal(rng);
    out.push_back(p);
    if (s + 1 >= k) break;
    std::vector<double> fwd(k, 0.0);
    double mass = 0.0;
    for (std::size_t j = s + 1; j < k; ++j) {
      fwd[j] = hmm.transitions[s][j];
      mass += fwd[j];
    }
    if (mass <= 0.0) break;
    s = detail::draw(fwd, unif(rng) * mass);
  }
  return out;
}

struct DistanceOptions {
  std::size_t num_sequences = 32;
};

/// Monte-Carlo KL rate D(a || b) from sequences sampled out of `a`.
inline double kl_rate(const GaussianHMM& a, const GaussianHMM& b, std::uint64_t seed, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory o = sample_keyframes(a, mix_seed(seed, i));
    acc += (log_likelihood(a, o) - log_likelihood(b, o)) / static_cast<double>(o.size());
  }
  return acc / static_cast<double>(n);
}

/// Symmetrized KL rate; `seed_a` drives the sequences drawn from `a`,
/// `seed_b` those from `b`. Clamped below at zero.
inline double hmm_distance(const GaussianHMM& a, const GaussianHMM& b, std::uint64_t seed_a, std::uint64_t seed_b,
                           const DistanceOptions& opts = {}) {
  if (opts.num_sequences == 0) throw InvalidInput("hmm_distance: num_sequences must be positive");
  const double d = 0.5 * (kl_rate(a, b, seed_a, opts.num_sequences) + kl_rate(b, a, seed_b, opts.num_sequences));
  return std::max(0.0, d);
}

inline double hmm_distance(const GaussianHMM& a, const GaussianHMM& b, std::uint64_t seed,
                           const DistanceOptions& opts = {}) {
  return hmm_distance(a, b, mix_seed(seed, 0), mix_seed(seed, 1), opts);
}

}  // namespace situ
