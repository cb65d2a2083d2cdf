#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "situ/demos.hpp"
#include "situ/error.hpp"

namespace situ {

struct ClassifierOptions {
  double l2 = 1e-2;
  double tolerance = 1e-6;
  std::size_t max_iterations = 500;
  /// Lower bound on the per-feature standardisation scale, in feature units.
  /// Keeps near-constant features from being blown up into large weights.
  double min_scale = 0.05;
};

/// Logistic-regression initiation classifier. The stored samples are the
/// full training provenance; refitting from them reproduces the weights.
struct InitiationClassifier {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<WorldState> positives;
  std::vector<WorldState> negatives;
  bool degenerate = false;

  friend bool operator==(const InitiationClassifier&, const InitiationClassifier&) = default;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Full-batch gradient descent on the averaged, L2-regularised logistic loss.
/// Features are standardised internally and the result folded back into raw
/// feature space.
inline InitiationClassifier fit_classifier(std::vector<WorldState> positives, std::vector<WorldState> negatives,
                                           const ClassifierOptions& opts = {}) {
  if (positives.empty()) throw InvalidInput("fit_classifier: no positive samples");
  const std::size_t n = positives.front().dim();
  for (const auto* set : {&positives, &negatives})
    for (const auto& s : *set)
      if (s.dim() != n) throw InvalidInput("fit_classifier: feature dimension mismatch");

  InitiationClassifier c;
  c.weights.assign(n, 0.0);
  c.positives = std::move(positives);
  c.negatives = std::move(negatives);
  if (c.negatives.empty()) {
    c.degenerate = true;
    return c;
  }

  std::vector<const std::vector<double>*> xs;
  std::vector<double> ys;
  for (const auto& s : c.positives) xs.push_back(&s.features), ys.push_back(1.0);
  for (const auto& s : c.negatives) xs.push_back(&s.features), ys.push_back(0.0);
  const double m = static_cast<double>(xs.size());

  std::vector<double> mean(n, 0.0), scale(n, 0.0);
  for (const auto* x : xs)
    for (std::size_t j = 0; j < n; ++j) mean[j] += (*x)[j] / m;
  for (const auto* x : xs)
    for (std::size_t j = 0; j < n; ++j) scale[j] += ((*x)[j] - mean[j]) * ((*x)[j] - mean[j]) / m;
  for (auto& s : scale) s = std::max(std::sqrt(s), opts.min_scale);

  std::vector<std::vector<double>> z(xs.size(), std::vector<double>(n));
  double max_sq = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double sq = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      z[i][j] = ((*xs[i])[j] - mean[j]) / scale[j];
      sq += z[i][j] * z[i][j];
    }
    max_sq = std::max(max_sq, sq);
  }
  const double step = 1.0 / (0.25 * max_sq + opts.l2);

  std::vector<double> w(n, 0.0), grad(n);
  double b = 0.0;
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      double a = b;
      for (std::size_t j = 0; j < n; ++j) a += w[j] * z[i][j];
      const double r = (sigmoid(a) - ys[i]) / m;
      for (std::size_t j = 0; j < n; ++j) grad[j] += r * z[i][j];
      gb += r;
    }
    double norm = gb * gb;
    for (std::size_t j = 0; j < n; ++j) {
      grad[j] += opts.l2 * w[j];
      norm += grad[j] * grad[j];
    }
    if (std::sqrt(norm) < opts.tolerance) break;
    for (std::size_t j = 0; j < n; ++j) w[j] -= step * grad[j];
    b -= step * gb;
  }

  c.bias = b;
  for (std::size_t j = 0; j < n; ++j) {
    c.weights[j] = w[j] / scale[j];
    c.bias -= w[j] * mean[j] / scale[j];
  }
  return c;
}

inline double predict_proba(const InitiationClassifier& c, const WorldState& s) {
  if (c.degenerate) return 1.0;
  if (s.dim() != c.weights.size()) throw InvalidInput("predict_proba: feature dimension mismatch");
  double a = c.bias;
  for (std::size_t j = 0; j < s.dim(); ++j) a += c.weights[j] * s.features[j];
  return sigmoid(a);
}

inline bool is_activated(const InitiationClassifier& c, const WorldState& s, double threshold = 0.5) {
  return predict_proba(c, s) >= threshold;
}

/// Appends new samples (exact duplicates dropped) and refits on the union.
inline InitiationClassifier update_classifier(const InitiationClassifier& c, const std::vector<WorldState>& new_pos,
                                              const std::vector<WorldState>& new_neg,
                                              const ClassifierOptions& opts = {}) {
  auto add = [](std::vector<WorldState>& into, const std::vector<WorldState>& from) {
    bool changed = false;
    for (const auto& s : from)
      if (std::find(into.begin(), into.end(), s) == into.end()) into.push_back(s), changed = true;
    return changed;
  };
  auto pos = c.positives;
  auto neg = c.negatives;
  const bool changed = add(pos, new_pos) | add(neg, new_neg);
  if (!changed) return c;
  return fit_classifier(std::move(pos), std::move(neg), opts);
}

}  // namespace situ
