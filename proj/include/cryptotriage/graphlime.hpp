#pragma once

// Local feature attribution for a scored node (GraphLIME): HSIC Lasso over the
// node's ego network, regressing the centered Gram matrix of anomaly scores on
// per-feature centered Gram matrices with a non-negative L1 penalty.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cryptotriage/error.hpp"
#include "cryptotriage/graph_store.hpp"

namespace cryptotriage {

inline constexpr std::size_t kMinNeighborhood = 5;

struct KernelStack {
  std::vector<std::string> feature_names;
  std::vector<Eigen::MatrixXd> feature_kernels;  // centered, Frobenius-normalized
  std::vector<bool> active;                      // false for degenerate features (zero kernel)
  std::vector<double> feature_bandwidths;
  Eigen::MatrixXd output_kernel;                 // centered, Frobenius-normalized (or zero)
  double output_bandwidth = 1.0;

  std::size_t size() const noexcept { return feature_kernels.size(); }
  Eigen::Index n() const noexcept { return output_kernel.rows(); }
};

/// Median of |v_i − v_j| over distinct pairs, 1.0 when that median is zero.
inline double median_pairwise_distance(std::span<const double> v) {
  std::vector<double> d;
  d.reserve(v.size() * (v.size() - 1) / 2);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) d.push_back(std::abs(v[i] - v[j]));
  }
  if (d.empty()) return 1.0;
  const auto mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median > 0.0 ? median : 1.0;
}

namespace detail {

/// Gaussian Gram matrix, double-centered (H K H) and scaled to unit Frobenius norm.
/// Returns nullopt when the input is constant or the centered matrix vanishes.
inline std::optional<Eigen::MatrixXd> centered_gaussian_gram(std::span<const double> v, double sigma) {
  const auto n = static_cast<Eigen::Index>(v.size());
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return std::nullopt;
  Eigen::MatrixXd k(n, n);
  const double denom = 2.0 * sigma * sigma;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double diff = v[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)];
      k(i, j) = std::exp(-diff * diff / denom);
    }
  }
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand = k.mean();
  k.colwise() -= row_mean;
  k.rowwise() -= col_mean;
  k.array() += grand;
  const double norm = k.norm();
  if (!(norm > 1e-12)) return std::nullopt;
  return k / norm;
}

}  // namespace detail

/// Builds the kernel stack from raw features (n x F) and scores restricted to a neighborhood.
inline KernelStack build_kernels(const Eigen::MatrixXd& features, std::span<const double> scores,
                                 std::vector<std::string> names, std::size_t min_n = kMinNeighborhood) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n < min_n) {
    throw TriageError(Errc::insufficient_neighborhood, "insufficient-neighborhood: n=" + std::to_string(n) +
                                                           ", minimum " + std::to_string(min_n));
  }
  if (scores.size() != n || names.size() != static_cast<std::size_t>(features.cols())) {
    throw TriageError(Errc::dimension_mismatch, "build_kernels: inconsistent sizes");
  }
  KernelStack stack;
  stack.feature_names = std::move(names);
  const auto zero = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index f = 0; f < features.cols(); ++f) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = features(static_cast<Eigen::Index>(i), f);
    const double sigma = median_pairwise_distance(col);
    stack.feature_bandwidths.push_back(sigma);
    if (auto k = detail::centered_gaussian_gram(col, sigma)) {
      stack.feature_kernels.push_back(std::move(*k));
      stack.active.push_back(true);
    } else {
      stack.feature_kernels.emplace_back(zero);
      stack.active.push_back(false);
    }
  }
  stack.output_bandwidth = median_pairwise_distance(scores);
  if (auto l = detail::centered_gaussian_gram(scores, stack.output_bandwidth)) {
    stack.output_kernel = std::move(*l);
  } else {
    stack.output_kernel = zero;
  }
  return stack;
}

/// Features and scores of the ego members, in member order.
inline KernelStack build_kernels(const TransactionGraph& g, const EgoNetwork& ego, std::span<const double> scores,
                                 std::size_t min_n = kMinNeighborhood) {
  if (scores.size() != g.node_count()) throw TriageError(Errc::dimension_mismatch, "one score per node required");
  const auto n = static_cast<Eigen::Index>(ego.members.size());
  const auto f = static_cast<Eigen::Index>(g.feature_schema().size());
  Eigen::MatrixXd x(n, f);
  std::vector<double> s(ego.members.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto v = ego.members[static_cast<std::size_t>(r)];
    const auto& feats = g.node(v).features;
    for (Eigen::Index c = 0; c < f; ++c) x(r, c) = feats[static_cast<std::size_t>(c)];
    s[static_cast<std::size_t>(r)] = scores[v];
  }
  return build_kernels(x, s, g.feature_schema(), min_n);
}

struct HsicLassoResult {
  std::vector<double> beta;
  bool converged = false;
  int sweeps = 0;
  double rho = 0.0;
  std::vector<double> objective_trace;  // objective after each sweep, starting with β = 0
};

/// Sufficient statistics: c_k = <K̄_k, L̄>, G_kj = <K̄_k, K̄_j>, ||L̄||².
struct HsicGram {
  Eigen::VectorXd c;
  Eigen::MatrixXd g;
  double output_norm_sq = 0.0;
};

inline HsicGram hsic_gram(const KernelStack& stack) {
  const auto p = static_cast<Eigen::Index>(stack.size());
  HsicGram out;
  out.c.resize(p);
  out.g.resize(p, p);
  out.output_norm_sq = stack.output_kernel.squaredNorm();
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto& kk = stack.feature_kernels[static_cast<std::size_t>(k)];
    out.c(k) = kk.cwiseProduct(stack.output_kernel).sum();
    for (Eigen::Index j = k; j < p; ++j) {
      out.g(k, j) = out.g(j, k) = kk.cwiseProduct(stack.feature_kernels[static_cast<std::size_t>(j)]).sum();
    }
  }
  return out;
}

/// ½||vec(L̄) − Σ β_k vec(K̄_k)||² + ρ Σ β_k, expanded through the Gram statistics.
inline double hsic_objective(const HsicGram& gram, std::span<const double> beta, double rho) {
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(), static_cast<Eigen::Index>(beta.size()));
  return 0.5 * gram.output_norm_sq - gram.c.dot(b) + 0.5 * b.dot(gram.g * b) + rho * b.sum();
}

/// Cyclic coordinate descent for the non-negative lasso in Gram form.
inline HsicLassoResult solve_hsic_lasso(const HsicGram& gram, const std::vector<bool>& active, double rho,
                                        double tol, int max_iter) {
  if (!(rho >= 0.0)) throw TriageError(Errc::validation, "rho must be >= 0");
  const auto p = static_cast<std::size_t>(gram.c.size());
  HsicLassoResult result;
  result.rho = rho;
  result.beta.assign(p, 0.0);
  auto& beta = result.beta;
  std::vector<double> best = beta;
  double best_obj = hsic_objective(gram, beta, rho);
  result.objective_trace.push_back(best_obj);
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    double max_delta = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      if (!active[k]) continue;
      const auto ki = static_cast<Eigen::Index>(k);
      const double gkk = gram.g(ki, ki);
      if (!(gkk > 0.0)) continue;
      double cross = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        if (j != k) cross += beta[j] * gram.g(ki, static_cast<Eigen::Index>(j));
      }
      const double updated = std::max(0.0, (gram.c(ki) - rho - cross) / gkk);
      max_delta = std::max(max_delta, std::abs(updated - beta[k]));
      beta[k] = updated;
    }
    result.sweeps = sweep + 1;
    const double obj = hsic_objective(gram, beta, rho);
    result.objective_trace.push_back(obj);
    if (obj <= best_obj) {
      best_obj = obj;
      best = beta;
    }
    if (max_delta < tol) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged) beta = best;
  return result;
}

inline HsicLassoResult hsic_lasso(const KernelStack& stack, double rho, double tol = 1e-6, int max_iter = 10000) {
  return solve_hsic_lasso(hsic_gram(stack), stack.active, rho, tol, max_iter);
}

// ---------------------------------------------------------------------------
// Per-node explanation

struct ExplainerConfig {
  int k = 1;
  int k_max = 3;
  std::size_t min_neighbors = kMinNeighborhood;
  double rho_ratio = 0.1;             // ρ = rho_ratio · max_k c_k
  std::optional<double> rho_absolute;  // overrides rho_ratio when set
  double tol = 1e-6;
  int max_iter = 10000;
};

/// "%.3e" rendering used in prompts and persisted explanations, e.g. "9.941e-01".
inline std::string format_weight(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", value);
  return buf;
}

struct ExplanationWeights {
  std::string node_id;
  std::vector<std::pair<std::string, double>> weights;  // schema order
  int k_used = 0;
  std::size_t n_neighbors = 0;
  double rho = 0.0;
  bool converged = false;
  std::string reason;  // set for degenerate explanations

  std::optional<double> get(std::string_view name) const {
    for (const auto& [n, w] : weights) {
      if (n == name) return w;
    }
    return std::nullopt;
  }

  bool all_zero() const {
    return std::all_of(weights.begin(), weights.end(), [](const auto& w) { return w.second == 0.0; });
  }

  /// Weights divided by the largest one (all zero stays all zero).
  std::vector<std::pair<std::string, double>> max_normalized() const {
    double top = 0.0;
    for (const auto& [_, w] : weights) top = std::max(top, w);
    auto out = weights;
    if (top > 0.0) {
      for (auto& [_, w] : out) w /= top;
    }
    return out;
  }

  /// Top-m by descending weight; equal weights keep their stored order.
  std::vector<std::pair<std::string, double>> top(std::size_t m) const {
    auto sorted = weights;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (sorted.size() > m) sorted.resize(m);
    return sorted;
  }
};

inline ExplanationWeights explain_node(const TransactionGraph& g, std::span<const double> scores, NodeIndex node,
                                       const ExplainerConfig& config = {}) {
  if (node >= g.node_count()) throw TriageError(Errc::unknown_node, "unknown node index " + std::to_string(node));
  if (scores.size() != g.node_count()) throw TriageError(Errc::dimension_mismatch, "one score per node required");
  ExplanationWeights out;
  out.node_id = g.node(node).address;
  for (const auto& name : g.feature_schema()) out.weights.emplace_back(name, 0.0);

  int k = std::max(1, config.k);
  const int k_max = std::max(k, config.k_max);
  auto ego = ego_network(g, node, k);
  while (ego.size() < config.min_neighbors && k < k_max) ego = ego_network(g, node, ++k);
  out.k_used = k;
  out.n_neighbors = ego.size();
  if (ego.size() < config.min_neighbors) {
    out.converged = false;
    out.reason = "insufficient-neighborhood: " + std::to_string(ego.size()) + " nodes within k=" +
                 std::to_string(k) + ", minimum " + std::to_string(config.min_neighbors);
    return out;
  }

  const auto stack = build_kernels(g, ego, scores, config.min_neighbors);
  const auto gram = hsic_gram(stack);
  double rho = 0.0;
  if (config.rho_absolute) {
    rho = *config.rho_absolute;
  } else {
    const double max_c = gram.c.size() > 0 ? gram.c.maxCoeff() : 0.0;
    rho = config.rho_ratio * std::max(0.0, max_c);
  }
  const auto solved = solve_hsic_lasso(gram, stack.active, rho, config.tol, config.max_iter);
  out.rho = rho;
  out.converged = solved.converged;
  for (std::size_t f = 0; f < solved.beta.size(); ++f) out.weights[f].second = solved.beta[f];
  if (!solved.converged) out.reason = "coordinate descent did not converge in " + std::to_string(config.max_iter) + " sweeps";
  return out;
}

inline nlohmann::ordered_json to_json(const ExplanationWeights& w) {
  nlohmann::ordered_json doc;
  doc["node_id"] = w.node_id;
  doc["k_used"] = w.k_used;
  doc["n_neighbors"] = w.n_neighbors;
  doc["rho"] = w.rho;
  doc["converged"] = w.converged;
  auto& weights = doc["weights"] = nlohmann::ordered_json::object();
  auto& raw = doc["weights_raw"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : w.weights) {
    weights[name] = format_weight(value);
    raw[name] = value;
  }
  auto& normalized = doc["weights_max_normalized"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : w.max_normalized()) normalized[name] = format_weight(value);
  if (!w.reason.empty()) doc["reason"] = w.reason;
  return doc;
}

inline ExplanationWeights explanation_from_json(const nlohmann::ordered_json& doc) {
  try {
    ExplanationWeights w;
    w.node_id = doc.at("node_id").get<std::string>();
    w.k_used = doc.at("k_used").get<int>();
    w.n_neighbors = doc.at("n_neighbors").get<std::size_t>();
    w.rho = doc.at("rho").get<double>();
    w.converged = doc.at("converged").get<bool>();
    const auto& source = doc.contains("weights_raw") ? doc.at("weights_raw") : doc.at("weights");
    for (const auto& [name, value] : source.items()) {
      const double v = value.is_string() ? std::stod(value.get<std::string>()) : value.get<double>();
      w.weights.emplace_back(name, v);
    }
    if (doc.contains("reason")) w.reason = doc.at("reason").get<std::string>();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw TriageError(Errc::parse, std::string("explanation document: ") + e.what());
  }
}

}  // namespace cryptotriage
