#pragma once

// Unsupervised graph autoencoder for wallet anomaly scoring.
//
//   H1 = relu(Â X W1)          encoder layer 1
//   Z  = Â H1 W2               encoder layer 2 (embeddings)
//   X̂  = Z W_dec               linear attribute decoder
//   p(i,j) = σ(z_i · z_j)      inner-product structure decoder
//
// Loss = mean_i ||x_i − x̂_i||²
//      + λ_s [ mean_edges −log p(i,j) + mean_non_edges −log(1 − p(i,j)) ]
//
// Gradients are derived by hand and applied with full-batch gradient descent.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cryptotriage/csv.hpp"
#include "cryptotriage/error.hpp"
#include "cryptotriage/graph_store.hpp"
#include "cryptotriage/hash.hpp"

namespace cryptotriage {

struct AnomalyHyperparams {
  int h1 = 32;
  int h2 = 16;
  double learning_rate = 0.01;
  int epochs = 200;
  double alpha = 0.7;  // attribute-error weight; at 0.5 an attribute-only outlier ties the structure-noise maximum
  double lambda_s = 1.0;
  double negative_sample_ratio = 1.0;
  std::uint64_t seed = 42;
  double quantile = 0.95;

  void validate() const {
    if (h1 < 1 || h2 < 1) throw TriageError(Errc::validation, "hidden sizes must be >= 1");
    if (!(learning_rate > 0.0)) throw TriageError(Errc::validation, "learning_rate must be > 0");
    if (epochs < 0) throw TriageError(Errc::validation, "epochs must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw TriageError(Errc::validation, "alpha must be in [0,1]");
    if (!(lambda_s >= 0.0)) throw TriageError(Errc::validation, "lambda_s must be >= 0");
    if (!(negative_sample_ratio >= 0.0)) {
      throw TriageError(Errc::validation, "negative_sample_ratio must be >= 0");
    }
    if (!(quantile > 0.0 && quantile < 1.0)) throw TriageError(Errc::validation, "quantile must be in (0,1)");
  }
};

inline std::string schema_hash(const std::vector<std::string>& schema) {
  std::string joined;
  for (const auto& name : schema) {
    joined += name;
    joined += '\n';
  }
  return sha256_hex(joined);
}

struct AnomalyModel {
  AnomalyHyperparams hyper;
  std::vector<std::string> schema;
  Eigen::MatrixXd w1;     // F x H1
  Eigen::MatrixXd w2;     // H1 x H2
  Eigen::MatrixXd w_dec;  // H2 x F
  std::vector<double> loss_trace;

  bool finite() const { return w1.allFinite() && w2.allFinite() && w_dec.allFinite(); }
};

/// Glorot-uniform initialization, filled row-major from a seeded generator.
inline AnomalyModel init_model(const std::vector<std::string>& schema, const AnomalyHyperparams& hyper) {
  hyper.validate();
  AnomalyModel model;
  model.hyper = hyper;
  model.schema = schema;
  std::mt19937_64 rng(hyper.seed);
  const auto fill = [&rng](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-s, s);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    }
  };
  const auto f = static_cast<Eigen::Index>(schema.size());
  fill(model.w1, f, hyper.h1);
  fill(model.w2, hyper.h1, hyper.h2);
  fill(model.w_dec, hyper.h2, f);
  return model;
}

struct ForwardPass {
  Eigen::MatrixXd ax;     // Â X
  Eigen::MatrixXd pre1;   // Â X W1
  Eigen::MatrixXd h1;     // relu(pre1)
  Eigen::MatrixXd ah1;    // Â H1
  Eigen::MatrixXd z;      // embeddings
  Eigen::MatrixXd x_hat;  // attribute reconstruction
};

inline ForwardPass forward(const AnomalyModel& model, const SparseMatrix& a_hat, const Eigen::MatrixXd& x) {
  if (a_hat.rows() != a_hat.cols() || a_hat.rows() != x.rows() || x.cols() != model.w1.rows() ||
      model.w1.cols() != model.w2.rows() || model.w2.cols() != model.w_dec.rows() ||
      model.w_dec.cols() != x.cols()) {
    throw TriageError(Errc::dimension_mismatch, "forward: inconsistent matrix dimensions");
  }
  ForwardPass fp;
  fp.ax = a_hat * x;
  fp.pre1 = fp.ax * model.w1;
  fp.h1 = fp.pre1.cwiseMax(0.0);
  fp.ah1 = a_hat * fp.h1;
  fp.z = fp.ah1 * model.w2;
  fp.x_hat = fp.z * model.w_dec;
  if (!fp.z.allFinite() || !fp.x_hat.allFinite()) {
    throw TriageError(Errc::divergence, "forward produced non-finite values");
  }
  return fp;
}

using NodePair = std::pair<NodeIndex, NodeIndex>;

struct PairSample {
  std::vector<NodePair> edges;
  std::vector<NodePair> non_edges;
};

namespace detail {

inline constexpr double kSigmoidClip = 1e-7;

inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

/// Pair loss and its derivative with respect to the logit z_i·z_j.
inline std::pair<double, double> pair_loss(double logit, bool is_edge) {
  const double raw = sigmoid(logit);
  const double p = std::clamp(raw, kSigmoidClip, 1.0 - kSigmoidClip);
  const bool clipped = p != raw;
  if (is_edge) return {-std::log(p), clipped ? 0.0 : raw - 1.0};
  return {-std::log(1.0 - p), clipped ? 0.0 : raw};
}

inline std::optional<NodeIndex> draw_non_neighbor(const TransactionGraph& g, NodeIndex i, std::mt19937_64& rng) {
  const auto n = g.node_count();
  if (g.degree(i) + 1 >= n) return std::nullopt;
  std::uniform_int_distribution<NodeIndex> pick(0, static_cast<NodeIndex>(n - 1));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto j = pick(rng);
    if (j != i && !g.adjacent(i, j)) return j;
  }
  return std::nullopt;
}

}  // namespace detail

/// Every undirected edge once (i < j) plus round(ratio·|E|) uniformly drawn non-edges.
inline PairSample sample_training_pairs(const TransactionGraph& g, double ratio, std::uint64_t seed) {
  PairSample sample;
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    for (const auto j : g.neighbors(i)) {
      if (i < j) sample.edges.emplace_back(i, j);
    }
  }
  const auto wanted = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(sample.edges.size())));
  if (wanted == 0 || g.node_count() < 2) return sample;
  std::mt19937_64 rng(seed ^ 0x5bd1e9955bd1e995ULL);
  std::uniform_int_distribution<NodeIndex> pick(0, static_cast<NodeIndex>(g.node_count() - 1));
  for (std::size_t attempt = 0; sample.non_edges.size() < wanted && attempt < 100 * wanted; ++attempt) {
    const auto i = pick(rng);
    if (auto j = detail::draw_non_neighbor(g, i, rng)) sample.non_edges.emplace_back(i, *j);
  }
  return sample;
}

struct LossBreakdown {
  double attribute = 0.0;
  double structure = 0.0;
  double total = 0.0;
};

inline LossBreakdown loss_from_pass(const ForwardPass& fp, const Eigen::MatrixXd& x, const PairSample& pairs,
                                    double lambda_s) {
  LossBreakdown out;
  out.attribute = (x - fp.x_hat).squaredNorm() / static_cast<double>(x.rows());
  const auto mean_over = [&](const std::vector<NodePair>& list, bool is_edge) {
    if (list.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [i, j] : list) sum += detail::pair_loss(fp.z.row(i).dot(fp.z.row(j)), is_edge).first;
    return sum / static_cast<double>(list.size());
  };
  out.structure = mean_over(pairs.edges, true) + mean_over(pairs.non_edges, false);
  out.total = out.attribute + lambda_s * out.structure;
  return out;
}

inline double loss(const AnomalyModel& model, const SparseMatrix& a_hat, const Eigen::MatrixXd& x,
                   const PairSample& pairs) {
  return loss_from_pass(forward(model, a_hat, x), x, pairs, model.hyper.lambda_s).total;
}

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::MatrixXd w2;
  Eigen::MatrixXd w_dec;
  LossBreakdown loss;
};

/// Analytic gradient of the training loss with respect to every weight matrix.
inline Gradients compute_gradients(const AnomalyModel& model, const SparseMatrix& a_hat, const Eigen::MatrixXd& x,
                                   const PairSample& pairs) {
  const auto fp = forward(model, a_hat, x);
  Gradients grad;
  grad.loss = loss_from_pass(fp, x, pairs, model.hyper.lambda_s);

  const Eigen::MatrixXd d_xhat = (2.0 / static_cast<double>(x.rows())) * (fp.x_hat - x);
  grad.w_dec = fp.z.transpose() * d_xhat;
  Eigen::MatrixXd d_z = d_xhat * model.w_dec.transpose();

  const auto accumulate = [&](const std::vector<NodePair>& list, bool is_edge) {
    if (list.empty()) return;
    const double weight = model.hyper.lambda_s / static_cast<double>(list.size());
    for (const auto& [i, j] : list) {
      const double g = weight * detail::pair_loss(fp.z.row(i).dot(fp.z.row(j)), is_edge).second;
      if (g == 0.0) continue;
      d_z.row(i) += g * fp.z.row(j);
      d_z.row(j) += g * fp.z.row(i);
    }
  };
  accumulate(pairs.edges, true);
  accumulate(pairs.non_edges, false);

  grad.w2 = fp.ah1.transpose() * d_z;
  const Eigen::MatrixXd d_ah1 = d_z * model.w2.transpose();
  // Â is symmetric, so Âᵀ·d = Â·d.
  Eigen::MatrixXd d_pre1 = a_hat * d_ah1;
  d_pre1 = d_pre1.cwiseProduct((fp.pre1.array() > 0.0).cast<double>().matrix());
  grad.w1 = fp.ax.transpose() * d_pre1;
  return grad;
}

/// Training stopped on a non-finite loss or weight. Carries the last finite model.
class DivergenceError : public TriageError {
 public:
  DivergenceError(const std::string& message, AnomalyModel last_good)
      : TriageError(Errc::divergence, message), last_good_(std::move(last_good)) {}
  const AnomalyModel& last_good() const noexcept { return last_good_; }

 private:
  AnomalyModel last_good_;
};

/// Full-batch gradient descent from the seeded initialization. The loss before
/// each update is appended to `loss_trace`.
inline AnomalyModel train(const TransactionGraph& g, const AnomalyHyperparams& hyper) {
  hyper.validate();
  auto model = init_model(g.feature_schema(), hyper);
  if (hyper.epochs == 0) return model;
  const auto x = standardize_features(g).values;
  const auto a_hat = normalized_adjacency(g);
  const auto pairs = sample_training_pairs(g, hyper.negative_sample_ratio, hyper.seed);
  model.loss_trace.reserve(static_cast<std::size_t>(hyper.epochs));
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Gradients grad;
    try {
      grad = compute_gradients(model, a_hat, x, pairs);
    } catch (const TriageError& e) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what(), model);
    }
    if (!std::isfinite(grad.loss.total) || !grad.w1.allFinite() || !grad.w2.allFinite() ||
        !grad.w_dec.allFinite()) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": non-finite loss or gradient", model);
    }
    AnomalyModel next = model;
    next.loss_trace.push_back(grad.loss.total);
    next.w1 -= hyper.learning_rate * grad.w1;
    next.w2 -= hyper.learning_rate * grad.w2;
    next.w_dec -= hyper.learning_rate * grad.w_dec;
    if (!next.finite()) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": weights became non-finite", model);
    }
    model = std::move(next);
  }
  return model;
}

/// True when a trailing moving average of the loss trace never rises.
inline bool loss_trend_non_increasing(std::span<const double> trace, std::size_t window = 10) {
  if (trace.size() < 2 * window || window == 0) return true;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t start = 0; start + window <= trace.size(); start += window) {
    double sum = 0.0;
    for (std::size_t i = start; i < start + window; ++i) sum += trace[i];
    const double avg = sum / static_cast<double>(window);
    if (avg > prev + 1e-12) return false;
    prev = avg;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Scoring

struct AnomalyResult {
  std::string node_id;
  double attr_error = 0.0;
  double struct_error = 0.0;
  double score = 0.0;
  bool flagged = false;
  double threshold = 0.0;
};

/// ⌈(1−q)·n⌉, robust to the representation error in (1−q).
inline std::size_t flag_budget(std::size_t n, double quantile) {
  const double raw = (1.0 - quantile) * static_cast<double>(n);
  const auto m = static_cast<std::size_t>(std::max(0.0, std::ceil(raw - 1e-9)));
  return std::min(m, n);
}

struct FlagSelection {
  std::vector<bool> flagged;
  double threshold = 0.0;
  std::size_t count = 0;
};

/// Flags the ⌈(1−q)·n⌉ highest scores; ties at the boundary go to the lower node index.
template <typename Range>
FlagSelection select_flags(const Range& scores, double quantile) {
  const std::vector<double> values(std::begin(scores), std::end(scores));
  FlagSelection out;
  out.flagged.assign(values.size(), false);
  if (values.empty()) return out;
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  out.count = flag_budget(values.size(), quantile);
  for (std::size_t r = 0; r < out.count; ++r) out.flagged[order[r]] = true;
  out.threshold = out.count > 0 ? values[order[out.count - 1]] : values[order.front()];
  return out;
}

template <typename Range>
std::vector<double> minmax_normalize(const Range& values) {
  std::vector<double> out(std::begin(values), std::end(values));
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo;
  const double span = *hi - *lo;
  for (auto& v : out) v = span > 0.0 ? (v - min) / span : 0.0;
  return out;
}

/// Per-node pairs used for the structure error: all incident edges plus
/// max(1, round(ratio·degree)) sampled non-neighbors.
inline std::vector<std::vector<std::pair<NodeIndex, bool>>> sample_scoring_pairs(const TransactionGraph& g,
                                                                                 double ratio,
                                                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::vector<std::pair<NodeIndex, bool>>> pairs(g.node_count());
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    for (const auto j : g.neighbors(i)) pairs[i].emplace_back(j, true);
    const auto negatives = std::max<long long>(1, std::llround(ratio * static_cast<double>(g.degree(i))));
    for (long long s = 0; s < negatives; ++s) {
      if (auto j = detail::draw_non_neighbor(g, i, rng)) pairs[i].emplace_back(*j, false);
    }
  }
  return pairs;
}

struct ScoreRun {
  std::vector<AnomalyResult> results;
  double quantile = 0.95;
  double threshold = 0.0;
  std::size_t flagged_count = 0;
  std::string run_id;

  std::vector<double> scores() const {
    std::vector<double> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(r.score);
    return out;
  }
};

namespace detail {
inline std::string format_g17(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}
}  // namespace detail

inline std::string scores_csv(std::span<const AnomalyResult> results) {
  std::string out = "address,attr_error,struct_error,score,flagged\n";
  for (const auto& r : results) {
    out += csv::escape(r.node_id) + ',' + detail::format_g17(r.attr_error) + ',' +
           detail::format_g17(r.struct_error) + ',' + detail::format_g17(r.score) + ',' +
           (r.flagged ? "1" : "0") + '\n';
  }
  return out;
}

/// Applies the flag rule to precomputed errors and stamps the run id.
inline ScoreRun assemble_score_run(std::vector<AnomalyResult> results, double alpha, double quantile) {
  std::vector<double> attr, strct;
  for (const auto& r : results) {
    attr.push_back(r.attr_error);
    strct.push_back(r.struct_error);
  }
  const auto attr_n = minmax_normalize(attr);
  const auto struct_n = minmax_normalize(strct);
  std::vector<double> scores(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    scores[i] = alpha * attr_n[i] + (1.0 - alpha) * struct_n[i];
    results[i].score = scores[i];
  }
  const auto flags = select_flags(scores, quantile);
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].flagged = flags.flagged[i];
    results[i].threshold = flags.threshold;
  }
  ScoreRun run;
  run.results = std::move(results);
  run.quantile = quantile;
  run.threshold = flags.threshold;
  run.flagged_count = flags.count;
  run.run_id = sha256_hex(scores_csv(run.results)).substr(0, 16);
  return run;
}

inline ScoreRun score_all(const AnomalyModel& model, const TransactionGraph& g) {
  if (model.schema != g.feature_schema()) {
    throw TriageError(Errc::schema_mismatch, "model feature schema does not match graph");
  }
  const auto x = standardize_features(g).values;
  const auto a_hat = normalized_adjacency(g);
  const auto fp = forward(model, a_hat, x);
  const auto pairs = sample_scoring_pairs(g, model.hyper.negative_sample_ratio, model.hyper.seed);

  std::vector<AnomalyResult> results(g.node_count());
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    auto& r = results[i];
    r.node_id = g.node(i).address;
    r.attr_error = (x.row(i) - fp.x_hat.row(i)).squaredNorm();
    double sum = 0.0;
    for (const auto& [j, is_edge] : pairs[i]) sum += detail::pair_loss(fp.z.row(i).dot(fp.z.row(j)), is_edge).first;
    r.struct_error = pairs[i].empty() ? 0.0 : sum / static_cast<double>(pairs[i].size());
  }
  return assemble_score_run(std::move(results), model.hyper.alpha, model.hyper.quantile);
}

/// Reads a scores CSV back and re-derives the threshold from the flagged rows.
inline ScoreRun parse_scores_csv(const std::string& text, double quantile) {
  const auto table = csv::parse(text);
  const csv::Row expected = {"address", "attr_error", "struct_error", "score", "flagged"};
  if (table.header != expected) throw TriageError(Errc::parse, "scores CSV has an unexpected header");
  ScoreRun run;
  run.quantile = quantile;
  run.threshold = std::numeric_limits<double>::infinity();
  for (const auto& row : table.rows) {
    if (row.size() != 5) throw TriageError(Errc::parse, "scores CSV row has wrong column count");
    AnomalyResult r;
    r.node_id = row[0];
    const auto num = [&](std::size_t c) {
      auto v = csv::parse_number(row[c]);
      if (!v) throw TriageError(Errc::parse, "scores CSV: bad number '" + row[c] + "'");
      return *v;
    };
    r.attr_error = num(1);
    r.struct_error = num(2);
    r.score = num(3);
    r.flagged = row[4] == "1";
    if (r.flagged) {
      ++run.flagged_count;
      run.threshold = std::min(run.threshold, r.score);
    }
    run.results.push_back(std::move(r));
  }
  if (run.flagged_count == 0) run.threshold = 1.0;
  for (auto& r : run.results) r.threshold = run.threshold;
  run.run_id = sha256_hex(text).substr(0, 16);
  return run;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned text dump, exact via 17 significant digits.

inline constexpr const char* kCheckpointMagic = "cryptotriage-model";
inline constexpr int kCheckpointVersion = 1;

inline std::string checkpoint_text(const AnomalyModel& model) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "schema_hash " << schema_hash(model.schema) << '\n';
  out << "schema " << model.schema.size();
  for (const auto& name : model.schema) out << ' ' << name;
  out << '\n';
  const auto& h = model.hyper;
  out << "h1 " << h.h1 << "\nh2 " << h.h2 << "\nlearning_rate " << h.learning_rate << "\nepochs " << h.epochs
      << "\nalpha " << h.alpha << "\nlambda_s " << h.lambda_s << "\nnegative_sample_ratio "
      << h.negative_sample_ratio << "\nseed " << h.seed << "\nquantile " << h.quantile << '\n';
  const auto dump = [&out](const char* name, const Eigen::MatrixXd& m) {
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
      out << '\n';
    }
  };
  dump("w1", model.w1);
  dump("w2", model.w2);
  dump("w_dec", model.w_dec);
  out << "loss_trace " << model.loss_trace.size();
  for (double v : model.loss_trace) out << ' ' << v;
  out << '\n';
  return out.str();
}

/// Parses a checkpoint. When `expected_schema` is given, a different schema hash is rejected.
inline AnomalyModel parse_checkpoint(const std::string& text,
                                     const std::vector<std::string>* expected_schema = nullptr) {
  std::istringstream in(text);
  const auto fail = [](const std::string& what) -> void { throw TriageError(Errc::parse, "checkpoint: " + what); };
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != kCheckpointMagic) fail("bad magic");
  if (version != kCheckpointVersion) fail("unsupported version " + std::to_string(version));

  AnomalyModel model;
  std::string stored_hash;
  in >> word >> stored_hash;
  if (word != "schema_hash") fail("missing schema_hash");
  std::size_t names = 0;
  in >> word >> names;
  if (word != "schema") fail("missing schema");
  model.schema.resize(names);
  for (auto& name : model.schema) in >> name;
  if (schema_hash(model.schema) != stored_hash) fail("schema hash does not match stored schema");
  if (expected_schema && schema_hash(*expected_schema) != stored_hash) {
    throw TriageError(Errc::schema_mismatch, "checkpoint schema hash " + stored_hash.substr(0, 12) +
                                                 " does not match graph schema");
  }

  auto& h = model.hyper;
  const auto field = [&](const char* key, auto& value) {
    in >> word >> value;
    if (word != key || !in) fail(std::string("missing ") + key);
  };
  field("h1", h.h1);
  field("h2", h.h2);
  field("learning_rate", h.learning_rate);
  field("epochs", h.epochs);
  field("alpha", h.alpha);
  field("lambda_s", h.lambda_s);
  field("negative_sample_ratio", h.negative_sample_ratio);
  field("seed", h.seed);
  field("quantile", h.quantile);

  const auto read_matrix = [&](const char* name, Eigen::MatrixXd& m) {
    Eigen::Index rows = 0, cols = 0;
    in >> word;
    if (word != "matrix") fail("expected matrix");
    in >> word >> rows >> cols;
    if (word != name || !in) fail(std::string("expected matrix ") + name);
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        std::string token;
        in >> token;
        auto v = csv::parse_number(token);
        if (!v) fail(std::string("bad value in ") + name);
        m(r, c) = *v;
      }
    }
  };
  read_matrix("w1", model.w1);
  read_matrix("w2", model.w2);
  read_matrix("w_dec", model.w_dec);
  std::size_t trace = 0;
  in >> word >> trace;
  if (word != "loss_trace") fail("missing loss_trace");
  model.loss_trace.resize(trace);
  for (auto& v : model.loss_trace) {
    std::string token;
    in >> token;
    v = csv::parse_number(token).value_or(std::numeric_limits<double>::quiet_NaN());
  }
  const auto f = static_cast<Eigen::Index>(model.schema.size());
  if (model.w1.rows() != f || model.w1.cols() != h.h1 || model.w2.rows() != h.h1 || model.w2.cols() != h.h2 ||
      model.w_dec.rows() != h.h2 || model.w_dec.cols() != f) {
    throw TriageError(Errc::dimension_mismatch, "checkpoint matrix shapes disagree with hyperparameters");
  }
  return model;
}

}  // namespace cryptotriage
