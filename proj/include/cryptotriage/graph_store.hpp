#pragma once

// In-memory wallet/transaction graph.
//
// Nodes are wallets carrying a fixed, ordered feature schema (a subset of the
// canonical wallet statistics, in canonical order). Edges are directed
// transaction records with bitcoin-amount statistics. Two adjacency views are
// kept:
//   - undirected CSR neighbor lists (deduplicated, no self loops) used for
//     graph convolution and ego-network extraction;
//   - per-node outgoing/incoming edge-record lists used for display.
// The graph is immutable once built and safe to share between threads.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cryptotriage/csv.hpp"
#include "cryptotriage/error.hpp"

namespace cryptotriage {

using NodeIndex = std::uint32_t;

/// Wallet statistics in the order analysts read them.
inline const std::vector<std::string>& canonical_features() {
  static const std::vector<std::string> kNames = {
      "total_txs",          "btc_received_total",  "btc_sent_total",
      "num_txs_as_sender",  "num_txs_as_receiver", "btc_transacted_total",
      "fees_total",         "degree",              "btc_received_median",
      "transacted_w_address_mean",
  };
  return kNames;
}

/// Canonical node columns that are not features.
namespace node_column {
inline constexpr const char* kAddress = "address";
inline constexpr const char* kClassLabel = "class_label";
inline constexpr const char* kTimeStep = "time_step";
inline constexpr const char* kLifetime = "lifetime";
}  // namespace node_column

namespace edge_column {
inline constexpr const char* kSrc = "src";
inline constexpr const char* kDst = "dst";
inline constexpr const char* kBtcMean = "btc_mean";
inline constexpr const char* kBtcMedian = "btc_median";
inline constexpr const char* kBtcMax = "btc_max";
}  // namespace edge_column

enum class ClassLabel { licit, illicit, unknown };

inline std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::licit: return "licit";
    case ClassLabel::illicit: return "illicit";
    case ClassLabel::unknown: return "unknown";
  }
  return "unknown";
}

/// Accepts Elliptic++ class codes (1 illicit, 2 licit, 3 unknown) and names.
inline std::optional<ClassLabel> parse_class_label(std::string_view cell) {
  cell = csv::trim(cell);
  if (cell == "1" || cell == "illicit") return ClassLabel::illicit;
  if (cell == "2" || cell == "licit") return ClassLabel::licit;
  if (cell == "3" || cell == "unknown") return ClassLabel::unknown;
  return std::nullopt;
}

struct WalletNode {
  std::string address;
  std::vector<double> features;
  std::optional<ClassLabel> class_label;
  std::optional<int> time_step;
  double lifetime_blocks = 0.0;
};

struct TxEdge {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  double btc_mean = 0.0;
  double btc_median = 0.0;
  double btc_max = 0.0;
};

class TransactionGraph {
 public:
  /// Builds and validates a graph. Throws on schema-length mismatches, duplicate
  /// addresses, dangling endpoints and empty node sets.
  static TransactionGraph from_parts(std::vector<std::string> schema, std::vector<WalletNode> nodes,
                                     std::vector<TxEdge> edges) {
    if (nodes.empty()) throw TriageError(Errc::empty_graph, "graph has zero nodes");
    TransactionGraph g;
    g.schema_ = std::move(schema);
    g.nodes_ = std::move(nodes);
    g.edges_ = std::move(edges);
    g.index_.reserve(g.nodes_.size());
    for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
      const auto& node = g.nodes_[i];
      if (node.features.size() != g.schema_.size()) {
        throw TriageError(Errc::dimension_mismatch,
                          "node " + node.address + " has " + std::to_string(node.features.size()) +
                              " features, schema has " + std::to_string(g.schema_.size()));
      }
      if (!g.index_.emplace(node.address, static_cast<NodeIndex>(i)).second) {
        throw TriageError(Errc::duplicate_address, "duplicate address: " + node.address);
      }
    }
    const auto n = g.nodes_.size();
    for (const auto& e : g.edges_) {
      if (e.src >= n || e.dst >= n) {
        throw TriageError(Errc::validation, "edge endpoint out of range");
      }
    }
    g.build_adjacency();
    return g;
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const WalletNode& node(NodeIndex i) const { return nodes_.at(i); }
  const TxEdge& edge(std::size_t e) const { return edges_.at(e); }
  std::span<const WalletNode> nodes() const noexcept { return nodes_; }
  std::span<const TxEdge> edges() const noexcept { return edges_; }
  const std::vector<std::string>& feature_schema() const noexcept { return schema_; }

  std::optional<NodeIndex> find(std::string_view address) const {
    const auto it = index_.find(std::string(address));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  NodeIndex index_of(std::string_view address) const {
    if (auto idx = find(address)) return *idx;
    throw TriageError(Errc::unknown_node, "unknown node: " + std::string(address));
  }

  std::optional<std::size_t> feature_index(std::string_view name) const {
    const auto it = std::find(schema_.begin(), schema_.end(), name);
    if (it == schema_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - schema_.begin());
  }

  /// Undirected neighbors, sorted ascending, without self.
  std::span<const NodeIndex> neighbors(NodeIndex i) const {
    return {neighbors_.data() + offsets_.at(i), neighbors_.data() + offsets_.at(i + 1)};
  }
  std::size_t degree(NodeIndex i) const { return offsets_.at(i + 1) - offsets_.at(i); }

  /// Number of distinct undirected node pairs joined by at least one edge record.
  std::size_t undirected_edge_count() const noexcept { return neighbors_.size() / 2; }

  std::span<const std::size_t> out_edges(NodeIndex i) const { return out_edges_.at(i); }
  std::span<const std::size_t> in_edges(NodeIndex i) const { return in_edges_.at(i); }

  bool adjacent(NodeIndex a, NodeIndex b) const {
    const auto nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), b);
  }

 private:
  TransactionGraph() = default;

  void build_adjacency() {
    const auto n = nodes_.size();
    std::vector<std::vector<NodeIndex>> lists(n);
    out_edges_.assign(n, {});
    in_edges_.assign(n, {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto& edge = edges_[e];
      out_edges_[edge.src].push_back(e);
      in_edges_[edge.dst].push_back(e);
      if (edge.src == edge.dst) continue;
      lists[edge.src].push_back(edge.dst);
      lists[edge.dst].push_back(edge.src);
    }
    offsets_.assign(n + 1, 0);
    neighbors_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      auto& l = lists[i];
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
      neighbors_.insert(neighbors_.end(), l.begin(), l.end());
      offsets_[i + 1] = neighbors_.size();
    }
  }

  std::vector<std::string> schema_;
  std::vector<WalletNode> nodes_;
  std::vector<TxEdge> edges_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeIndex> neighbors_;
  std::vector<std::vector<std::size_t>> out_edges_;
  std::vector<std::vector<std::size_t>> in_edges_;
};

// ---------------------------------------------------------------------------
// Ingest

/// Header name -> canonical name, separately for the node and edge files.
struct SchemaMap {
  std::map<std::string, std::string> nodes;
  std::map<std::string, std::string> edges;
};

/// Identity mapping for canonical names plus the Elliptic++ wallet/edge-list headers.
inline SchemaMap default_schema_map() {
  SchemaMap map;
  for (const auto& name : canonical_features()) map.nodes[name] = name;
  map.nodes["address"] = node_column::kAddress;
  map.nodes["class_label"] = node_column::kClassLabel;
  map.nodes["class"] = node_column::kClassLabel;
  map.nodes["time_step"] = node_column::kTimeStep;
  map.nodes["Time step"] = node_column::kTimeStep;
  map.nodes["lifetime"] = node_column::kLifetime;
  map.nodes["lifetime_in_blocks"] = node_column::kLifetime;
  for (const char* name : {edge_column::kSrc, edge_column::kDst, edge_column::kBtcMean,
                           edge_column::kBtcMedian, edge_column::kBtcMax}) {
    map.edges[name] = name;
  }
  map.edges["input_address"] = edge_column::kSrc;
  map.edges["output_address"] = edge_column::kDst;
  return map;
}

struct IngestOptions {
  /// When false a repeated address aborts ingest; when true later rows are counted and skipped.
  bool skip_duplicate_addresses = false;
};

struct IngestReport {
  std::size_t node_rows = 0;
  std::size_t nodes_loaded = 0;
  std::size_t duplicates_rejected = 0;
  std::size_t edge_rows = 0;
  std::size_t edges_loaded = 0;
  std::size_t dangling_dropped = 0;
  std::size_t invalid_dropped = 0;
  std::map<std::string, std::size_t> imputed_cells;  // per canonical feature
  std::vector<std::string> warnings;

  std::size_t dropped() const noexcept { return dangling_dropped + invalid_dropped; }
  std::size_t imputed_total() const noexcept {
    std::size_t total = 0;
    for (const auto& [_, count] : imputed_cells) total += count;
    return total;
  }

  /// First line is the summary `nodes=.. edges=.. dropped=..`; details follow.
  std::string to_text() const {
    std::ostringstream out;
    out << "nodes=" << nodes_loaded << " edges=" << edges_loaded << " dropped=" << dropped()
        << " imputed=" << imputed_total() << " duplicates=" << duplicates_rejected << '\n';
    out << "node_rows=" << node_rows << " edge_rows=" << edge_rows
        << " dangling_dropped=" << dangling_dropped << " invalid_dropped=" << invalid_dropped
        << '\n';
    for (const auto& [name, count] : imputed_cells) {
      if (count > 0) out << "imputed[" << name << "]=" << count << '\n';
    }
    for (const auto& w : warnings) out << "warning: " << w << '\n';
    return out.str();
  }
};

struct IngestResult {
  TransactionGraph graph;
  IngestReport report;
};

namespace detail {

inline std::map<std::string, std::size_t> map_columns(const csv::Row& header,
                                                      const std::map<std::string, std::string>& mapping) {
  std::map<std::string, std::size_t> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto it = mapping.find(std::string(csv::trim(header[c])));
    if (it == mapping.end()) continue;
    columns.emplace(it->second, c);
  }
  return columns;
}

inline std::string_view cell(const csv::Row& row, std::size_t column) {
  return column < row.size() ? std::string_view(row[column]) : std::string_view{};
}

inline bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

}  // namespace detail

/// Builds a graph from already-parsed node and edge tables.
inline IngestResult ingest_tables(const csv::Table& node_table, const csv::Table& edge_table,
                                  const SchemaMap& schema_map, const IngestOptions& options = {}) {
  IngestReport report;
  const auto node_cols = detail::map_columns(node_table.header, schema_map.nodes);
  if (!node_cols.contains(node_column::kAddress)) {
    throw TriageError(Errc::validation, "node header mapping does not cover 'address'");
  }

  std::vector<std::string> schema;
  std::vector<std::size_t> feature_cols;
  for (const auto& name : canonical_features()) {
    if (auto it = node_cols.find(name); it != node_cols.end()) {
      schema.push_back(name);
      feature_cols.push_back(it->second);
      report.imputed_cells[name] = 0;
    }
  }

  std::vector<WalletNode> nodes;
  std::vector<std::vector<bool>> missing;
  std::unordered_map<std::string, NodeIndex> seen;
  report.node_rows = node_table.rows.size();
  const auto address_col = node_cols.at(node_column::kAddress);
  const auto class_col = node_cols.find(node_column::kClassLabel);
  const auto step_col = node_cols.find(node_column::kTimeStep);
  const auto life_col = node_cols.find(node_column::kLifetime);

  for (std::size_t r = 0; r < node_table.rows.size(); ++r) {
    const auto& row = node_table.rows[r];
    const std::string address(csv::trim(detail::cell(row, address_col)));
    if (address.empty()) {
      throw TriageError(Errc::validation, "node row " + std::to_string(r + 2) + " has no address");
    }
    if (seen.contains(address)) {
      if (!options.skip_duplicate_addresses) {
        throw TriageError(Errc::duplicate_address, "duplicate address: " + address);
      }
      ++report.duplicates_rejected;
      continue;
    }
    seen.emplace(address, static_cast<NodeIndex>(nodes.size()));

    WalletNode node;
    node.address = address;
    node.features.resize(schema.size(), 0.0);
    std::vector<bool> row_missing(schema.size(), false);
    for (std::size_t f = 0; f < schema.size(); ++f) {
      if (auto v = csv::parse_number(detail::cell(row, feature_cols[f])); v && std::isfinite(*v)) {
        node.features[f] = *v;
      } else {
        row_missing[f] = true;
        ++report.imputed_cells[schema[f]];
      }
    }
    if (class_col != node_cols.end()) node.class_label = parse_class_label(detail::cell(row, class_col->second));
    if (step_col != node_cols.end()) {
      if (auto v = csv::parse_number(detail::cell(row, step_col->second))) node.time_step = static_cast<int>(*v);
    }
    if (life_col != node_cols.end()) {
      if (auto v = csv::parse_number(detail::cell(row, life_col->second)); v && *v >= 0.0) {
        node.lifetime_blocks = *v;
      }
    }
    nodes.push_back(std::move(node));
    missing.push_back(std::move(row_missing));
  }
  if (nodes.empty()) throw TriageError(Errc::empty_graph, "node file has zero rows");
  report.nodes_loaded = nodes.size();

  // Missing cells take the column mean of the present values, i.e. zero after standardization.
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (report.imputed_cells[schema[f]] == 0) continue;
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!missing[i][f]) {
        sum += nodes[i].features[f];
        ++present;
      }
    }
    const double fill = present > 0 ? sum / static_cast<double>(present) : 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (missing[i][f]) nodes[i].features[f] = fill;
    }
  }

  const auto feature_at = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(schema.begin(), schema.end(), name);
    if (it == schema.end()) return std::nullopt;
    return static_cast<std::size_t>(it - schema.begin());
  };
  const auto degree_f = feature_at("degree");
  const auto total_f = feature_at("total_txs");
  const auto sender_f = feature_at("num_txs_as_sender");
  const auto receiver_f = feature_at("num_txs_as_receiver");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (degree_f && !missing[i][*degree_f]) {
      const double d = node.features[*degree_f];
      if (d < 0.0 || !detail::is_integral(d)) {
        report.warnings.push_back(node.address + ": degree " + std::to_string(d) +
                                  " is not a non-negative integer");
      }
    }
    if (total_f && sender_f && receiver_f && !missing[i][*total_f] && !missing[i][*sender_f] &&
        !missing[i][*receiver_f]) {
      const double total = node.features[*total_f];
      const double parts = node.features[*sender_f] + node.features[*receiver_f];
      if (std::abs(total - parts) > 1e-9) {
        std::ostringstream w;
        w << node.address << ": total_txs " << total << " != num_txs_as_sender + num_txs_as_receiver "
          << parts;
        report.warnings.push_back(w.str());
      }
    }
  }

  std::vector<TxEdge> edges;
  report.edge_rows = edge_table.rows.size();
  if (!edge_table.header.empty()) {
    const auto edge_cols = detail::map_columns(edge_table.header, schema_map.edges);
    if (!edge_cols.contains(edge_column::kSrc) || !edge_cols.contains(edge_column::kDst)) {
      throw TriageError(Errc::validation, "edge header mapping does not cover 'src' and 'dst'");
    }
    const auto stat = [&](const csv::Row& row, const char* name) {
      const auto it = edge_cols.find(name);
      if (it == edge_cols.end()) return 0.0;
      return csv::parse_number(detail::cell(row, it->second)).value_or(0.0);
    };
    for (std::size_t r = 0; r < edge_table.rows.size(); ++r) {
      const auto& row = edge_table.rows[r];
      const auto src = seen.find(std::string(csv::trim(detail::cell(row, edge_cols.at(edge_column::kSrc)))));
      const auto dst = seen.find(std::string(csv::trim(detail::cell(row, edge_cols.at(edge_column::kDst)))));
      if (src == seen.end() || dst == seen.end()) {
        ++report.dangling_dropped;
        continue;
      }
      TxEdge edge{src->second, dst->second, stat(row, edge_column::kBtcMean),
                  stat(row, edge_column::kBtcMedian), stat(row, edge_column::kBtcMax)};
      const bool has_max = edge_cols.contains(edge_column::kBtcMax);
      if (edge.btc_mean < 0.0 || edge.btc_median < 0.0 || edge.btc_max < 0.0 ||
          (has_max && (edge.btc_median > edge.btc_max || edge.btc_mean > edge.btc_max))) {
        ++report.invalid_dropped;
        report.warnings.push_back("edge row " + std::to_string(r + 2) + ": inconsistent btc statistics");
        continue;
      }
      if (!has_max) edge.btc_max = std::max(edge.btc_mean, edge.btc_median);
      edges.push_back(edge);
    }
  } else if (!edge_table.rows.empty()) {
    throw TriageError(Errc::validation, "edge file has rows but no header");
  }
  report.edges_loaded = edges.size();

  auto graph = TransactionGraph::from_parts(std::move(schema), std::move(nodes), std::move(edges));
  return {std::move(graph), std::move(report)};
}

inline IngestResult ingest(const std::string& nodes_path, const std::string& edges_path,
                           const SchemaMap& schema_map = default_schema_map(),
                           const IngestOptions& options = {}) {
  return ingest_tables(csv::read(nodes_path), csv::read(edges_path), schema_map, options);
}

// ---------------------------------------------------------------------------
// Structural queries

struct EgoNetwork {
  NodeIndex center = 0;
  int k = 1;
  std::vector<NodeIndex> members;          // sorted ascending, includes center
  std::vector<std::size_t> induced_edges;  // edge-record indices, ascending

  bool contains(NodeIndex v) const { return std::binary_search(members.begin(), members.end(), v); }
  std::size_t size() const noexcept { return members.size(); }
};

/// Closed k-hop neighborhood of `center` under the undirected view.
inline EgoNetwork ego_network(const TransactionGraph& g, NodeIndex center, int k) {
  if (center >= g.node_count()) {
    throw TriageError(Errc::unknown_node, "unknown node index " + std::to_string(center));
  }
  if (k < 1) throw TriageError(Errc::validation, "ego radius k must be >= 1");

  std::vector<int> dist(g.node_count(), -1);
  std::queue<NodeIndex> frontier;
  dist[center] = 0;
  frontier.push(center);
  EgoNetwork ego{center, k, {}, {}};
  while (!frontier.empty()) {
    const auto v = frontier.front();
    frontier.pop();
    ego.members.push_back(v);
    if (dist[v] == k) continue;
    for (const auto u : g.neighbors(v)) {
      if (dist[u] >= 0) continue;
      dist[u] = dist[v] + 1;
      frontier.push(u);
    }
  }
  std::sort(ego.members.begin(), ego.members.end());
  for (const auto v : ego.members) {
    for (const auto e : g.out_edges(v)) {
      if (dist[g.edge(e).dst] >= 0) ego.induced_edges.push_back(e);
    }
  }
  std::sort(ego.induced_edges.begin(), ego.induced_edges.end());
  return ego;
}

inline EgoNetwork ego_network(const TransactionGraph& g, std::string_view address, int k) {
  return ego_network(g, g.index_of(address), k);
}

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Symmetric normalization D^-1/2 (A + I) D^-1/2 of the undirected view.
inline SparseMatrix normalized_adjacency(const TransactionGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  std::vector<double> inv_sqrt(g.node_count());
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.node_count() + 2 * g.undirected_edge_count());
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    triplets.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
    for (const auto j : g.neighbors(i)) triplets.emplace_back(i, j, inv_sqrt[i] * inv_sqrt[j]);
  }
  SparseMatrix a_hat(n, n);
  a_hat.setFromTriplets(triplets.begin(), triplets.end());
  return a_hat;
}

/// Column-standardized feature matrix that remembers how to undo itself.
struct FeatureMatrix {
  Eigen::MatrixXd values;  // n x F, z-scored
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;   // population standard deviation; 0 marks a constant column

  bool constant_column(Eigen::Index f) const { return stdev(f) == 0.0; }

  Eigen::MatrixXd destandardize() const {
    Eigen::MatrixXd raw(values.rows(), values.cols());
    for (Eigen::Index f = 0; f < values.cols(); ++f) {
      raw.col(f) = (values.col(f).array() * stdev(f) + mean(f)).matrix();
    }
    return raw;
  }
};

inline Eigen::MatrixXd raw_features(const TransactionGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  const auto f = static_cast<Eigen::Index>(g.feature_schema().size());
  Eigen::MatrixXd x(n, f);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& feats = g.node(static_cast<NodeIndex>(i)).features;
    for (Eigen::Index c = 0; c < f; ++c) x(i, c) = feats[static_cast<std::size_t>(c)];
  }
  return x;
}

inline FeatureMatrix standardize(const Eigen::MatrixXd& raw) {
  FeatureMatrix out;
  const auto n = raw.rows();
  out.values.resize(n, raw.cols());
  out.mean.resize(raw.cols());
  out.stdev.resize(raw.cols());
  for (Eigen::Index f = 0; f < raw.cols(); ++f) {
    const double mean = raw.col(f).mean();
    const double var = (raw.col(f).array() - mean).square().sum() / static_cast<double>(n);
    double sd = std::sqrt(var);
    const double scale = std::max(1.0, raw.col(f).cwiseAbs().maxCoeff());
    if (!(sd > 1e-12 * scale)) sd = 0.0;
    out.mean(f) = mean;
    out.stdev(f) = sd;
    if (sd == 0.0) {
      out.values.col(f).setZero();
    } else {
      out.values.col(f) = ((raw.col(f).array() - mean) / sd).matrix();
    }
  }
  return out;
}

inline FeatureMatrix standardize_features(const TransactionGraph& g) { return standardize(raw_features(g)); }

}  // namespace cryptotriage
