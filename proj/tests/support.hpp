#pragma once

// Small builders shared by the test binaries.

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cryptotriage/graph_store.hpp"

namespace testsupport {

inline std::string fixture(const std::string& name) { return std::string(TEST_DATA_DIR) + "/fixtures/" + name; }
inline std::string golden(const std::string& name) { return std::string(TEST_DATA_DIR) + "/golden/" + name; }

inline std::string address(std::size_t i) { return "w" + std::to_string(i); }

/// Graph with `n` nodes, the given directed edges and the given feature rows
/// (defaults to a single zero feature per node).
inline cryptotriage::TransactionGraph make_graph(std::size_t n,
                                                 const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                                                 std::vector<std::vector<double>> features = {},
                                                 std::vector<std::string> schema = {"f0"}) {
  std::vector<cryptotriage::WalletNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i].address = address(i);
    nodes[i].features = features.empty() ? std::vector<double>(schema.size(), 0.0) : features[i];
  }
  std::vector<cryptotriage::TxEdge> tx;
  for (const auto& [a, b] : edges) tx.push_back({a, b, 1.0, 1.0, 1.0});
  return cryptotriage::TransactionGraph::from_parts(std::move(schema), std::move(nodes), std::move(tx));
}

/// Erdos-Renyi style directed edge list (no self loops).
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> random_edges(std::size_t n, double p, std::mt19937_64& rng) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::bernoulli_distribution coin(p);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) {
      if (i != j && coin(rng)) edges.emplace_back(i, j);
    }
  }
  return edges;
}

inline std::vector<std::vector<double>> random_features(std::size_t n, std::size_t f, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(f));
  for (auto& row : rows) {
    for (auto& v : row) v = normal(rng);
  }
  return rows;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("cryptotriage-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testsupport
