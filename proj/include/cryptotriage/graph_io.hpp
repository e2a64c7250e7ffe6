#pragma once

// JSON persistence for an ingested graph. Doubles are written with nlohmann's
// shortest round-trip representation, so reload is exact and the file hash is
// stable across reruns.

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

#include "cryptotriage/error.hpp"
#include "cryptotriage/graph_store.hpp"

namespace cryptotriage {

inline nlohmann::ordered_json graph_to_json(const TransactionGraph& g) {
  nlohmann::ordered_json doc;
  doc["format"] = "cryptotriage-graph";
  doc["version"] = 1;
  doc["schema"] = g.feature_schema();
  auto& nodes = doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes()) {
    nlohmann::ordered_json node;
    node["address"] = n.address;
    node["features"] = n.features;
    node["class_label"] = n.class_label ? nlohmann::ordered_json(to_string(*n.class_label)) : nlohmann::ordered_json();
    node["time_step"] = n.time_step ? nlohmann::ordered_json(*n.time_step) : nlohmann::ordered_json();
    node["lifetime_blocks"] = n.lifetime_blocks;
    nodes.push_back(std::move(node));
  }
  auto& edges = doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges()) edges.push_back({e.src, e.dst, e.btc_mean, e.btc_median, e.btc_max});
  return doc;
}

inline TransactionGraph graph_from_json(const nlohmann::ordered_json& doc) {
  try {
    if (doc.at("format") != "cryptotriage-graph" || doc.at("version") != 1) {
      throw TriageError(Errc::parse, "not a version-1 graph document");
    }
    auto schema = doc.at("schema").get<std::vector<std::string>>();
    std::vector<WalletNode> nodes;
    for (const auto& n : doc.at("nodes")) {
      WalletNode node;
      node.address = n.at("address").get<std::string>();
      node.features = n.at("features").get<std::vector<double>>();
      if (!n.at("class_label").is_null()) node.class_label = parse_class_label(n.at("class_label").get<std::string>());
      if (!n.at("time_step").is_null()) node.time_step = n.at("time_step").get<int>();
      node.lifetime_blocks = n.at("lifetime_blocks").get<double>();
      nodes.push_back(std::move(node));
    }
    std::vector<TxEdge> edges;
    for (const auto& e : doc.at("edges")) {
      edges.push_back({e.at(0).get<NodeIndex>(), e.at(1).get<NodeIndex>(), e.at(2).get<double>(),
                       e.at(3).get<double>(), e.at(4).get<double>()});
    }
    return TransactionGraph::from_parts(std::move(schema), std::move(nodes), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw TriageError(Errc::parse, std::string("graph document: ") + e.what());
  }
}

inline void save_graph(const TransactionGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << graph_to_json(g).dump() << '\n';
  if (!out) throw TriageError(Errc::io, "cannot write " + path);
}

inline TransactionGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TriageError(Errc::io, "cannot read graph file: " + path);
  const auto doc = nlohmann::ordered_json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw TriageError(Errc::parse, "graph file is not valid JSON: " + path);
  return graph_from_json(doc);
}

}  // namespace cryptotriage
