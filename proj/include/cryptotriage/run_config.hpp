#pragma once

// Run configuration: defaults, overlaid by a JSON config file, overlaid by
// command-line flags. Unknown keys anywhere in the file are rejected.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "cryptotriage/anomaly_gnn.hpp"
#include "cryptotriage/case_workflow.hpp"
#include "cryptotriage/error.hpp"
#include "cryptotriage/graph_store.hpp"
#include "cryptotriage/graphlime.hpp"
#include "cryptotriage/narrator.hpp"

namespace cryptotriage {

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string static_dir;  // built dashboard assets; empty disables static serving
  std::size_t page_size = 20;
};

struct RunConfig {
  std::string nodes_csv;
  std::string edges_csv;
  std::string workdir = "triage-work";
  SchemaMap schema_map = default_schema_map();
  bool skip_duplicate_addresses = false;
  AnomalyHyperparams anomaly;
  ExplainerConfig explainer;
  std::size_t top_m = 3;
  NarratorConfig narrator;
  std::vector<FraudType> fraud_types = default_fraud_catalog().entries();
  BiasConfig bias;
  ServiceConfig service;

  void validate() const {
    anomaly.validate();
    narrator.validate();
    if (explainer.k < 1 || explainer.k_max < explainer.k || explainer.k_max > 3) {
      throw TriageError(Errc::validation, "explainer k must satisfy 1 <= k <= k_max <= 3");
    }
    if (!(explainer.rho_ratio >= 0.0) || !(explainer.tol > 0.0) || explainer.max_iter < 1) {
      throw TriageError(Errc::validation, "explainer rho_ratio/tol/max_iter out of range");
    }
    if (top_m < 1) throw TriageError(Errc::validation, "top_m must be >= 1");
    if (bias.buckets < 1 || !(bias.max_ratio >= 1.0)) {
      throw TriageError(Errc::validation, "bias buckets must be >= 1 and max_ratio >= 1");
    }
    if (service.port < 0 || service.port > 65535) throw TriageError(Errc::validation, "service port out of range");
    if (service.page_size < 1) throw TriageError(Errc::validation, "page_size must be >= 1");
    FraudTypeCatalog{fraud_types};
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json doc;
  doc["paths"] = {{"nodes_csv", c.nodes_csv}, {"edges_csv", c.edges_csv}, {"workdir", c.workdir}};
  doc["schema_map"] = {{"nodes", c.schema_map.nodes}, {"edges", c.schema_map.edges}};
  doc["ingest"] = {{"skip_duplicate_addresses", c.skip_duplicate_addresses}};
  const auto& a = c.anomaly;
  doc["anomaly"] = {{"h1", a.h1},
                    {"h2", a.h2},
                    {"learning_rate", a.learning_rate},
                    {"epochs", a.epochs},
                    {"alpha", a.alpha},
                    {"lambda_s", a.lambda_s},
                    {"negative_sample_ratio", a.negative_sample_ratio},
                    {"seed", a.seed},
                    {"quantile", a.quantile}};
  const auto& e = c.explainer;
  doc["explainer"] = {{"k", e.k},
                      {"k_max", e.k_max},
                      {"min_neighbors", e.min_neighbors},
                      {"rho_ratio", e.rho_ratio},
                      {"rho", e.rho_absolute ? nlohmann::ordered_json(*e.rho_absolute) : nlohmann::ordered_json()},
                      {"tol", e.tol},
                      {"max_iter", e.max_iter},
                      {"top_m", c.top_m}};
  const auto& n = c.narrator;
  doc["narrator"] = {{"backend", n.backend},       {"base_url", n.base_url},       {"model", n.model},
                     {"api_key_env", n.api_key_env}, {"timeout_ms", n.timeout_ms}, {"max_retries", n.max_retries},
                     {"backoff_ms", n.backoff_ms}, {"concurrency", n.concurrency}};
  auto& fraud = doc["fraud_types"] = nlohmann::ordered_json::array();
  for (const auto& f : c.fraud_types) fraud.push_back({{"name", f.name}, {"definition", f.definition}});
  doc["bias"] = {{"features", c.bias.features}, {"buckets", c.bias.buckets}, {"max_ratio", c.bias.max_ratio}};
  doc["service"] = {{"bind", c.service.bind},
                    {"port", c.service.port},
                    {"static_dir", c.service.static_dir},
                    {"page_size", c.service.page_size}};
  return doc;
}

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) throw TriageError(Errc::validation, "config: '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      throw TriageError(Errc::validation, "config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read_if(const nlohmann::json& obj, const char* key, T& target) {
  if (obj.contains(key) && !obj.at(key).is_null()) target = obj.at(key).get<T>();
}

}  // namespace detail

/// Overlays a parsed config document onto `config`.
inline void apply_config_json(RunConfig& config, const nlohmann::json& doc) {
  using detail::read_if;
  try {
    detail::reject_unknown(doc, "", {"paths", "schema_map", "ingest", "anomaly", "explainer", "narrator",
                                     "fraud_types", "bias", "service"});
    if (doc.contains("paths")) {
      const auto& p = doc["paths"];
      detail::reject_unknown(p, "paths", {"nodes_csv", "edges_csv", "workdir"});
      read_if(p, "nodes_csv", config.nodes_csv);
      read_if(p, "edges_csv", config.edges_csv);
      read_if(p, "workdir", config.workdir);
    }
    if (doc.contains("schema_map")) {
      const auto& s = doc["schema_map"];
      detail::reject_unknown(s, "schema_map", {"nodes", "edges"});
      read_if(s, "nodes", config.schema_map.nodes);
      read_if(s, "edges", config.schema_map.edges);
    }
    if (doc.contains("ingest")) {
      detail::reject_unknown(doc["ingest"], "ingest", {"skip_duplicate_addresses"});
      read_if(doc["ingest"], "skip_duplicate_addresses", config.skip_duplicate_addresses);
    }
    if (doc.contains("anomaly")) {
      const auto& a = doc["anomaly"];
      detail::reject_unknown(a, "anomaly", {"h1", "h2", "learning_rate", "epochs", "alpha", "lambda_s",
                                            "negative_sample_ratio", "seed", "quantile"});
      auto& h = config.anomaly;
      read_if(a, "h1", h.h1);
      read_if(a, "h2", h.h2);
      read_if(a, "learning_rate", h.learning_rate);
      read_if(a, "epochs", h.epochs);
      read_if(a, "alpha", h.alpha);
      read_if(a, "lambda_s", h.lambda_s);
      read_if(a, "negative_sample_ratio", h.negative_sample_ratio);
      read_if(a, "seed", h.seed);
      read_if(a, "quantile", h.quantile);
    }
    if (doc.contains("explainer")) {
      const auto& e = doc["explainer"];
      detail::reject_unknown(e, "explainer", {"k", "k_max", "min_neighbors", "rho_ratio", "rho", "tol", "max_iter", "top_m"});
      read_if(e, "k", config.explainer.k);
      read_if(e, "k_max", config.explainer.k_max);
      read_if(e, "min_neighbors", config.explainer.min_neighbors);
      read_if(e, "rho_ratio", config.explainer.rho_ratio);
      if (e.contains("rho") && !e["rho"].is_null()) config.explainer.rho_absolute = e["rho"].get<double>();
      read_if(e, "tol", config.explainer.tol);
      read_if(e, "max_iter", config.explainer.max_iter);
      read_if(e, "top_m", config.top_m);
    }
    if (doc.contains("narrator")) {
      const auto& n = doc["narrator"];
      detail::reject_unknown(n, "narrator", {"backend", "base_url", "model", "api_key_env", "timeout_ms",
                                             "max_retries", "backoff_ms", "concurrency"});
      read_if(n, "backend", config.narrator.backend);
      read_if(n, "base_url", config.narrator.base_url);
      read_if(n, "model", config.narrator.model);
      read_if(n, "api_key_env", config.narrator.api_key_env);
      read_if(n, "timeout_ms", config.narrator.timeout_ms);
      read_if(n, "max_retries", config.narrator.max_retries);
      read_if(n, "backoff_ms", config.narrator.backoff_ms);
      read_if(n, "concurrency", config.narrator.concurrency);
    }
    if (doc.contains("fraud_types")) {
      config.fraud_types.clear();
      for (const auto& f : doc["fraud_types"]) {
        detail::reject_unknown(f, "fraud_types[]", {"name", "definition"});
        config.fraud_types.push_back({f.at("name").get<std::string>(), f.value("definition", "")});
      }
    }
    if (doc.contains("bias")) {
      const auto& b = doc["bias"];
      detail::reject_unknown(b, "bias", {"features", "buckets", "max_ratio"});
      read_if(b, "features", config.bias.features);
      read_if(b, "buckets", config.bias.buckets);
      read_if(b, "max_ratio", config.bias.max_ratio);
    }
    if (doc.contains("service")) {
      const auto& s = doc["service"];
      detail::reject_unknown(s, "service", {"bind", "port", "static_dir", "page_size"});
      read_if(s, "bind", config.service.bind);
      read_if(s, "port", config.service.port);
      read_if(s, "static_dir", config.service.static_dir);
      read_if(s, "page_size", config.service.page_size);
    }
  } catch (const nlohmann::json::exception& e) {
    throw TriageError(Errc::validation, std::string("config: ") + e.what());
  }
}

inline void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TriageError(Errc::io, "cannot read config file: " + path.string());
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw TriageError(Errc::validation, "config file is not valid JSON: " + path.string());
  apply_config_json(config, doc);
}

}  // namespace cryptotriage
