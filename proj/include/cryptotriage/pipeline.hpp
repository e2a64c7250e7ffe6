#pragma once

// Glue shared by the CLI and the HTTP service: explain one node end to end and
// lay out the files a run leaves in its work directory.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "cryptotriage/anomaly_gnn.hpp"
#include "cryptotriage/graph_store.hpp"
#include "cryptotriage/graphlime.hpp"
#include "cryptotriage/narrator.hpp"

namespace cryptotriage {

struct Workdir {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "triage.json"; }
  std::filesystem::path graph() const { return root / "graph.json"; }
  std::filesystem::path ingest_report() const { return root / "ingest_report.txt"; }
  std::filesystem::path model() const { return root / "model.ckpt"; }
  std::filesystem::path scores() const { return root / "scores.csv"; }
  std::filesystem::path score_run() const { return root / "score_run.json"; }
  std::filesystem::path explanations() const { return root / "explanations"; }
  std::filesystem::path narrator_cache() const { return root / "narrator_cache"; }
  std::filesystem::path reports() const { return root / "reports"; }

  static std::string file_stem(const std::string& address) {
    std::string out;
    for (char ch : address) {
      const bool safe = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
      out.push_back(safe ? ch : '_');
    }
    return out;
  }
  std::filesystem::path weights_file(const std::string& address) const {
    return explanations() / (file_stem(address) + ".weights.json");
  }
  std::filesystem::path narrative_file(const std::string& address) const {
    return explanations() / (file_stem(address) + ".narrative.json");
  }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << text;
    if (!out) throw TriageError(Errc::io, "cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) { return csv::read_file(path.string()); }

struct NodeExplanation {
  ExplanationWeights weights;
  PromptBundle prompt;
  Explanation narrative;
};

inline NodeExplanation explain_and_narrate(const TransactionGraph& g, const ScoreRun& run, NodeIndex node,
                                           const ExplainerConfig& explainer, const FraudTypeCatalog& catalog,
                                           const PromptOptions& prompt_options, Narrator& narrator) {
  NodeExplanation out;
  const auto scores = run.scores();
  if (scores.size() != g.node_count()) {
    throw TriageError(Errc::dimension_mismatch, "score run does not cover every graph node");
  }
  out.weights = explain_node(g, scores, node, explainer);
  out.prompt = build_prompt(g.node(node), g.feature_schema(), out.weights, catalog, prompt_options);
  out.narrative = narrator.narrate(out.prompt);
  return out;
}

inline nlohmann::ordered_json score_run_json(const ScoreRun& run, double alpha) {
  return {{"run_id", run.run_id},
          {"quantile", run.quantile},
          {"threshold", run.threshold},
          {"flagged_count", run.flagged_count},
          {"alpha", alpha},
          {"nodes", run.results.size()}};
}

inline ScoreRun load_score_run(const Workdir& wd) {
  const auto text = read_text(wd.scores());
  double quantile = 0.95;
  if (std::filesystem::exists(wd.score_run())) {
    const auto meta = nlohmann::json::parse(read_text(wd.score_run()), nullptr, false);
    if (!meta.is_discarded()) quantile = meta.value("quantile", quantile);
  }
  return parse_scores_csv(text, quantile);
}

}  // namespace cryptotriage
