#pragma once

// Case lifecycle for flagged wallets:
//
//   FLAGGED -> BIAS_CHECKED -> EXPLAINED -> UNDER_REVIEW -> OVERRIDDEN | CONFIRMED -> REPORTED
//
// Every transition appends exactly one audit event. Mutations go through one
// writer lock; readers take an immutable snapshot without locking.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cryptotriage/anomaly_gnn.hpp"
#include "cryptotriage/audit_log.hpp"
#include "cryptotriage/error.hpp"
#include "cryptotriage/graph_store.hpp"
#include "cryptotriage/graphlime.hpp"
#include "cryptotriage/narrator.hpp"

namespace cryptotriage {

enum class CaseState { FLAGGED, BIAS_CHECKED, EXPLAINED, UNDER_REVIEW, OVERRIDDEN, CONFIRMED, REPORTED };

inline std::string_view to_string(CaseState s) {
  switch (s) {
    case CaseState::FLAGGED: return "FLAGGED";
    case CaseState::BIAS_CHECKED: return "BIAS_CHECKED";
    case CaseState::EXPLAINED: return "EXPLAINED";
    case CaseState::UNDER_REVIEW: return "UNDER_REVIEW";
    case CaseState::OVERRIDDEN: return "OVERRIDDEN";
    case CaseState::CONFIRMED: return "CONFIRMED";
    case CaseState::REPORTED: return "REPORTED";
  }
  return "FLAGGED";
}

inline std::optional<CaseState> parse_case_state(std::string_view s) {
  for (auto st : {CaseState::FLAGGED, CaseState::BIAS_CHECKED, CaseState::EXPLAINED, CaseState::UNDER_REVIEW,
                  CaseState::OVERRIDDEN, CaseState::CONFIRMED, CaseState::REPORTED}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Bias audit: flag-rate disparity across feature-quantile buckets.

struct BiasConfig {
  std::vector<std::string> features = {"btc_transacted_total"};
  int buckets = 4;
  double max_ratio = 3.0;
};

struct BiasBucket {
  std::string feature;
  int bucket = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t members = 0;
  std::size_t flagged = 0;
  double flag_rate = 0.0;
};

struct BiasAuditResult {
  std::string run_id;
  std::vector<BiasBucket> buckets;
  double max_disparity_ratio = 1.0;
  double bound = 3.0;
  bool passed = true;
  std::vector<std::string> notes;
};

inline constexpr double kBiasRateFloor = 1e-6;

/// Rank-based buckets (ties ordered by node index) so every bucket has ⌊n/B⌋ or ⌈n/B⌉ members.
inline BiasAuditResult compute_bias_audit(const std::vector<double>& feature_values, const std::vector<bool>& flagged,
                                          const std::string& feature, int buckets) {
  BiasAuditResult out;
  const auto n = feature_values.size();
  if (n == 0 || buckets < 1) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return feature_values[a] < feature_values[b]; });
  const auto b_count = static_cast<std::size_t>(buckets);
  std::vector<BiasBucket> bs(b_count);
  for (std::size_t r = 0; r < n; ++r) {
    const auto idx = order[r];
    auto& b = bs[r * b_count / n];
    if (b.members == 0) b.lower = feature_values[idx];
    b.upper = feature_values[idx];
    ++b.members;
    if (flagged[idx]) ++b.flagged;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t i = 0; i < b_count; ++i) {
    auto& b = bs[i];
    b.feature = feature;
    b.bucket = static_cast<int>(i);
    if (b.members == 0) continue;
    b.flag_rate = static_cast<double>(b.flagged) / static_cast<double>(b.members);
    lo = std::min(lo, b.flag_rate);
    hi = std::max(hi, b.flag_rate);
    out.buckets.push_back(b);
  }
  out.max_disparity_ratio = hi > 0.0 ? hi / std::max(lo, kBiasRateFloor) : 1.0;
  return out;
}

inline BiasAuditResult run_bias_audit(const TransactionGraph& g, const ScoreRun& run, const BiasConfig& config) {
  BiasAuditResult out;
  out.run_id = run.run_id;
  out.bound = config.max_ratio;
  out.max_disparity_ratio = 1.0;
  std::vector<bool> flagged(g.node_count(), false);
  for (const auto& r : run.results) {
    if (auto idx = g.find(r.node_id)) flagged[*idx] = r.flagged;
  }
  for (const auto& feature : config.features) {
    const auto f = g.feature_index(feature);
    if (!f) {
      out.notes.push_back("audit feature '" + feature + "' is not in the graph schema; skipped");
      continue;
    }
    std::vector<double> values(g.node_count());
    for (NodeIndex i = 0; i < g.node_count(); ++i) values[i] = g.node(i).features[*f];
    auto part = compute_bias_audit(values, flagged, feature, config.buckets);
    out.max_disparity_ratio = std::max(out.max_disparity_ratio, part.max_disparity_ratio);
    out.buckets.insert(out.buckets.end(), part.buckets.begin(), part.buckets.end());
  }
  out.passed = out.max_disparity_ratio <= config.max_ratio;
  return out;
}

inline nlohmann::ordered_json to_json(const BiasAuditResult& b) {
  nlohmann::ordered_json doc;
  doc["run_id"] = b.run_id;
  doc["max_disparity_ratio"] = b.max_disparity_ratio;
  doc["bound"] = b.bound;
  doc["passed"] = b.passed;
  doc["method"] = "heuristic: flag-rate disparity across feature-quantile buckets";
  auto& buckets = doc["buckets"] = nlohmann::ordered_json::array();
  for (const auto& x : b.buckets) {
    buckets.push_back({{"feature", x.feature},
                       {"bucket", x.bucket},
                       {"lower", x.lower},
                       {"upper", x.upper},
                       {"members", x.members},
                       {"flagged", x.flagged},
                       {"flag_rate", x.flag_rate}});
  }
  doc["notes"] = b.notes;
  return doc;
}

// ---------------------------------------------------------------------------
// Cases

struct ReviewerDecision {
  bool override_flag = false;
  std::string verdict;
  std::string notes;
  std::string reviewer_id;
  std::string decided_at;
};

struct Case {
  std::string case_id;
  std::string node_id;
  std::string run_id;
  CaseState state = CaseState::FLAGGED;
  AnomalyResult anomaly;
  nlohmann::ordered_json node_statistics = nlohmann::ordered_json::object();
  std::optional<nlohmann::ordered_json> bias_audit;
  std::optional<nlohmann::ordered_json> explanation;  // explanation-weights document
  std::optional<nlohmann::ordered_json> narrative;    // narrative document
  std::optional<ReviewerDecision> decision;
};

inline nlohmann::ordered_json to_json(const AnomalyResult& r) {
  return {{"node_id", r.node_id},         {"attr_error", r.attr_error}, {"struct_error", r.struct_error},
          {"score", r.score},             {"flagged", r.flagged},       {"threshold", r.threshold}};
}

inline nlohmann::ordered_json to_json(const Case& c) {
  nlohmann::ordered_json doc;
  doc["case_id"] = c.case_id;
  doc["node_id"] = c.node_id;
  doc["run_id"] = c.run_id;
  doc["state"] = to_string(c.state);
  doc["anomaly"] = to_json(c.anomaly);
  doc["node_statistics"] = c.node_statistics;
  doc["bias_audit"] = c.bias_audit ? *c.bias_audit : nlohmann::ordered_json();
  doc["explanation"] = c.explanation ? *c.explanation : nlohmann::ordered_json();
  doc["narrative"] = c.narrative ? *c.narrative : nlohmann::ordered_json();
  if (c.decision) {
    doc["reviewer_decision"] = {{"override", c.decision->override_flag},
                                {"verdict", c.decision->verdict},
                                {"notes", c.decision->notes},
                                {"reviewer_id", c.decision->reviewer_id},
                                {"decided_at", c.decision->decided_at}};
  } else {
    doc["reviewer_decision"] = nullptr;
  }
  return doc;
}

inline Case case_from_json(const nlohmann::ordered_json& doc) {
  try {
    Case c;
    c.case_id = doc.at("case_id").get<std::string>();
    c.node_id = doc.at("node_id").get<std::string>();
    c.run_id = doc.at("run_id").get<std::string>();
    auto state = parse_case_state(doc.at("state").get<std::string>());
    if (!state) throw TriageError(Errc::parse, "unknown case state");
    c.state = *state;
    const auto& a = doc.at("anomaly");
    c.anomaly = {a.at("node_id").get<std::string>(), a.at("attr_error").get<double>(),
                 a.at("struct_error").get<double>(), a.at("score").get<double>(), a.at("flagged").get<bool>(),
                 a.at("threshold").get<double>()};
    c.node_statistics = doc.at("node_statistics");
    if (!doc.at("bias_audit").is_null()) c.bias_audit = doc.at("bias_audit");
    if (!doc.at("explanation").is_null()) c.explanation = doc.at("explanation");
    if (!doc.at("narrative").is_null()) c.narrative = doc.at("narrative");
    if (const auto& d = doc.at("reviewer_decision"); !d.is_null()) {
      c.decision = ReviewerDecision{d.at("override").get<bool>(), d.at("verdict").get<std::string>(),
                                    d.at("notes").get<std::string>(), d.at("reviewer_id").get<std::string>(),
                                    d.at("decided_at").get<std::string>()};
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw TriageError(Errc::parse, std::string("case document: ") + e.what());
  }
}

struct DecisionInput {
  bool override_flag = false;
  std::string verdict;
  std::string notes;
  std::string reviewer_id;
};

inline nlohmann::ordered_json node_statistics_json(const TransactionGraph& g, NodeIndex i) {
  const auto& node = g.node(i);
  nlohmann::ordered_json stats;
  stats["address"] = node.address;
  stats["type"] = to_string(node.class_label.value_or(ClassLabel::unknown));
  stats["class_label"] = node.class_label ? nlohmann::ordered_json(to_string(*node.class_label)) : nlohmann::ordered_json();
  stats["time_step"] = node.time_step ? nlohmann::ordered_json(*node.time_step) : nlohmann::ordered_json();
  stats["lifetime_blocks"] = node.lifetime_blocks;
  auto& feats = stats["features"] = nlohmann::ordered_json::object();
  for (std::size_t f = 0; f < g.feature_schema().size(); ++f) feats[g.feature_schema()[f]] = node.features[f];
  return stats;
}

class CaseWorkflow {
 public:
  using Clock = std::function<std::string()>;

  struct Snapshot {
    std::map<std::string, Case> cases;
    std::vector<AuditEvent> events;
  };

  /// In-memory workflow (nothing persisted).
  explicit CaseWorkflow(Clock clock = utc_timestamp) : clock_(std::move(clock)) { publish(); }

  /// Persisted workflow rooted at `dir`: cases/<id>.json and audit.jsonl.
  explicit CaseWorkflow(const std::filesystem::path& dir, Clock clock = utc_timestamp)
      : dir_(dir), clock_(std::move(clock)), log_(dir / "audit.jsonl") {
    const auto case_dir = dir / "cases";
    std::filesystem::create_directories(case_dir);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(case_dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file);
      const auto doc = nlohmann::ordered_json::parse(in, nullptr, false);
      if (doc.is_discarded()) throw TriageError(Errc::parse, "malformed case file " + file.string());
      auto c = case_from_json(doc);
      cases_.emplace(c.case_id, std::move(c));
    }
    // The audit log is authoritative for state.
    const auto replayed = replay_states(log_.events());
    for (const auto& [id, state] : replayed) {
      auto it = cases_.find(id);
      if (it == cases_.end()) throw TriageError(Errc::validation, "audit log references missing case " + id);
      if (it->second.state != state) {
        throw TriageError(Errc::validation, "case " + id + " state disagrees with the audit log");
      }
    }
    for (const auto& [id, _] : cases_) {
      if (!replayed.contains(id)) throw TriageError(Errc::validation, "case " + id + " has no audit history");
    }
    for (const auto& c : cases_) {
      if (c.first.starts_with("case-")) next_id_ = std::max(next_id_, std::stoul(c.first.substr(5)) + 1);
    }
    publish();
  }

  /// One FLAGGED case per flagged node; re-running the same score run is a no-op.
  std::vector<Case> open_cases_from_scores(const ScoreRun& run, const TransactionGraph* graph = nullptr) {
    std::lock_guard lock(writer_);
    std::vector<Case> opened;
    for (const auto& r : run.results) {
      if (!r.flagged) continue;
      const auto key = r.node_id + '|' + run.run_id;
      if (opened_keys().contains(key)) continue;
      Case c;
      c.case_id = next_case_id();
      c.node_id = r.node_id;
      c.run_id = run.run_id;
      c.anomaly = r;
      if (graph) {
        if (auto idx = graph->find(r.node_id)) c.node_statistics = node_statistics_json(*graph, *idx);
      }
      nlohmann::ordered_json payload = {{"node_id", r.node_id}, {"run_id", run.run_id},
                                        {"score", r.score},     {"threshold", r.threshold}};
      transition(c, CaseState::FLAGGED, Actor::AI_Model, "case_opened", std::move(payload));
      opened.push_back(c);
    }
    publish();
    return opened;
  }

  /// Annotates every FLAGGED case of the run and advances it to BIAS_CHECKED.
  /// A failed audit is recorded but does not stop the pipeline.
  std::vector<std::string> apply_bias_audit(const BiasAuditResult& audit) {
    std::lock_guard lock(writer_);
    std::vector<std::string> advanced;
    const auto doc = to_json(audit);
    for (auto& [id, c] : cases_) {
      if (c.run_id != audit.run_id || c.state != CaseState::FLAGGED) continue;
      Case next = c;
      next.bias_audit = doc;
      transition(next, CaseState::BIAS_CHECKED, Actor::Bias_Checker, audit.passed ? "bias_audit_passed" : "bias_audit_failed",
                 {{"passed", audit.passed}, {"max_disparity_ratio", audit.max_disparity_ratio}, {"bound", audit.bound}});
      advanced.push_back(id);
    }
    publish();
    return advanced;
  }

  Case attach_explanation(const std::string& case_id, const nlohmann::ordered_json& weights,
                          const nlohmann::ordered_json& narrative) {
    std::lock_guard lock(writer_);
    Case c = require(case_id);
    if (c.explanation) throw TriageError(Errc::duplicate, "case " + case_id + " already has an explanation");
    expect_state(c, CaseState::BIAS_CHECKED, "attach an explanation");
    c.explanation = weights;
    c.narrative = narrative;
    nlohmann::ordered_json payload = {{"explanation", weights}, {"narrative", narrative}};
    transition(c, CaseState::EXPLAINED, Actor::Explainer, "explanation_attached", std::move(payload));
    publish();
    return c;
  }

  /// Reviewer view of a case; the first fetch of an EXPLAINED case opens the review.
  Case fetch_for_review(const std::string& case_id) {
    if (auto c = get(case_id); c && c->state != CaseState::EXPLAINED) return *c;
    std::lock_guard lock(writer_);
    Case c = require(case_id);
    if (c.state == CaseState::EXPLAINED) {
      transition(c, CaseState::UNDER_REVIEW, Actor::Human_Reviewer, "review_started", nlohmann::ordered_json::object());
      publish();
    }
    return c;
  }

  Case submit_review(const std::string& case_id, const DecisionInput& input) {
    std::lock_guard lock(writer_);
    Case c = require(case_id);
    const auto reject = [&](Errc code, const std::string& message) {
      append_event(case_id, Actor::Human_Reviewer, "decision_rejected", "",
                   {{"reason", message}, {"reviewer_id", input.reviewer_id}, {"override", input.override_flag}});
      publish();
      throw TriageError(code, message);
    };
    if (c.decision) reject(Errc::invalid_state, "case " + case_id + " already has a reviewer decision");
    if (input.reviewer_id.empty()) reject(Errc::validation, "reviewer_id is required");
    if (c.state != CaseState::UNDER_REVIEW) {
      reject(Errc::invalid_state, "case " + case_id + " is " + std::string(to_string(c.state)) +
                                      ", a decision requires UNDER_REVIEW");
    }
    c.decision = ReviewerDecision{input.override_flag, input.verdict, input.notes, input.reviewer_id, clock_()};
    nlohmann::ordered_json payload = {{"override", input.override_flag}, {"verdict", input.verdict},
                                      {"notes", input.notes},            {"reviewer_id", input.reviewer_id},
                                      {"decided_at", c.decision->decided_at}};
    transition(c, input.override_flag ? CaseState::OVERRIDDEN : CaseState::CONFIRMED, Actor::Human_Reviewer,
               "decision_recorded", std::move(payload));
    publish();
    return c;
  }

  /// Moves a decided case to REPORTED and returns the report. A REPORTED case
  /// returns the same document again without new events.
  nlohmann::ordered_json emit_report(const std::string& case_id, std::size_t top_m = 3) {
    std::lock_guard lock(writer_);
    Case c = require(case_id);
    if (c.state != CaseState::REPORTED) {
      if (c.state != CaseState::OVERRIDDEN && c.state != CaseState::CONFIRMED) {
        throw TriageError(Errc::invalid_state, "case " + case_id + " is " + std::string(to_string(c.state)) +
                                                   "; a report requires a reviewer decision");
      }
      if (!c.decision) throw TriageError(Errc::invalid_state, "case " + case_id + " has no reviewer decision");
      transition(c, CaseState::REPORTED, Actor::Regulator, "report_emitted", {{"case_id", case_id}});
      publish();
    }
    return build_report(c, log_.events(), top_m);
  }

  std::optional<Case> get(const std::string& case_id) const {
    const auto snap = snapshot();
    const auto it = snap->cases.find(case_id);
    if (it == snap->cases.end()) return std::nullopt;
    return it->second;
  }

  std::vector<Case> list(std::optional<CaseState> state = std::nullopt) const {
    const auto snap = snapshot();
    std::vector<Case> out;
    for (const auto& [_, c] : snap->cases) {
      if (!state || c.state == *state) out.push_back(c);
    }
    return out;
  }

  std::optional<Case> find_by_node(const std::string& node_id) const {
    const auto snap = snapshot();
    std::optional<Case> latest;
    for (const auto& [_, c] : snap->cases) {
      if (c.node_id == node_id) latest = c;
    }
    return latest;
  }

  std::vector<AuditEvent> audit_events(std::uint64_t from_seq = 0) const {
    const auto snap = snapshot();
    std::vector<AuditEvent> out;
    for (const auto& e : snap->events) {
      if (e.seq >= from_seq) out.push_back(e);
    }
    return out;
  }

  std::shared_ptr<const Snapshot> snapshot() const { return std::atomic_load(&snapshot_); }

  ChainVerification verify_audit_chain() const { return verify_chain(snapshot()->events); }

  /// Current state of every case as implied by the transition events alone.
  static std::map<std::string, CaseState> replay_states(const std::vector<AuditEvent>& events) {
    std::map<std::string, CaseState> states;
    for (const auto& e : events) {
      if (e.to_state.empty()) continue;
      if (auto st = parse_case_state(e.to_state)) states[e.case_id] = *st;
    }
    return states;
  }

  static nlohmann::ordered_json build_report(const Case& c, const std::vector<AuditEvent>& all_events,
                                             std::size_t top_m) {
    nlohmann::ordered_json report;
    report["report_version"] = 1;
    report["template_version"] = std::string(kPromptTemplateVersion);
    report["case_id"] = c.case_id;
    report["node_id"] = c.node_id;
    report["score_run_id"] = c.run_id;
    report["state"] = to_string(c.state);
    report["node_statistics"] = c.node_statistics;
    report["anomaly"] = {{"score", c.anomaly.score},
                         {"threshold", c.anomaly.threshold},
                         {"attr_error", c.anomaly.attr_error},
                         {"struct_error", c.anomaly.struct_error},
                         {"flagged", c.anomaly.flagged}};
    report["bias_audit"] = c.bias_audit ? *c.bias_audit : nlohmann::ordered_json();
    if (c.explanation) {
      const auto weights = explanation_from_json(*c.explanation);
      nlohmann::ordered_json expl = *c.explanation;
      auto ordered = weights.top(top_m);
      std::vector<std::string> lines;
      for (const auto& [name, value] : ordered) lines.push_back(name + ": " + format_weight(value));
      expl["top_weights"] = lines;
      report["explanation"] = std::move(expl);
    } else {
      report["explanation"] = nullptr;
    }
    report["narrative"] = c.narrative ? *c.narrative : nlohmann::ordered_json();
    if (c.decision) {
      const auto& d = *c.decision;
      report["reviewer_decision"] = {{"override", d.override_flag}, {"verdict", d.verdict}, {"notes", d.notes},
                                     {"reviewer_id", d.reviewer_id}, {"decided_at", d.decided_at}};
      std::string justification;
      if (d.override_flag) {
        justification = "Flag cleared by human reviewer " + d.reviewer_id + " (override).";
      } else {
        justification = "Flag confirmed by human reviewer " + d.reviewer_id + ".";
      }
      if (!d.verdict.empty()) justification += " Verdict: " + d.verdict + ".";
      if (!d.notes.empty()) justification += " Reviewer notes: " + d.notes;
      report["justification"] = justification;
    } else {
      report["reviewer_decision"] = nullptr;
      report["justification"] = nullptr;
    }
    auto& events = report["audit_events"] = nlohmann::ordered_json::array();
    // History up to the emission event, so later rejected attempts leave the report unchanged.
    for (const auto& e : all_events) {
      if (e.case_id != c.case_id) continue;
      events.push_back(to_json(e));
      if (e.to_state == "REPORTED") break;
    }
    return report;
  }

 private:
  const Case& require(const std::string& case_id) const {
    const auto it = cases_.find(case_id);
    if (it == cases_.end()) throw TriageError(Errc::not_found, "unknown case: " + case_id);
    return it->second;
  }

  static void expect_state(const Case& c, CaseState expected, const char* what) {
    if (c.state != expected) {
      throw TriageError(Errc::invalid_state, "cannot " + std::string(what) + ": case " + c.case_id + " is " +
                                                 std::string(to_string(c.state)) + ", expected " +
                                                 std::string(to_string(expected)));
    }
  }

  std::map<std::string, bool> opened_keys() const {
    std::map<std::string, bool> keys;
    for (const auto& [_, c] : cases_) keys[c.node_id + '|' + c.run_id] = true;
    return keys;
  }

  std::string next_case_id() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "case-%06lu", next_id_++);
    return buf;
  }

  const AuditEvent& append_event(const std::string& case_id, Actor actor, const std::string& action,
                                 const std::string& to_state, nlohmann::ordered_json payload) {
    AuditEvent e;
    e.case_id = case_id;
    e.actor = actor;
    e.action = action;
    e.to_state = to_state;
    e.payload = std::move(payload);
    e.at = clock_();
    return log_.append(std::move(e));
  }

  // Audit first, then the case document: a crash in between leaves a log that
  // is ahead of the documents, which the constructor detects.
  void transition(Case& c, CaseState to, Actor actor, const std::string& action, nlohmann::ordered_json payload) {
    append_event(c.case_id, actor, action, std::string(to_string(to)), std::move(payload));
    c.state = to;
    persist(c);
    cases_[c.case_id] = c;
  }

  void persist(const Case& c) const {
    if (!dir_) return;
    const auto path = *dir_ / "cases" / (c.case_id + ".json");
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << to_json(c).dump(2) << '\n';
      if (!out) throw TriageError(Errc::io, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
  }

  void publish() {
    auto snap = std::make_shared<Snapshot>();
    snap->cases = cases_;
    snap->events = log_.events();
    std::atomic_store(&snapshot_, std::shared_ptr<const Snapshot>(std::move(snap)));
  }

  std::optional<std::filesystem::path> dir_;
  Clock clock_;
  AuditLog log_;
  std::map<std::string, Case> cases_;
  unsigned long next_id_ = 1;
  std::mutex writer_;
  std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace cryptotriage
